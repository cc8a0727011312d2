#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace coopsim {

/// Small fully connected net: tanh hidden layers, linear scalar output,
/// z-score input normalization baked into the model.
struct MlpModel {
    std::vector<int> dims;                 // e.g. {4, 16, 16, 1}
    std::vector<std::vector<double>> weights;  // per layer, row-major [out][in]
    std::vector<std::vector<double>> biases;
    std::vector<double> feat_mean;
    std::vector<double> feat_std;

    int n_in() const { return dims.front(); }
    int n_layers() const { return static_cast<int>(dims.size()) - 1; }
    int param_count() const;
};

/// Glorot-uniform initialized model, deterministic under seed.
MlpModel make_mlp(int n_in, std::uint64_t seed, const std::vector<int>& hidden = {16, 16});

double mlp_forward(const MlpModel& m, const double* x);
double mlp_forward(const MlpModel& m, const std::vector<double>& x);

/// Forward pass plus dy/dtheta into `grad` (param_count entries, layer order
/// W0 b0 W1 b1 ..., weights row-major).  Returns y.
double mlp_forward_backward(const MlpModel& m, const double* x, double* grad);

/// Max over parameters of |analytic - central difference| / max(|analytic|, 1e-8).
double grad_check(const MlpModel& m, const std::vector<double>& x, double epsilon);

struct PairSample {
    std::vector<double> x_i;
    std::vector<double> x_j;
    double target = 0.0;  // desired u_i - u_j
};

struct TrainConfig {
    int epochs = 200;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    int batch_size = 64;
    std::uint64_t seed = 1;
    bool normalize_from_data = true;
};

struct TrainReport {
    std::vector<double> epoch_loss;  // mean squared error per epoch
    double final_rmse = 0.0;
};

/// SGD with momentum on mean (f(x_i) - f(x_j) - target)^2.  Computes and
/// stores feature normalization from the dataset first.  Throws on NaN loss.
TrainReport train_pairwise(MlpModel& m, const std::vector<PairSample>& dataset,
                           const TrainConfig& cfg);

/// Fraction of pairs where sign(f(x_i) - f(x_j)) matches sign(target);
/// pairs with |target| <= 1e-9 are skipped.
double pairwise_sign_accuracy(const MlpModel& m, const std::vector<PairSample>& dataset);

std::string model_to_json(const MlpModel& m);
MlpModel model_from_json(const std::string& text);
void save_model(const MlpModel& m, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace coopsim
