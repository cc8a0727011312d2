#include "coopsim/mlp.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "coopsim/rng.hpp"

namespace coopsim {

using nlohmann::json;

int MlpModel::param_count() const {
    int n = 0;
    for (int l = 0; l < n_layers(); ++l) n += dims[l] * dims[l + 1] + dims[l + 1];
    return n;
}

MlpModel make_mlp(int n_in, std::uint64_t seed, const std::vector<int>& hidden) {
    MlpModel m;
    m.dims.push_back(n_in);
    for (int h : hidden) m.dims.push_back(h);
    m.dims.push_back(1);
    Rng rng(mix_seed(seed, 0x6d6c70));
    for (int l = 0; l < m.n_layers(); ++l) {
        int fan_in = m.dims[l], fan_out = m.dims[l + 1];
        double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::vector<double> w(static_cast<std::size_t>(fan_in * fan_out));
        for (double& x : w) x = rng.uniform(-bound, bound);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
    }
    m.feat_mean.assign(static_cast<std::size_t>(n_in), 0.0);
    m.feat_std.assign(static_cast<std::size_t>(n_in), 1.0);
    return m;
}

namespace {

struct Workspace {
    // activations per layer (post-tanh), plus the normalized input
    std::vector<std::vector<double>> act;
    std::vector<std::vector<double>> delta;

    void resize(const MlpModel& m) {
        act.resize(m.dims.size());
        delta.resize(m.dims.size());
        for (std::size_t l = 0; l < m.dims.size(); ++l) {
            act[l].resize(static_cast<std::size_t>(m.dims[l]));
            delta[l].resize(static_cast<std::size_t>(m.dims[l]));
        }
    }
};

double forward_ws(const MlpModel& m, const double* x, Workspace& ws) {
    int n_in = m.n_in();
    for (int i = 0; i < n_in; ++i)
        ws.act[0][static_cast<std::size_t>(i)] =
            (x[i] - m.feat_mean[static_cast<std::size_t>(i)]) / m.feat_std[static_cast<std::size_t>(i)];
    for (int l = 0; l < m.n_layers(); ++l) {
        int in = m.dims[static_cast<std::size_t>(l)];
        int out = m.dims[static_cast<std::size_t>(l) + 1];
        const double* W = m.weights[static_cast<std::size_t>(l)].data();
        const double* b = m.biases[static_cast<std::size_t>(l)].data();
        const double* a = ws.act[static_cast<std::size_t>(l)].data();
        double* z = ws.act[static_cast<std::size_t>(l) + 1].data();
        bool last = l + 1 == m.n_layers();
        for (int o = 0; o < out; ++o) {
            double acc = b[o];
            const double* row = W + static_cast<std::ptrdiff_t>(o) * in;
            for (int i = 0; i < in; ++i) acc += row[i] * a[i];
            z[o] = last ? acc : std::tanh(acc);
        }
    }
    return ws.act.back()[0];
}

// dy/dtheta; assumes forward_ws was just called on the same input
void backward_ws(const MlpModel& m, Workspace& ws, double* grad) {
    ws.delta.back()[0] = 1.0;
    for (int l = m.n_layers() - 1; l >= 0; --l) {
        int in = m.dims[static_cast<std::size_t>(l)];
        int out = m.dims[static_cast<std::size_t>(l) + 1];
        const double* W = m.weights[static_cast<std::size_t>(l)].data();
        const double* a = ws.act[static_cast<std::size_t>(l)].data();
        double* dlo = ws.delta[static_cast<std::size_t>(l)].data();
        const double* dhi = ws.delta[static_cast<std::size_t>(l) + 1].data();
        for (int i = 0; i < in; ++i) dlo[i] = 0.0;
        // grad offset of layer l
        int off = 0;
        for (int k = 0; k < l; ++k) off += m.dims[static_cast<std::size_t>(k)] * m.dims[static_cast<std::size_t>(k) + 1] + m.dims[static_cast<std::size_t>(k) + 1];
        double* gW = grad + off;
        double* gb = gW + in * out;
        for (int o = 0; o < out; ++o) {
            double d = dhi[o];
            const double* row = W + static_cast<std::ptrdiff_t>(o) * in;
            double* grow = gW + static_cast<std::ptrdiff_t>(o) * in;
            for (int i = 0; i < in; ++i) {
                grow[i] = d * a[i];
                dlo[i] += d * row[i];
            }
            gb[o] = d;
        }
        if (l > 0) {
            // through tanh of layer l's input activations
            for (int i = 0; i < in; ++i) dlo[i] *= 1.0 - a[i] * a[i];
        }
    }
}

std::vector<double*> param_ptrs(MlpModel& m) {
    std::vector<double*> out;
    for (int l = 0; l < m.n_layers(); ++l) {
        for (double& w : m.weights[static_cast<std::size_t>(l)]) out.push_back(&w);
        for (double& b : m.biases[static_cast<std::size_t>(l)]) out.push_back(&b);
    }
    return out;
}

}  // namespace

double mlp_forward(const MlpModel& m, const double* x) {
    thread_local Workspace ws;
    ws.resize(m);
    return forward_ws(m, x, ws);
}

double mlp_forward(const MlpModel& m, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != m.n_in())
        throw std::runtime_error("mlp_forward: expected " + std::to_string(m.n_in()) +
                                 " features, got " + std::to_string(x.size()));
    return mlp_forward(m, x.data());
}

double mlp_forward_backward(const MlpModel& m, const double* x, double* grad) {
    thread_local Workspace ws;
    ws.resize(m);
    double y = forward_ws(m, x, ws);
    backward_ws(m, ws, grad);
    return y;
}

double grad_check(const MlpModel& m, const std::vector<double>& x, double epsilon) {
    MlpModel copy = m;
    std::vector<double> analytic(static_cast<std::size_t>(m.param_count()));
    mlp_forward_backward(copy, x.data(), analytic.data());
    std::vector<double*> params = param_ptrs(copy);
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        double saved = *params[p];
        *params[p] = saved + epsilon;
        double hi = mlp_forward(copy, x.data());
        *params[p] = saved - epsilon;
        double lo = mlp_forward(copy, x.data());
        *params[p] = saved;
        double fd = (hi - lo) / (2.0 * epsilon);
        double err = std::fabs(analytic[p] - fd) / std::max(std::fabs(analytic[p]), 1e-8);
        worst = std::max(worst, err);
    }
    return worst;
}

TrainReport train_pairwise(MlpModel& m, const std::vector<PairSample>& dataset,
                           const TrainConfig& cfg) {
    if (dataset.empty()) throw std::runtime_error("train_pairwise: empty dataset");
    auto n_in = static_cast<std::size_t>(m.n_in());
    for (const PairSample& p : dataset)
        if (p.x_i.size() != n_in || p.x_j.size() != n_in || !std::isfinite(p.target))
            throw std::runtime_error("train_pairwise: malformed sample");

    if (cfg.normalize_from_data) {
        std::vector<double> mean(n_in, 0.0), var(n_in, 0.0);
        double count = 2.0 * static_cast<double>(dataset.size());
        for (const PairSample& p : dataset)
            for (std::size_t f = 0; f < n_in; ++f) mean[f] += p.x_i[f] + p.x_j[f];
        for (std::size_t f = 0; f < n_in; ++f) mean[f] /= count;
        for (const PairSample& p : dataset)
            for (std::size_t f = 0; f < n_in; ++f) {
                double di = p.x_i[f] - mean[f], dj = p.x_j[f] - mean[f];
                var[f] += di * di + dj * dj;
            }
        for (std::size_t f = 0; f < n_in; ++f) {
            m.feat_mean[f] = mean[f];
            m.feat_std[f] = std::max(std::sqrt(var[f] / count), 1e-6);
        }
    }

    int n_params = m.param_count();
    std::vector<double> g_i(static_cast<std::size_t>(n_params));
    std::vector<double> g_j(static_cast<std::size_t>(n_params));
    std::vector<double> batch_grad(static_cast<std::size_t>(n_params));
    std::vector<double> velocity(static_cast<std::size_t>(n_params), 0.0);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double*> params = param_ptrs(m);

    Rng rng(mix_seed(cfg.seed, 0x747261696e));
    TrainReport report;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                      order.size() - done);
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            for (std::size_t b = 0; b < batch; ++b) {
                const PairSample& p = dataset[order[done + b]];
                double yi = mlp_forward_backward(m, p.x_i.data(), g_i.data());
                double yj = mlp_forward_backward(m, p.x_j.data(), g_j.data());
                double e = yi - yj - p.target;
                loss_sum += e * e;
                double scale = 2.0 * e / static_cast<double>(batch);
                for (int k = 0; k < n_params; ++k)
                    batch_grad[static_cast<std::size_t>(k)] +=
                        scale * (g_i[static_cast<std::size_t>(k)] - g_j[static_cast<std::size_t>(k)]);
            }
            for (int k = 0; k < n_params; ++k) {
                auto ks = static_cast<std::size_t>(k);
                velocity[ks] = cfg.momentum * velocity[ks] - cfg.learning_rate * batch_grad[ks];
                *params[ks] += velocity[ks];
            }
            done += batch;
        }
        double mse = loss_sum / static_cast<double>(dataset.size());
        if (!std::isfinite(mse))
            throw std::runtime_error("train_pairwise: loss diverged (NaN/inf) at epoch " +
                                     std::to_string(epoch) + "; lr=" + std::to_string(cfg.learning_rate));
        report.epoch_loss.push_back(mse);
    }
    report.final_rmse = report.epoch_loss.empty() ? 0.0 : std::sqrt(report.epoch_loss.back());
    return report;
}

double pairwise_sign_accuracy(const MlpModel& m, const std::vector<PairSample>& dataset) {
    std::size_t considered = 0, correct = 0;
    for (const PairSample& p : dataset) {
        if (std::fabs(p.target) <= 1e-9) continue;
        ++considered;
        double d = mlp_forward(m, p.x_i.data()) - mlp_forward(m, p.x_j.data());
        if ((d > 0.0) == (p.target > 0.0) && d != 0.0) ++correct;
    }
    return considered == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(considered);
}

std::string model_to_json(const MlpModel& m) {
    json doc;
    doc["mlp_version"] = 1;
    doc["dims"] = m.dims;
    doc["weights"] = m.weights;
    doc["biases"] = m.biases;
    doc["feature_mean"] = m.feat_mean;
    doc["feature_std"] = m.feat_std;
    return doc.dump(1);
}

MlpModel model_from_json(const std::string& text) {
    json doc = json::parse(text);
    if (doc.at("mlp_version").get<int>() != 1)
        throw std::runtime_error("model file: unsupported mlp_version");
    MlpModel m;
    m.dims = doc.at("dims").get<std::vector<int>>();
    m.weights = doc.at("weights").get<std::vector<std::vector<double>>>();
    m.biases = doc.at("biases").get<std::vector<std::vector<double>>>();
    m.feat_mean = doc.at("feature_mean").get<std::vector<double>>();
    m.feat_std = doc.at("feature_std").get<std::vector<double>>();
    if (m.dims.size() < 2 || m.weights.size() != m.dims.size() - 1 ||
        m.biases.size() != m.dims.size() - 1)
        throw std::runtime_error("model file: inconsistent dimensions");
    for (int l = 0; l < m.n_layers(); ++l) {
        auto ls = static_cast<std::size_t>(l);
        if (static_cast<int>(m.weights[ls].size()) != m.dims[ls] * m.dims[ls + 1] ||
            static_cast<int>(m.biases[ls].size()) != m.dims[ls + 1])
            throw std::runtime_error("model file: layer " + std::to_string(l) + " size mismatch");
    }
    for (double s : m.feat_std)
        if (!(s > 0.0)) throw std::runtime_error("model file: feature_std must be > 0");
    return m;
}

void save_model(const MlpModel& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write model file '" + path + "'");
    f << model_to_json(m) << '\n';
}

MlpModel load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open model file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace coopsim
