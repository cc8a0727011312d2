#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coopsim/cav_agent.hpp"
#include "coopsim/metrics.hpp"
#include "coopsim/planner.hpp"
#include "coopsim/protocol.hpp"

namespace coopsim {

struct ScenarioSpec {
    std::string map_id;
    std::uint64_t seed = 1;
    int vehicle_count = 10;
    int cav_percentage = 0;
    double duration = 60.0;
    PlanMethod method = PlanMethod::NONE;
};

struct RunConfig {
    DriverParams driver;
    int opt_budget = 100;
    double cycle_budget_s = 0.2;
    bool enforce_cycle_budget = true;
    const MlpModel* heur_model = nullptr;
};

struct RunResult {
    RunMetrics metrics;
    RunLog log;
    // audit trail for the safety acceptance checks
    int cav_conflicts_under_maneuver = 0;   // conflicting co-occupancy of a planned pair
    long constraint_window_violations = 0;  // emitted windows with t_min < t_max
    int compliance_violations = 0;          // constraint waypoints crossed out of window
    int maneuver_rejects = 0;
    int maneuver_aborts = 0;
    bool failed = false;
    std::string failure;
};

/// Rejection-samples initial vehicle placements: entry routes, consistent
/// car-following gaps, speeds below the limit, no zone occupancy at t=0.
SceneState sample_scenario(const RoadNetwork& net, const ScenarioSpec& spec);

/// Full closed loop: 20 Hz integration, 5 Hz planning, protocol round trips,
/// constraint tracking, reinsertion, event logging.
RunResult run_simulation(const RoadNetwork& net, const ScenarioSpec& spec, const RunConfig& cfg);

// --- urgency-model training -------------------------------------------------

struct DatasetConfig {
    int n_runs = 200;
    double run_length = 120.0;
    std::uint64_t seed = 1;
    double label_horizon = 10.0;
};

/// All-CAV runs on random maps; at each planning step one random conflicting
/// pair is evaluated both ways on the label horizon and the time-loss
/// difference becomes the pairwise regression target.
std::vector<PairSample> generate_heur_dataset(const std::vector<const RoadNetwork*>& nets,
                                              const DatasetConfig& cfg,
                                              const DriverParams& driver);

std::string dataset_to_json(const std::vector<PairSample>& data, const DatasetConfig& cfg);
std::vector<PairSample> dataset_from_json(const std::string& text);

struct TrainHeurReport {
    std::size_t n_samples = 0;
    std::size_t n_holdout = 0;
    double sign_accuracy = 0.0;  // on the 20 % holdout
    double final_rmse = 0.0;
};

/// Dataset generation, 80/20 split, training, holdout sign accuracy.
TrainHeurReport train_heur(const std::vector<const RoadNetwork*>& nets, const DatasetConfig& dcfg,
                           const TrainConfig& tcfg, const DriverParams& driver, MlpModel& model);

// --- experiment sweep --------------------------------------------------------

struct SweepConfig {
    std::vector<std::string> map_paths;
    int seeds_per_map = 30;
    std::uint64_t seed_base = 1;
    std::vector<int> cav_percentages = {0, 20, 40, 60, 80, 100};
    std::vector<PlanMethod> methods = {PlanMethod::NONE, PlanMethod::NC, PlanMethod::FIFO,
                                       PlanMethod::HEUR, PlanMethod::OPT};
    int vehicle_count = 10;
    double duration = 60.0;
    std::string heur_model_path;
    int threads = 0;  // 0 = hardware concurrency
    DriverParams driver;
};

struct SweepRow {
    std::string map_id;
    std::uint64_t seed = 0;
    PlanMethod method = PlanMethod::NONE;
    int cav_pct = 0;
    RunMetrics metrics;
    int cav_conflicts_under_maneuver = 0;
    long constraint_window_violations = 0;
    int compliance_violations = 0;
    int collisions = 0;
    bool failed = false;
};

struct AggregateCell {
    std::string map_id;  // "all" for the cross-map aggregate
    PlanMethod method = PlanMethod::NONE;
    int cav_pct = 0;
    int runs = 0;
    double mean_wait = 0.0;
    double throughput = 0.0;
    double stop_rate = 0.0;
    double critical_pet_rate = 0.0;
    // relative to the same-map/pct NONE cell (1.0 for NONE itself)
    double wait_ratio = 1.0;
    double throughput_ratio = 1.0;
};

struct ExperimentReport {
    std::vector<SweepRow> rows;
    std::vector<AggregateCell> aggregates;
    int failed_runs = 0;
    double wall_time_s = 0.0;

    const AggregateCell* find(const std::string& map_id, PlanMethod m, int pct) const;
};

ExperimentReport run_experiment(const SweepConfig& cfg);

std::string report_csv(const ExperimentReport& report);
std::string report_summary(const ExperimentReport& report);
void write_report(const ExperimentReport& report, const std::string& out_dir);

/// Re-run a single sweep cell from its CSV identity.
RunResult replay_cell(const RoadNetwork& net, const std::string& map_id, std::uint64_t seed,
                      PlanMethod method, int cav_pct, const SweepConfig& cfg);

// --- small helpers shared with the acceptance suite --------------------------

/// printf %.9g, the CSV number format (byte-stable across replays).
std::string fmt_g9(double v);

/// One-sided sign test: P[X >= successes] under X ~ Binomial(n, 1/2).
double sign_test_p(int successes, int n);

std::string map_id_from_path(const std::string& path);

DriverParams driver_params_from_json_text(const std::string& text, DriverParams base);
SweepConfig sweep_config_from_json_file(const std::string& path);

}  // namespace coopsim
