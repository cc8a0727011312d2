#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coopsim/mlp.hpp"
#include "coopsim/predictor.hpp"
#include "coopsim/priority.hpp"

namespace coopsim {

enum class PlanMethod { NONE, NC, FIFO, HEUR, OPT };

std::string to_string(PlanMethod m);
PlanMethod plan_method_from_string(const std::string& s);

struct Constraint {
    double s = 0.0;        // waypoint on the recipient's route
    double t_min = -kInf;  // absolute simulation time
    double t_max = kInf;
};

struct ConstraintSet {
    int vehicle_id = -1;
    std::vector<Constraint> entries;
};

struct UrgencyFeatures {
    double d_stop = 0.0;
    double v = 0.0;
    double n_lead = 0.0;
    double n_foll = 0.0;

    std::vector<double> as_vector() const { return {d_stop, v, n_lead, n_foll}; }
};

/// One <prioritized, yielding> crossing window extracted for a shared zone;
/// disjoint windows (t_min_yield >= t_max_prio) keep the zone collision-free.
struct PairWindow {
    int prioritized = -1;
    int yielding = -1;
    int zone = -1;
    double t_max_prioritized = 0.0;
    double t_min_yielding = 0.0;
};

struct PlanResult {
    PrioritySet chosen;
    std::vector<ConstraintSet> constraints;
    std::map<int, std::vector<int>> non_conflicting;
    double metric = 0.0;          // selected candidate's combined cost
    int candidates_evaluated = 0;
    double cycle_runtime = 0.0;   // seconds, wall clock
    bool budget_exceeded = false;
    int dropped_pairs = 0;        // pairs lacking a predicted exit time
    std::vector<PairWindow> pair_windows;
    ScenePrediction chosen_prediction;
};

struct PlannerConfig {
    PlanMethod method = PlanMethod::OPT;
    int opt_budget = 100;
    double cycle_budget_s = 0.2;
    bool enforce_cycle_budget = true;
    RolloutParams rollout;
    const MlpModel* urgency_model = nullptr;  // required for HEUR
};

struct PlannerMemory {
    PrioritySet previous;
    std::optional<ScenePrediction> previous_prediction;
};

/// Unordered CAV pairs whose remaining routes still share a conflict zone
/// (conflicting approaches, neither vehicle past the shared target line).
std::vector<std::pair<int, int>> conflicting_cav_pairs(const SceneState& scene,
                                                       const RoadNetwork& net);

/// Per CAV, the other CAVs it shares no remaining conflict zone with.
std::map<int, std::vector<int>> non_conflicting_sets(const SceneState& scene,
                                                     const RoadNetwork& net);

/// All priority-set invariants, including per-zone acyclicity of the induced
/// relation; used by generators and property tests.
bool priority_set_valid(const PrioritySet& set, const SceneState& scene, const RoadNetwork& net);

/// Local-search neighborhood of the previous solution: the previous set, the
/// abort, single removals/reversals/additions and pairs of additions, in
/// deterministic order, deduplicated, truncated to `budget`.
std::vector<PrioritySet> generate_opt(const PrioritySet& previous, const SceneState& scene,
                                      const RoadNetwork& net, int budget);

UrgencyFeatures urgency_features(const SceneContext& ctx, const double* s, const double* v,
                                 int ctx_idx);

PrioritySet generate_heur(const SceneState& scene, const RoadNetwork& net, const MlpModel& model);

/// Earlier estimated arrival at the next conflict zone wins.
PrioritySet generate_fifo(const SceneState& scene, const RoadNetwork& net);

double fifo_urgency(double d_stop, double v);

/// Waiting weights 1 + t_slow/10 s, by vehicle id.
std::map<int, double> waiting_weights(const SceneState& scene);

/// Combined cost: weighted time loss plus 1 s per predicted crossing-order
/// pair not already present in the previous prediction's order.
double maneuver_metric(const ScenePrediction& pred, const RoadNetwork& net,
                       const std::map<int, double>& weights,
                       const ScenePrediction* previous_prediction);

/// Space-time constraints for every chosen pair: the prioritized vehicle's
/// predicted zone exit becomes its own t_max at the target line and the
/// yielding vehicle's t_min at the stop line.  Times are absolute.
std::vector<ConstraintSet> extract_constraints(const PrioritySet& chosen,
                                               const ScenePrediction& pred,
                                               const SceneState& scene, const RoadNetwork& net,
                                               int* dropped_pairs = nullptr,
                                               std::vector<PairWindow>* windows = nullptr);

PlanResult plan_cycle(const SceneState& scene, const RoadNetwork& net, const PlannerConfig& cfg,
                      PlannerMemory& memory);

}  // namespace coopsim
