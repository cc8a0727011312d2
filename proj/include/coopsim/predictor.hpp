#pragma once

#include <map>
#include <utility>
#include <vector>

#include "coopsim/driver.hpp"
#include "coopsim/priority.hpp"
#include "coopsim/sim_core.hpp"

namespace coopsim {

struct RolloutParams {
    double horizon = 12.0;
    double dt = 0.1;
    double commit_window = 1.0;  // previously committed set stays in force
    DriverParams driver;
    bool stop_on_invalid = false;  // abandon rollouts the planner will discard
};

struct PredZoneEvent {
    int vehicle_id = -1;
    int zone = -1;
    int approach = -1;
    double t_enter = 0.0;
    double t_exit = 0.0;
    bool exited = false;
};

struct ScenePrediction {
    double horizon = 0.0;
    double dt = 0.0;
    std::vector<int> ids;                      // rollout vehicles
    std::vector<int> routes;                   // route driven in the rollout
    std::vector<std::vector<double>> s_traj;   // [vehicle][sample], front bumper
    std::vector<std::vector<double>> v_traj;
    std::vector<PredZoneEvent> zone_events;
    bool collision = false;
    bool priority_fulfilled = true;
    std::vector<std::pair<int, int>> crossing_order;  // ordered conflicting id pairs

    int index_of(int vehicle_id) const {
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ids[i] == vehicle_id) return static_cast<int>(i);
        return -1;
    }
};

/// Closed-loop prediction of the whole scene: CAVs drive their actual routes,
/// HDVs their most conflicting continuation; the committed priority set is in
/// force for the first commit_window seconds, the candidate afterwards.
/// Predicted CAVs know which other CAVs cannot conflict with them (the
/// coordinator shares that over the protocol), so their yielding toward those
/// is suppressed exactly as in the closed loop.
ScenePrediction rollout(const SceneState& scene, const RoadNetwork& net,
                        const PrioritySet& candidate, const PrioritySet& committed,
                        const RolloutParams& params);

/// Per-CAV suppression masks mirroring the communicated non-conflicting sets.
std::vector<std::uint32_t> nc_suppress_masks(const SceneContext& ctx);

/// Context-reusing variant for evaluating many candidates per cycle.
ScenePrediction rollout_with_context(const SceneContext& ctx, const std::vector<double>& s_init,
                                     const std::vector<double>& v_init,
                                     const PrioritySet& candidate, const PrioritySet& committed,
                                     const RolloutParams& params,
                                     const std::vector<std::uint32_t>* suppress = nullptr);

/// Weighted relative-velocity-loss integral (trapezoidal over the samples);
/// the reference speed is the lane limit at the predicted position and the
/// per-sample loss is floored at zero.  Missing weights default to 1.
double time_loss(const ScenePrediction& pred, const RoadNetwork& net,
                 const std::map<int, double>& weights = {});

}  // namespace coopsim
