#pragma once

#include "coopsim/driver.hpp"
#include "coopsim/protocol.hpp"

namespace coopsim {

/// Controller state of one CAV: the accepted constraints plus route knowledge
/// received over the protocol.
struct CavControlState {
    std::vector<Constraint> constraints;   // absolute times
    std::vector<int> non_conflicting;
    long maneuver_id = -1;
    DriverParams params;
    double jerk_comf = 1.5;  // reserved for a smoother multi-step tracker

    void clear_maneuver() {
        constraints.clear();
        maneuver_id = -1;
    }
};

struct CavDecision {
    double accel = 0.0;
    bool reject = false;  // solver found the accepted maneuver no longer drivable
    ManeuverResponse::Reason reason = ManeuverResponse::Reason::none;
};

/// Acceleration needed to reach a waypoint `d` ahead within `tau` seconds,
/// cruising at most at v_cap; +inf when unreachable even at full throttle.
double arrival_accel(double d, double v, double tau, double v_cap);

/// Baseline right-of-way behavior, overlaid with the active constraints:
/// unreached t_min stop lines become yield points, binding t_max target lines
/// add the acceleration needed to arrive in time, and gap yielding toward
/// non-conflicting CAVs is suppressed.
CavDecision cav_accel(const SceneState& scene, const RoadNetwork& net, int vehicle_id,
                      const CavControlState& control);

/// Hot-path variant on a prebuilt context (suppress masks prepared by caller).
CavDecision cav_accel_with_context(const SceneContext& ctx, const PolicyInput& in, int ctx_idx,
                                   double now, const CavControlState& control);

}  // namespace coopsim
