#pragma once

#include <map>
#include <vector>

#include "coopsim/map_model.hpp"
#include "coopsim/rng.hpp"

namespace coopsim {

// Fixed rates: the HDV model runs at 20 Hz, the planner at 5 Hz.
inline constexpr double kDtSim = 0.05;
inline constexpr int kStepsPerPlanCycle = 4;

inline constexpr double kVehicleLength = 4.5;
inline constexpr double kSlowSpeed = 10.0 / 3.6;  // t_slow threshold
inline constexpr double kWaitSpeed = 5.0 / 3.6;   // waiting-time threshold
inline constexpr double kStopSpeed = 1.0 / 3.6;   // stop-counting threshold
inline constexpr double kReinsertTriggerGap = 20.0;   // past the last target line
inline constexpr double kReinsertLeadGap = 45.0;      // before the first conflict zone
inline constexpr double kReinsertSpeedCap = 30.0 / 3.6;

enum class VehicleKind { HDV, CAV };

struct VehicleState {
    int id = -1;
    VehicleKind kind = VehicleKind::HDV;
    int route = -1;
    double s = 0.0;       // front bumper, route arc length
    double v = 0.0;
    double a = 0.0;       // last applied
    double length = kVehicleLength;
    double t_slow = 0.0;      // time since v dropped below 10 km/h
    double wait_accum = 0.0;  // total time below 5 km/h
    bool ever_stopped = false;
    int crossings = 0;        // completed passes of the scene

    int entry_lane = -1;      // originating entry lane, reinsertion target
    double pass_point_s = 0.0;  // last conflict-zone target line on the route
    bool held = false;        // waiting off-map for reinsertion space

    double rear() const { return s - length; }
};

struct SceneState {
    double time = 0.0;
    long step_index = 0;  // time == step_index * dt used to produce it
    std::vector<VehicleState> vehicles;

    int find(int vehicle_id) const {
        for (std::size_t i = 0; i < vehicles.size(); ++i)
            if (vehicles[i].id == vehicle_id) return static_cast<int>(i);
        return -1;
    }
    const VehicleState& require(int vehicle_id) const;
};

/// Puts a vehicle on a route, refreshing the cached route-derived fields.
void assign_route(const RoadNetwork& net, VehicleState& veh, int route, double s);

/// Semi-implicit Euler step of every non-held vehicle's speed thresholds and
/// bookkeeping.  Used by the closed-loop simulation and kept allocation-free.
void step_in_place(std::vector<VehicleState>& vehicles, const double* accels, double dt,
                   double& time, long& step_index);

/// Functional step: every vehicle needs an acceleration entry; unknown ids throw.
SceneState step(const SceneState& scene, const std::map<int, double>& accelerations, double dt);

struct ReinsertParams {
    double headway_T = 1.5;  // safety gap is s0 + v*T
    double gap_s0 = 2.0;
};

/// Removes the vehicle from its finished pass and places it back on a fresh
/// random route from its originating entry lane, at least 45 m ahead of the
/// first conflict zone and behind any queue tail.  Sets `held` when no
/// upstream space exists; callers retry on later steps.
void reinsert(SceneState& scene, const RoadNetwork& net, int vehicle_id, Rng& rng,
              const ReinsertParams& params = {});

/// True once the vehicle has passed the reinsertion trigger point.
bool pass_completed(const VehicleState& veh);

}  // namespace coopsim
