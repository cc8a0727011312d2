#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "coopsim/map_model.hpp"
#include "coopsim/priority.hpp"
#include "coopsim/sim_core.hpp"

namespace coopsim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr int kMaxVehicles = 32;  // bitmask-limited

struct DriverParams {
    double v0_factor = 1.0;
    double headway_T = 1.5;     // s
    double a_max = 2.0;         // m/s^2
    double b_comf = 2.0;        // m/s^2
    double s0 = 2.0;            // m
    double delta_exp = 4.0;
    double b_emergency = 6.0;   // m/s^2
    double a_lat_max = 2.5;     // m/s^2, curvature speed cap
    double tau_gap = 1.5;       // s
    double lookahead = 100.0;   // m, heading-diff window
};

struct EnvObservation {
    double d_stop = kInf;        // to next conflict-zone stop line on route
    double v = 0.0;
    double v_max = 0.0;          // speed limit at position
    double delta_psi_max = 0.0;  // max upcoming |heading diff| within lookahead
    double d_lead = kInf;        // front-to-front distance
    double v_lead = 0.0;
};

struct GapObservation {
    double d_targ = kInf;        // own distance to the target line
    double v = 0.0;
    double d_stop_other = kInf;  // prioritized vehicle's distance to its stop line
    double v_other = 0.0;
};

/// Accept iff the prioritized vehicle arrives later than we can clear, with a
/// tau_gap margin.  No conflicting vehicle (d_stop_other = inf) always accepts.
bool gap_accept(const GapObservation& gap, const DriverParams& p);

/// Standard IDM against the nearer of the lead vehicle and a virtual standing
/// obstacle at `yield_point` (distance, inf if none); desired speed is the
/// limit reduced by the curvature cap derived from delta_psi_max.
double idm_accel(const EnvObservation& obs, double yield_point, const DriverParams& p);

// ---------------------------------------------------------------------------
// Evaluation context: everything position-independent about a scene snapshot,
// precomputed so closed-loop rollouts stay cheap.  A context pins each
// vehicle's motion route and, separately, the route other vehicles assume for
// it (turn intentions are not shared, so observers expect the most
// conflicting continuation).
// ---------------------------------------------------------------------------

struct SceneContext {
    struct LeadSpan {
        int other = -1;         // ctx index
        double begin = 0.0, end = 0.0;  // other's motion-route interval
        double offset = 0.0;            // other's s + offset = position on own route
    };
    struct ZoneCtx {
        int zone = -1;
        int approach = -1;
        double s_stop = 0.0, s_target = 0.0;
    };
    struct VehicleCtx {
        int scene_index = -1;
        int id = -1;
        VehicleKind kind = VehicleKind::HDV;
        int route = -1;           // motion route
        double length = kVehicleLength;
        std::vector<ZoneCtx> zones;    // not yet fully passed, sorted by s_stop
        std::vector<LeadSpan> lead_spans;
    };

    const RoadNetwork* net = nullptr;
    std::vector<VehicleCtx> vehicles;      // active vehicles only
    std::array<int, kMaxVehicles> ctx_of_id{};  // vehicle id -> ctx index (or -1)

    int size() const { return static_cast<int>(vehicles.size()); }
    int index_of(int vehicle_id) const {
        return vehicle_id >= 0 && vehicle_id < kMaxVehicles ? ctx_of_id[static_cast<std::size_t>(vehicle_id)] : -1;
    }

    /// Current lane index and in-lane position for every vehicle; the
    /// conflict checks are anchored to lanes because only the lane, not the
    /// chosen turn, is observable from outside.
    void locate(const double* s, int* lane, double* lane_pos) const;
};

/// conservative_motion: move HDVs along their most conflicting continuation
/// (prediction mode).  Otherwise vehicles move on their actual routes and
/// only the opponent view is conservative (closed-loop simulation mode).
/// Returns initial positions remapped onto the context routes.
SceneContext build_context(const RoadNetwork& net, const SceneState& scene,
                           bool conservative_motion, std::vector<double>* s0 = nullptr);

/// Per-vehicle forced-priority bitmasks over ctx indices.
struct OverrideMasks {
    std::array<std::uint32_t, kMaxVehicles> over{};   // never yield to j
    std::array<std::uint32_t, kMaxVehicles> under{};  // always yield to j
};

OverrideMasks make_override_masks(const SceneContext& ctx, const PrioritySet& set);

struct PolicyInput {
    const double* s = nullptr;  // by ctx index
    const double* v = nullptr;
    const int* lane = nullptr;          // current lane per vehicle (ctx.locate)
    const double* lane_pos = nullptr;   // in-lane position per vehicle
    const OverrideMasks* overrides = nullptr;       // optional
    const std::uint32_t* suppress_mask = nullptr;   // optional, by ctx index
};

/// Car-following + yield composition for one vehicle; `extra_yield` adds a
/// caller-imposed stop point (distance), used for t_min constraints.
/// `yield_dist_out`, when set, receives the distance to the governing yield
/// point (inf when free).
double eval_accel(const SceneContext& ctx, const PolicyInput& in, int ctx_idx,
                  const DriverParams& p, double extra_yield = kInf,
                  double* yield_dist_out = nullptr);

/// Distance to the next stop line not yet crossed (inf if none).
double next_stop_distance(const SceneContext& ctx, int ctx_idx, double s);

/// Spec-level HDV policy on a scene snapshot: builds a fresh context, applies
/// optional priority overrides and returns the IDM acceleration.
double hdv_policy(const SceneState& scene, const RoadNetwork& net, int vehicle_id,
                  const PrioritySet* priority_overrides, const DriverParams& p);

}  // namespace coopsim
