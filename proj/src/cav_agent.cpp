#include "coopsim/cav_agent.hpp"

#include <cmath>

namespace coopsim {

double arrival_accel(double d, double v, double tau, double v_cap) {
    if (d <= 0.0) return -kInf;
    if (tau <= 1e-6) return kInf;
    if (v * tau >= d) return 2.0 * (d - v * tau) / (tau * tau);  // may dawdle
    double a = 2.0 * (d - v * tau) / (tau * tau);
    if (v + a * tau <= v_cap + 1e-9) return a;
    // accelerate to the cap, then cruise
    double dv = v_cap - v;
    if (dv <= 0.0) return v_cap * tau >= d ? 0.0 : kInf;
    double denom = v_cap * tau - d;
    if (denom <= 1e-9) return kInf;
    return dv * dv / (2.0 * denom);
}

CavDecision cav_accel_with_context(const SceneContext& ctx, const PolicyInput& in, int ctx_idx,
                                   double now, const CavControlState& control) {
    const SceneContext::VehicleCtx& vc = ctx.vehicles[static_cast<std::size_t>(ctx_idx)];
    const RoadNetwork& net = *ctx.net;
    const DriverParams& p = control.params;
    double s = in.s[ctx_idx];
    double v = in.v[ctx_idx];

    double extra_yield = kInf;
    for (const Constraint& c : control.constraints)
        if (std::isfinite(c.t_min) && now < c.t_min && s < c.s)
            extra_yield = std::min(extra_yield, c.s - s);

    CavDecision out;
    double yield_dist = kInf;
    out.accel = eval_accel(ctx, in, ctx_idx, p, extra_yield, &yield_dist);

    for (const Constraint& c : control.constraints) {
        if (!std::isfinite(c.t_max) || s >= c.s) continue;
        // lowest cap on the way to the waypoint bounds the catch-up profile
        double v_cap = kInf;
        const Route& r = net.routes[static_cast<std::size_t>(vc.route)];
        for (std::size_t li = 0; li < r.lanes.size(); ++li) {
            double lane_end = li + 1 < r.lanes.size() ? r.lane_start_s[li + 1] : r.total_length;
            if (lane_end <= s) continue;
            v_cap = std::min(v_cap, net.lanes[static_cast<std::size_t>(r.lanes[li])].speed_limit);
            if (lane_end >= c.s) break;
        }
        double a_req = arrival_accel(c.s - s, v, c.t_max - now, v_cap);
        if (a_req > p.a_max + 0.25) {
            out.reject = true;
            out.reason = ManeuverResponse::Reason::infeasible_tmax;
            continue;
        }
        if (a_req > out.accel) out.accel = std::min(a_req, p.a_max);
    }
    (void)yield_dist;

    // never command past the local speed limit
    double limit = net.lanes[static_cast<std::size_t>(net.lane_at(vc.route, s))].speed_limit;
    if (out.accel > 0.0 && v + out.accel * kDtSim > limit)
        out.accel = std::max(0.0, (limit - v) / kDtSim);
    out.accel = std::clamp(out.accel, -p.b_emergency, p.a_max);
    return out;
}

CavDecision cav_accel(const SceneState& scene, const RoadNetwork& net, int vehicle_id,
                      const CavControlState& control) {
    std::vector<double> s0;
    SceneContext ctx = build_context(net, scene, false, &s0);
    int idx = ctx.index_of(vehicle_id);
    if (idx < 0) throw std::runtime_error("cav_accel: unknown vehicle id " + std::to_string(vehicle_id));
    std::vector<double> v(ctx.vehicles.size());
    std::vector<std::uint32_t> suppress(ctx.vehicles.size(), 0u);
    for (std::size_t i = 0; i < ctx.vehicles.size(); ++i)
        v[i] = scene.vehicles[static_cast<std::size_t>(ctx.vehicles[i].scene_index)].v;
    for (int other : control.non_conflicting) {
        int oi = ctx.index_of(other);
        if (oi >= 0) suppress[static_cast<std::size_t>(idx)] |= 1u << oi;
    }
    std::vector<int> lane(ctx.vehicles.size());
    std::vector<double> lane_pos(ctx.vehicles.size());
    ctx.locate(s0.data(), lane.data(), lane_pos.data());
    PolicyInput in;
    in.s = s0.data();
    in.v = v.data();
    in.lane = lane.data();
    in.lane_pos = lane_pos.data();
    in.suppress_mask = suppress.data();
    return cav_accel_with_context(ctx, in, idx, scene.time, control);
}

}  // namespace coopsim
