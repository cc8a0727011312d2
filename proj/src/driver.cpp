#include "coopsim/driver.hpp"

#include <cmath>
#include <stdexcept>

namespace coopsim {

bool gap_accept(const GapObservation& gap, const DriverParams& p) {
    if (std::isinf(gap.d_stop_other)) return true;
    double eta_other = gap.d_stop_other / std::max(gap.v_other, 0.1);
    double eta_self_clear = gap.d_targ / std::max(gap.v, 0.5);
    return eta_other > eta_self_clear + p.tau_gap;
}

namespace {

inline double pow_delta(double x, double delta) {
    if (delta == 4.0) {
        double x2 = x * x;
        return x2 * x2;
    }
    return std::pow(x, delta);
}

inline double desired_speed(double v_max, double delta_psi, const DriverParams& p) {
    double v_des = p.v0_factor * v_max;
    double kappa = delta_psi / p.lookahead;
    if (kappa > 1e-9) v_des = std::min(v_des, std::sqrt(p.a_lat_max / kappa));
    return std::max(v_des, 0.1);
}

inline double route_speed_limit(const RoadNetwork& net, int route, double s) {
    return net.lanes[static_cast<std::size_t>(net.lane_at(route, s))].speed_limit;
}

}  // namespace

double idm_accel(const EnvObservation& obs, double yield_point, const DriverParams& p) {
    double v_des = desired_speed(obs.v_max, obs.delta_psi_max, p);
    double gap_lead = obs.d_lead - kVehicleLength;
    double gap = std::min(gap_lead, yield_point);
    double interaction = 0.0;
    if (std::isfinite(gap)) {
        double dv = gap_lead < yield_point ? obs.v - obs.v_lead : obs.v;
        double s_star =
            p.s0 + obs.v * p.headway_T + obs.v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf));
        double ratio = s_star / std::max(gap, 0.01);
        interaction = ratio * ratio;
    }
    double a = p.a_max * (1.0 - pow_delta(obs.v / v_des, p.delta_exp) - interaction);
    return std::clamp(a, -p.b_emergency, p.a_max);
}

SceneContext build_context(const RoadNetwork& net, const SceneState& scene,
                           bool conservative_motion, std::vector<double>* s0) {
    SceneContext ctx;
    ctx.net = &net;
    ctx.ctx_of_id.fill(-1);
    if (s0) s0->clear();

    for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
        const VehicleState& veh = scene.vehicles[i];
        if (veh.held) continue;
        SceneContext::VehicleCtx vc;
        vc.scene_index = static_cast<int>(i);
        vc.id = veh.id;
        vc.kind = veh.kind;
        vc.length = veh.length;

        double s = veh.s;
        int route = veh.route;
        if (conservative_motion && veh.kind == VehicleKind::HDV)
            route = most_conflicting_continuation(net, veh.route, veh.s, &s);
        vc.route = route;

        for (const RouteZone& rz : net.route_zones[static_cast<std::size_t>(route)])
            if (s - vc.length <= rz.s_target)
                vc.zones.push_back({rz.zone, rz.approach, rz.s_stop, rz.s_target});

        if (veh.id >= 0 && veh.id < kMaxVehicles)
            ctx.ctx_of_id[static_cast<std::size_t>(veh.id)] = static_cast<int>(ctx.vehicles.size());
        ctx.vehicles.push_back(std::move(vc));
        if (s0) s0->push_back(s);
    }

    int n = ctx.size();
    for (int i = 0; i < n; ++i) {
        SceneContext::VehicleCtx& vi = ctx.vehicles[static_cast<std::size_t>(i)];
        const Route& ri = net.routes[static_cast<std::size_t>(vi.route)];
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const SceneContext::VehicleCtx& vj = ctx.vehicles[static_cast<std::size_t>(j)];
            // car-following: where j's motion route shares lanes with i's
            for (std::size_t li = 0; li < ri.lanes.size(); ++li) {
                double start_j = net.lane_start_in_route(vj.route, ri.lanes[li]);
                if (start_j < 0.0) continue;
                double len = net.lanes[static_cast<std::size_t>(ri.lanes[li])].centerline.length();
                double offset = ri.lane_start_s[li] - start_j;
                if (!vi.lead_spans.empty()) {
                    SceneContext::LeadSpan& prev = vi.lead_spans.back();
                    if (prev.other == j && std::abs(prev.offset - offset) < 1e-9 &&
                        std::abs(prev.end - start_j) < 1e-9) {
                        prev.end = start_j + len;
                        continue;
                    }
                }
                vi.lead_spans.push_back({j, start_j, start_j + len, offset});
            }
        }
    }
    return ctx;
}

void SceneContext::locate(const double* s, int* lane, double* lane_pos) const {
    for (int i = 0; i < size(); ++i) {
        auto is = static_cast<std::size_t>(i);
        const Route& r = net->routes[static_cast<std::size_t>(vehicles[is].route)];
        std::size_t li = 0;
        while (li + 1 < r.lanes.size() && s[i] >= r.lane_start_s[li + 1]) ++li;
        lane[i] = r.lanes[li];
        lane_pos[i] = s[i] - r.lane_start_s[li];
    }
}

OverrideMasks make_override_masks(const SceneContext& ctx, const PrioritySet& set) {
    OverrideMasks m;
    for (const auto& [hi, lo] : set.pairs) {
        int ih = ctx.index_of(hi);
        int il = ctx.index_of(lo);
        if (ih < 0 || il < 0) continue;
        m.over[static_cast<std::size_t>(ih)] |= 1u << il;
        m.under[static_cast<std::size_t>(il)] |= 1u << ih;
    }
    return m;
}

double next_stop_distance(const SceneContext& ctx, int ctx_idx, double s) {
    for (const SceneContext::ZoneCtx& z : ctx.vehicles[static_cast<std::size_t>(ctx_idx)].zones)
        if (z.s_stop >= s) return z.s_stop - s;
    return kInf;
}

double eval_accel(const SceneContext& ctx, const PolicyInput& in, int ctx_idx,
                  const DriverParams& p, double extra_yield, double* yield_dist_out) {
    const SceneContext::VehicleCtx& vc = ctx.vehicles[static_cast<std::size_t>(ctx_idx)];
    const RoadNetwork& net = *ctx.net;
    int n = ctx.size();
    double si = in.s[ctx_idx];
    double vi = in.v[ctx_idx];

    double d_lead = kInf;
    double v_lead = 0.0;
    for (const SceneContext::LeadSpan& span : vc.lead_spans) {
        double so = in.s[span.other];
        if (so < span.begin || so >= span.end) continue;
        double m = so + span.offset;
        if (m > si && m - si < d_lead) {
            d_lead = m - si;
            v_lead = in.v[span.other];
        }
    }

    std::uint32_t over = in.overrides ? in.overrides->over[static_cast<std::size_t>(ctx_idx)] : 0u;
    std::uint32_t under = in.overrides ? in.overrides->under[static_cast<std::size_t>(ctx_idx)] : 0u;
    std::uint32_t suppress = in.suppress_mask ? in.suppress_mask[ctx_idx] : 0u;

    double yield_dist = extra_yield;
    double d_stop_next = kInf;
    for (const SceneContext::ZoneCtx& z : vc.zones) {
        double d = z.s_stop - si;
        if (d < 0.0) continue;  // stop line already crossed; clear the zone
        if (std::isinf(d_stop_next)) d_stop_next = d;
        if (d > yield_dist) break;  // already held upstream of this zone
        const auto& per_lane = net.zone_lane[static_cast<std::size_t>(z.zone)];
        const ConflictZone& zone = net.zones[static_cast<std::size_t>(z.zone)];
        bool reject = false;
        for (int j = 0; j < n && !reject; ++j) {
            if (j == ctx_idx) continue;
            std::uint32_t bit = 1u << j;
            if ((suppress & bit) || (over & bit)) continue;
            double x = in.lane_pos[j];
            double len_j = ctx.vehicles[static_cast<std::size_t>(j)].length;
            for (const ZoneLaneEntry& e : per_lane[static_cast<std::size_t>(in.lane[j])]) {
                if (!zone.conflicting(z.approach, e.approach)) continue;
                if (x - len_j > e.target_off) continue;  // conflict consumed
                if (under & bit) {
                    reject = true;
                    break;
                }
                // static right of way: only the losing approach runs the gap check
                if (!zone.must_yield(z.approach, e.approach)) continue;
                GapObservation gap;
                gap.d_targ = z.s_target - si;
                gap.v = vi;
                gap.d_stop_other = std::max(0.0, e.stop_off - x);
                gap.v_other = in.v[j];
                if (!gap_accept(gap, p)) {
                    reject = true;
                    break;
                }
            }
        }
        if (reject && vi * vi <= 2.0 * p.b_emergency * std::max(d, 1e-3)) {
            yield_dist = std::min(yield_dist, d);
            break;
        }
    }

    if (yield_dist_out) *yield_dist_out = yield_dist;
    EnvObservation obs;
    obs.d_stop = d_stop_next;
    obs.v = vi;
    obs.v_max = route_speed_limit(net, vc.route, si);
    obs.delta_psi_max = net.routes[static_cast<std::size_t>(vc.route)].heading_diff(si);
    obs.d_lead = d_lead;
    obs.v_lead = v_lead;
    return idm_accel(obs, yield_dist, p);
}

double hdv_policy(const SceneState& scene, const RoadNetwork& net, int vehicle_id,
                  const PrioritySet* priority_overrides, const DriverParams& p) {
    std::vector<double> s0;
    SceneContext ctx = build_context(net, scene, false, &s0);
    int idx = ctx.index_of(vehicle_id);
    if (idx < 0) throw std::runtime_error("hdv_policy: unknown vehicle id " + std::to_string(vehicle_id));
    std::vector<double> v(ctx.vehicles.size());
    for (std::size_t i = 0; i < ctx.vehicles.size(); ++i)
        v[i] = scene.vehicles[static_cast<std::size_t>(ctx.vehicles[i].scene_index)].v;
    std::vector<int> lane(ctx.vehicles.size());
    std::vector<double> lane_pos(ctx.vehicles.size());
    ctx.locate(s0.data(), lane.data(), lane_pos.data());
    OverrideMasks masks;
    if (priority_overrides) masks = make_override_masks(ctx, *priority_overrides);
    PolicyInput in;
    in.s = s0.data();
    in.v = v.data();
    in.lane = lane.data();
    in.lane_pos = lane_pos.data();
    in.overrides = priority_overrides ? &masks : nullptr;
    return eval_accel(ctx, in, idx, p);
}

}  // namespace coopsim
