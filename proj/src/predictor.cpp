#include "coopsim/predictor.hpp"

#include <algorithm>
#include <cmath>

namespace coopsim {

namespace {

struct ZoneTrack {
    bool entered = false;
    bool exited = false;
    int event = -1;  // index into prediction.zone_events
};

struct Occupant {
    int ctx_idx;
    int approach;
};

// shared-zone obligations of a candidate pair: the yielding vehicle must not
// occupy `zone` before the prioritized one has exited it
struct Obligation {
    int zone;
    int hi_ctx;
    int lo_ctx;
};

}  // namespace

std::vector<std::uint32_t> nc_suppress_masks(const SceneContext& ctx) {
    const RoadNetwork& net = *ctx.net;
    int n = ctx.size();
    std::vector<std::uint32_t> suppress(static_cast<std::size_t>(n), 0u);
    for (int i = 0; i < n; ++i) {
        const SceneContext::VehicleCtx& vi = ctx.vehicles[static_cast<std::size_t>(i)];
        if (vi.kind != VehicleKind::CAV) continue;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const SceneContext::VehicleCtx& vj = ctx.vehicles[static_cast<std::size_t>(j)];
            if (vj.kind != VehicleKind::CAV) continue;
            // rears at context positions are unknown here; the zone lists are
            // already trimmed to unpassed zones, so route-level disjointness
            // is what the coordinator would communicate
            bool conflict = false;
            for (const SceneContext::ZoneCtx& za : vi.zones)
                for (const SceneContext::ZoneCtx& zb : vj.zones)
                    if (za.zone == zb.zone &&
                        net.zones[static_cast<std::size_t>(za.zone)].conflicting(za.approach,
                                                                                 zb.approach))
                        conflict = true;
            if (!conflict) suppress[static_cast<std::size_t>(i)] |= 1u << j;
        }
    }
    return suppress;
}

ScenePrediction rollout_with_context(const SceneContext& ctx, const std::vector<double>& s_init,
                                     const std::vector<double>& v_init,
                                     const PrioritySet& candidate, const PrioritySet& committed,
                                     const RolloutParams& params,
                                     const std::vector<std::uint32_t>* suppress) {
    const RoadNetwork& net = *ctx.net;
    int n = ctx.size();
    ScenePrediction pred;
    pred.horizon = params.horizon;
    pred.dt = params.dt;
    pred.ids.resize(static_cast<std::size_t>(n));
    pred.routes.resize(static_cast<std::size_t>(n));
    int n_samples = static_cast<int>(std::llround(params.horizon / params.dt)) + 1;
    pred.s_traj.assign(static_cast<std::size_t>(n), {});
    pred.v_traj.assign(static_cast<std::size_t>(n), {});
    for (int i = 0; i < n; ++i) {
        auto is = static_cast<std::size_t>(i);
        pred.ids[is] = ctx.vehicles[is].id;
        pred.routes[is] = ctx.vehicles[is].route;
        pred.s_traj[is].reserve(static_cast<std::size_t>(n_samples));
        pred.v_traj[is].reserve(static_cast<std::size_t>(n_samples));
    }

    OverrideMasks cand_masks = make_override_masks(ctx, candidate);
    OverrideMasks comm_masks = make_override_masks(ctx, committed);

    std::vector<double> s = s_init;
    std::vector<double> v = v_init;
    std::vector<double> accel(static_cast<std::size_t>(n));

    std::vector<std::vector<ZoneTrack>> tracks(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        tracks[static_cast<std::size_t>(i)].resize(ctx.vehicles[static_cast<std::size_t>(i)].zones.size());
    std::vector<std::vector<Occupant>> occupants(net.zones.size());

    std::vector<Obligation> obligations;
    for (const auto& [hi, lo] : candidate.pairs) {
        int ih = ctx.index_of(hi);
        int il = ctx.index_of(lo);
        if (ih < 0 || il < 0) continue;
        for (const SceneContext::ZoneCtx& zl : ctx.vehicles[static_cast<std::size_t>(il)].zones)
            for (const SceneContext::ZoneCtx& zh : ctx.vehicles[static_cast<std::size_t>(ih)].zones)
                if (zl.zone == zh.zone &&
                    net.zones[static_cast<std::size_t>(zl.zone)].conflicting(zl.approach, zh.approach))
                    obligations.push_back({zl.zone, ih, il});
    }

    auto hi_exited = [&](int zone, int hi_ctx) {
        const auto& zones = ctx.vehicles[static_cast<std::size_t>(hi_ctx)].zones;
        for (std::size_t zi = 0; zi < zones.size(); ++zi)
            if (zones[zi].zone == zone)
                return tracks[static_cast<std::size_t>(hi_ctx)][zi].exited;
        return true;  // fully passed before the rollout began
    };

    auto on_enter = [&](int i, std::size_t slot, double t) {
        const SceneContext::ZoneCtx& z = ctx.vehicles[static_cast<std::size_t>(i)].zones[slot];
        ZoneTrack& tr = tracks[static_cast<std::size_t>(i)][slot];
        tr.entered = true;
        tr.event = static_cast<int>(pred.zone_events.size());
        pred.zone_events.push_back(
            {ctx.vehicles[static_cast<std::size_t>(i)].id, z.zone, z.approach, t, 0.0, false});
        const ConflictZone& zone = net.zones[static_cast<std::size_t>(z.zone)];
        for (const Occupant& occ : occupants[static_cast<std::size_t>(z.zone)])
            if (zone.conflicting(z.approach, occ.approach)) pred.collision = true;
        occupants[static_cast<std::size_t>(z.zone)].push_back({i, z.approach});
        for (const Obligation& ob : obligations)
            if (ob.zone == z.zone && ob.lo_ctx == i && !hi_exited(ob.zone, ob.hi_ctx))
                pred.priority_fulfilled = false;
    };

    auto on_exit = [&](int i, std::size_t slot, double t) {
        const SceneContext::ZoneCtx& z = ctx.vehicles[static_cast<std::size_t>(i)].zones[slot];
        ZoneTrack& tr = tracks[static_cast<std::size_t>(i)][slot];
        tr.exited = true;
        pred.zone_events[static_cast<std::size_t>(tr.event)].t_exit = t;
        pred.zone_events[static_cast<std::size_t>(tr.event)].exited = true;
        auto& occ = occupants[static_cast<std::size_t>(z.zone)];
        for (std::size_t k = 0; k < occ.size(); ++k)
            if (occ[k].ctx_idx == i) {
                occ.erase(occ.begin() + static_cast<std::ptrdiff_t>(k));
                break;
            }
    };

    auto update_zones = [&](double t) {
        for (int i = 0; i < n; ++i) {
            auto is = static_cast<std::size_t>(i);
            const auto& zones = ctx.vehicles[is].zones;
            for (std::size_t slot = 0; slot < zones.size(); ++slot) {
                ZoneTrack& tr = tracks[is][slot];
                if (tr.exited) continue;
                double front = s[is];
                if (!tr.entered) {
                    if (front >= zones[slot].s_stop) on_enter(i, slot, t);
                    else continue;
                }
                if (front - ctx.vehicles[is].length > zones[slot].s_target) on_exit(i, slot, t);
            }
        }
    };

    std::vector<int> lane(static_cast<std::size_t>(n));
    std::vector<double> lane_pos(static_cast<std::size_t>(n));
    PolicyInput in;
    in.s = s.data();
    in.v = v.data();
    in.lane = lane.data();
    in.lane_pos = lane_pos.data();
    if (suppress) in.suppress_mask = suppress->data();

    update_zones(0.0);  // vehicles already inside a zone count as entered at t=0
    bool truncated = false;
    for (int k = 0; k < n_samples; ++k) {
        double t = params.dt * k;
        for (int i = 0; i < n; ++i) {
            auto is = static_cast<std::size_t>(i);
            pred.s_traj[is].push_back(s[is]);
            pred.v_traj[is].push_back(v[is]);
        }
        if (params.stop_on_invalid && (pred.collision || !pred.priority_fulfilled)) {
            truncated = true;
            break;
        }
        if (k + 1 == n_samples) break;
        in.overrides = t < params.commit_window ? &comm_masks : &cand_masks;
        ctx.locate(s.data(), lane.data(), lane_pos.data());
        for (int i = 0; i < n; ++i) accel[static_cast<std::size_t>(i)] = eval_accel(ctx, in, i, params.driver);
        for (int i = 0; i < n; ++i) {
            auto is = static_cast<std::size_t>(i);
            v[is] = std::max(0.0, v[is] + accel[is] * params.dt);
            s[is] += v[is] * params.dt;
        }
        update_zones(t + params.dt);
    }
    (void)truncated;

    // crossing order: per zone, ordered conflicting pairs by entry time
    for (std::size_t a = 0; a < pred.zone_events.size(); ++a) {
        for (std::size_t b = 0; b < pred.zone_events.size(); ++b) {
            if (a == b) continue;
            const PredZoneEvent& ea = pred.zone_events[a];
            const PredZoneEvent& eb = pred.zone_events[b];
            if (ea.zone != eb.zone) continue;
            if (!net.zones[static_cast<std::size_t>(ea.zone)].conflicting(ea.approach, eb.approach))
                continue;
            if (ea.t_enter < eb.t_enter ||
                (ea.t_enter == eb.t_enter && ea.vehicle_id < eb.vehicle_id))
                pred.crossing_order.emplace_back(ea.vehicle_id, eb.vehicle_id);
        }
    }
    std::sort(pred.crossing_order.begin(), pred.crossing_order.end());
    pred.crossing_order.erase(
        std::unique(pred.crossing_order.begin(), pred.crossing_order.end()),
        pred.crossing_order.end());
    return pred;
}

ScenePrediction rollout(const SceneState& scene, const RoadNetwork& net,
                        const PrioritySet& candidate, const PrioritySet& committed,
                        const RolloutParams& params) {
    std::vector<double> s0;
    SceneContext ctx = build_context(net, scene, true, &s0);
    std::vector<double> v0(ctx.vehicles.size());
    for (std::size_t i = 0; i < ctx.vehicles.size(); ++i)
        v0[i] = scene.vehicles[static_cast<std::size_t>(ctx.vehicles[i].scene_index)].v;
    std::vector<std::uint32_t> suppress = nc_suppress_masks(ctx);
    return rollout_with_context(ctx, s0, v0, candidate, committed, params, &suppress);
}

double time_loss(const ScenePrediction& pred, const RoadNetwork& net,
                 const std::map<int, double>& weights) {
    double total = 0.0;
    for (std::size_t i = 0; i < pred.ids.size(); ++i) {
        const auto& s = pred.s_traj[i];
        const auto& v = pred.v_traj[i];
        if (s.size() < 2) continue;
        double integral = 0.0;
        double prev = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) {
            int lane = net.lane_at(pred.routes[i], s[k]);
            double v_max = net.lanes[static_cast<std::size_t>(lane)].speed_limit;
            double f = std::max(0.0, 1.0 - v[k] / v_max);
            if (k > 0) integral += 0.5 * (prev + f) * pred.dt;
            prev = f;
        }
        auto it = weights.find(pred.ids[i]);
        total += (it == weights.end() ? 1.0 : it->second) * integral;
    }
    return total;
}

}  // namespace coopsim
