#include "coopsim/planner.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace coopsim {

std::string to_string(PlanMethod m) {
    switch (m) {
        case PlanMethod::NONE: return "none";
        case PlanMethod::NC: return "nc";
        case PlanMethod::FIFO: return "fifo";
        case PlanMethod::HEUR: return "heur";
        case PlanMethod::OPT: return "opt";
    }
    return "?";
}

PlanMethod plan_method_from_string(const std::string& s) {
    if (s == "none") return PlanMethod::NONE;
    if (s == "nc") return PlanMethod::NC;
    if (s == "fifo") return PlanMethod::FIFO;
    if (s == "heur") return PlanMethod::HEUR;
    if (s == "opt") return PlanMethod::OPT;
    throw std::runtime_error("unknown planner method '" + s + "' (none|nc|fifo|heur|opt)");
}

namespace {

// zones still shared by two vehicles' remaining routes, conflicting approaches
bool pair_conflicts(const VehicleState& a, const VehicleState& b, const RoadNetwork& net) {
    return routes_conflict_remaining(net, a.route, a.rear(), b.route, b.rear());
}

std::vector<const VehicleState*> active_cavs(const SceneState& scene) {
    std::vector<const VehicleState*> out;
    for (const VehicleState& v : scene.vehicles)
        if (!v.held && v.kind == VehicleKind::CAV) out.push_back(&v);
    std::sort(out.begin(), out.end(),
              [](const VehicleState* a, const VehicleState* b) { return a->id < b->id; });
    return out;
}

}  // namespace

std::vector<std::pair<int, int>> conflicting_cav_pairs(const SceneState& scene,
                                                       const RoadNetwork& net) {
    std::vector<std::pair<int, int>> out;
    auto cavs = active_cavs(scene);
    for (std::size_t a = 0; a < cavs.size(); ++a)
        for (std::size_t b = a + 1; b < cavs.size(); ++b)
            if (pair_conflicts(*cavs[a], *cavs[b], net))
                out.emplace_back(cavs[a]->id, cavs[b]->id);
    return out;
}

std::map<int, std::vector<int>> non_conflicting_sets(const SceneState& scene,
                                                     const RoadNetwork& net) {
    std::map<int, std::vector<int>> out;
    auto cavs = active_cavs(scene);
    for (const VehicleState* v : cavs) out[v->id] = {};
    for (std::size_t a = 0; a < cavs.size(); ++a)
        for (std::size_t b = a + 1; b < cavs.size(); ++b)
            if (!pair_conflicts(*cavs[a], *cavs[b], net)) {
                out[cavs[a]->id].push_back(cavs[b]->id);
                out[cavs[b]->id].push_back(cavs[a]->id);
            }
    for (auto& [id, vec] : out) std::sort(vec.begin(), vec.end());
    return out;
}

bool priority_set_valid(const PrioritySet& set, const SceneState& scene, const RoadNetwork& net) {
    for (const auto& [hi, lo] : set.pairs) {
        if (hi == lo) return false;
        if (set.contains(lo, hi)) return false;
        int ih = scene.find(hi), il = scene.find(lo);
        if (ih < 0 || il < 0) return false;
        const VehicleState& a = scene.vehicles[static_cast<std::size_t>(ih)];
        const VehicleState& b = scene.vehicles[static_cast<std::size_t>(il)];
        if (a.kind != VehicleKind::CAV || b.kind != VehicleKind::CAV) return false;
        if (!pair_conflicts(a, b, net)) return false;
    }
    // restricted to each single zone the relation must stay acyclic
    for (std::size_t zi = 0; zi < net.zones.size(); ++zi) {
        std::map<int, std::vector<int>> adj;
        for (const auto& [hi, lo] : set.pairs) {
            const VehicleState& a = scene.require(hi);
            const VehicleState& b = scene.require(lo);
            bool shares = false;
            for (const RouteZone& ra : net.route_zones[static_cast<std::size_t>(a.route)]) {
                if (ra.zone != static_cast<int>(zi) || a.rear() > ra.s_target) continue;
                for (const RouteZone& rb : net.route_zones[static_cast<std::size_t>(b.route)])
                    if (rb.zone == static_cast<int>(zi) && b.rear() <= rb.s_target &&
                        net.zones[zi].conflicting(ra.approach, rb.approach))
                        shares = true;
            }
            if (shares) adj[hi].push_back(lo);
        }
        if (adj.empty()) continue;
        std::map<int, int> color;  // 0 new, 1 open, 2 done
        std::vector<std::pair<int, int>> stack;
        for (const auto& [start, _] : adj) {
            if (color[start]) continue;
            stack.push_back({start, 0});
            while (!stack.empty()) {
                auto& [node, child] = stack.back();
                if (child == 0) color[node] = 1;
                auto it = adj.find(node);
                int degree = it == adj.end() ? 0 : static_cast<int>(it->second.size());
                if (child >= degree) {
                    color[node] = 2;
                    stack.pop_back();
                    continue;
                }
                int next = it->second[static_cast<std::size_t>(child++)];
                if (color[next] == 1) return false;
                if (color[next] == 0) stack.push_back({next, 0});
            }
        }
    }
    return true;
}

std::vector<PrioritySet> generate_opt(const PrioritySet& previous, const SceneState& scene,
                                      const RoadNetwork& net, int budget) {
    if (budget < 1) budget = 1;
    std::vector<PrioritySet> out;
    auto push = [&](const PrioritySet& cand) {
        if (static_cast<int>(out.size()) >= budget) return;
        for (const PrioritySet& seen : out)
            if (seen == cand) return;
        out.push_back(cand);
    };

    push(previous);
    push(PrioritySet{});
    for (const auto& [hi, lo] : previous.pairs) {
        PrioritySet cand = previous;
        cand.remove(hi, lo);
        push(cand);
    }
    for (const auto& [hi, lo] : previous.pairs) {
        PrioritySet cand = previous;
        cand.remove(hi, lo);
        cand.add(lo, hi);
        if (priority_set_valid(cand, scene, net)) push(cand);
    }
    std::vector<std::pair<int, int>> additions;  // ordered pairs not in previous
    for (const auto& [a, b] : conflicting_cav_pairs(scene, net)) {
        if (previous.involves(a, b)) continue;
        additions.emplace_back(a, b);
        additions.emplace_back(b, a);
    }
    for (const auto& [hi, lo] : additions) {
        PrioritySet cand = previous;
        cand.add(hi, lo);
        if (priority_set_valid(cand, scene, net)) push(cand);
    }
    for (std::size_t a = 0; a < additions.size(); ++a) {
        for (std::size_t b = a + 1; b < additions.size(); ++b) {
            if (static_cast<int>(out.size()) >= budget) return out;
            if (additions[a].first == additions[b].second &&
                additions[a].second == additions[b].first)
                continue;  // the two orders of one pair contradict each other
            PrioritySet cand = previous;
            cand.add(additions[a].first, additions[a].second);
            cand.add(additions[b].first, additions[b].second);
            if (priority_set_valid(cand, scene, net)) push(cand);
        }
    }
    return out;
}

UrgencyFeatures urgency_features(const SceneContext& ctx, const double* s, const double* v,
                                 int ctx_idx) {
    const SceneContext::VehicleCtx& vc = ctx.vehicles[static_cast<std::size_t>(ctx_idx)];
    UrgencyFeatures f;
    f.v = v[ctx_idx];
    f.d_stop = 500.0;
    double si = s[ctx_idx];
    for (const SceneContext::ZoneCtx& z : vc.zones)
        if (si - vc.length <= z.s_target) {
            f.d_stop = std::min(500.0, std::max(0.0, z.s_stop - si));
            break;
        }
    std::uint32_t ahead = 0, behind = 0;
    for (const SceneContext::LeadSpan& span : vc.lead_spans) {
        double so = s[span.other];
        if (so < span.begin || so >= span.end) continue;
        double m = so + span.offset;
        if (m > si) ahead |= 1u << span.other;
        else if (m < si) behind |= 1u << span.other;
    }
    f.n_lead = static_cast<double>(std::popcount(ahead));
    f.n_foll = static_cast<double>(std::popcount(behind));
    return f;
}

double fifo_urgency(double d_stop, double v) { return d_stop / std::max(v, 0.1); }

namespace {

PrioritySet order_by_urgency(const SceneState& scene, const RoadNetwork& net,
                             const std::map<int, double>& urgency) {
    PrioritySet set;
    for (const auto& [a, b] : conflicting_cav_pairs(scene, net)) {
        double ua = urgency.at(a), ub = urgency.at(b);
        if (ua > ub) set.add(a, b);
        else if (ub > ua) set.add(b, a);
        else set.add(std::min(a, b), std::max(a, b));
    }
    return set;
}

}  // namespace

PrioritySet generate_heur(const SceneState& scene, const RoadNetwork& net, const MlpModel& model) {
    if (model.n_in() != 4) throw std::runtime_error("generate_heur: urgency model must take 4 features");
    std::vector<double> s0;
    SceneContext ctx = build_context(net, scene, true, &s0);
    std::vector<double> v0(ctx.vehicles.size());
    for (std::size_t i = 0; i < ctx.vehicles.size(); ++i)
        v0[i] = scene.vehicles[static_cast<std::size_t>(ctx.vehicles[i].scene_index)].v;
    std::map<int, double> urgency;
    for (int i = 0; i < ctx.size(); ++i) {
        if (ctx.vehicles[static_cast<std::size_t>(i)].kind != VehicleKind::CAV) continue;
        UrgencyFeatures f = urgency_features(ctx, s0.data(), v0.data(), i);
        urgency[ctx.vehicles[static_cast<std::size_t>(i)].id] =
            mlp_forward(model, f.as_vector());
    }
    return order_by_urgency(scene, net, urgency);
}

PrioritySet generate_fifo(const SceneState& scene, const RoadNetwork& net) {
    std::vector<double> s0;
    SceneContext ctx = build_context(net, scene, true, &s0);
    std::vector<double> v0(ctx.vehicles.size());
    for (std::size_t i = 0; i < ctx.vehicles.size(); ++i)
        v0[i] = scene.vehicles[static_cast<std::size_t>(ctx.vehicles[i].scene_index)].v;
    std::map<int, double> urgency;
    for (int i = 0; i < ctx.size(); ++i) {
        if (ctx.vehicles[static_cast<std::size_t>(i)].kind != VehicleKind::CAV) continue;
        UrgencyFeatures f = urgency_features(ctx, s0.data(), v0.data(), i);
        // earlier estimated arrival means higher priority
        urgency[ctx.vehicles[static_cast<std::size_t>(i)].id] = -fifo_urgency(f.d_stop, f.v);
    }
    return order_by_urgency(scene, net, urgency);
}

std::map<int, double> waiting_weights(const SceneState& scene) {
    std::map<int, double> w;
    for (const VehicleState& v : scene.vehicles)
        if (!v.held) w[v.id] = 1.0 + v.t_slow / 10.0;
    return w;
}

double maneuver_metric(const ScenePrediction& pred, const RoadNetwork& net,
                       const std::map<int, double>& weights,
                       const ScenePrediction* previous_prediction) {
    double cost = time_loss(pred, net, weights);
    for (const auto& pair : pred.crossing_order) {
        bool in_previous =
            previous_prediction &&
            std::binary_search(previous_prediction->crossing_order.begin(),
                               previous_prediction->crossing_order.end(), pair);
        if (!in_previous) cost += 1.0;
    }
    return cost;
}

std::vector<ConstraintSet> extract_constraints(const PrioritySet& chosen,
                                               const ScenePrediction& pred,
                                               const SceneState& scene, const RoadNetwork& net,
                                               int* dropped_pairs,
                                               std::vector<PairWindow>* windows) {
    if (dropped_pairs) *dropped_pairs = 0;
    // tightest bounds per vehicle and waypoint
    std::map<int, std::map<double, Constraint>> acc;
    auto tighten = [&](int vehicle, double s, double t_min, double t_max) {
        Constraint& c = acc[vehicle].try_emplace(s, Constraint{s, -kInf, kInf}).first->second;
        c.t_min = std::max(c.t_min, t_min);
        c.t_max = std::min(c.t_max, t_max);
    };

    struct PairZone {
        int hi, lo, zone;
        double s_target_hi, s_stop_lo;
    };
    std::vector<PairZone> pair_zones;

    for (const auto& [hi, lo] : chosen.pairs) {
        const VehicleState& vh = scene.require(hi);
        const VehicleState& vl = scene.require(lo);
        for (const RouteZone& rh : net.route_zones[static_cast<std::size_t>(vh.route)]) {
            if (vh.rear() > rh.s_target) continue;
            for (const RouteZone& rl : net.route_zones[static_cast<std::size_t>(vl.route)]) {
                if (rl.zone != rh.zone || vl.rear() > rl.s_target) continue;
                if (!net.zones[static_cast<std::size_t>(rh.zone)].conflicting(rh.approach,
                                                                              rl.approach))
                    continue;
                // prioritized exit time for this zone, from the prediction
                double t_exit = kInf;
                for (const PredZoneEvent& ev : pred.zone_events)
                    if (ev.vehicle_id == hi && ev.zone == rh.zone && ev.exited)
                        t_exit = std::min(t_exit, ev.t_exit);
                if (!std::isfinite(t_exit)) {
                    if (dropped_pairs) ++(*dropped_pairs);
                    continue;
                }
                double t_abs = scene.time + t_exit;
                tighten(hi, rh.s_target, -kInf, t_abs);
                tighten(lo, rl.s_stop, t_abs, kInf);
                pair_zones.push_back({hi, lo, rh.zone, rh.s_target, rl.s_stop});
            }
        }
    }

    if (windows)
        for (const PairZone& pz : pair_zones)
            windows->push_back({pz.hi, pz.lo, pz.zone, acc[pz.hi][pz.s_target_hi].t_max,
                                acc[pz.lo][pz.s_stop_lo].t_min});

    std::vector<ConstraintSet> out;
    for (const auto& [vehicle, by_s] : acc) {
        ConstraintSet cs;
        cs.vehicle_id = vehicle;
        for (const auto& [s, c] : by_s) cs.entries.push_back(c);
        out.push_back(std::move(cs));
    }
    return out;
}

PlanResult plan_cycle(const SceneState& scene, const RoadNetwork& net, const PlannerConfig& cfg,
                      PlannerMemory& memory) {
    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    PlanResult result;
    PlannerMemory entry_memory = memory;

    // pairs consumed since the last cycle retire from the previous solution
    PrioritySet previous;
    for (const auto& [hi, lo] : memory.previous.pairs) {
        int ih = scene.find(hi), il = scene.find(lo);
        if (ih < 0 || il < 0) continue;
        if (pair_conflicts(scene.vehicles[static_cast<std::size_t>(ih)],
                           scene.vehicles[static_cast<std::size_t>(il)], net))
            previous.add(hi, lo);
    }

    if (cfg.method == PlanMethod::NONE) {
        memory.previous = {};
        memory.previous_prediction.reset();
        result.cycle_runtime = elapsed();
        return result;
    }

    result.non_conflicting = non_conflicting_sets(scene, net);
    if (cfg.method == PlanMethod::NC) {
        memory.previous = {};
        memory.previous_prediction.reset();
        result.cycle_runtime = elapsed();
        return result;
    }

    std::vector<double> s0;
    SceneContext ctx = build_context(net, scene, true, &s0);
    std::vector<double> v0(ctx.vehicles.size());
    for (std::size_t i = 0; i < ctx.vehicles.size(); ++i)
        v0[i] = scene.vehicles[static_cast<std::size_t>(ctx.vehicles[i].scene_index)].v;
    std::vector<std::uint32_t> suppress = nc_suppress_masks(ctx);
    std::map<int, double> weights = waiting_weights(scene);

    const ScenePrediction* reference = nullptr;
    ScenePrediction fresh_reference;
    if (memory.previous_prediction) {
        reference = &*memory.previous_prediction;
    } else {
        fresh_reference =
            rollout_with_context(ctx, s0, v0, previous, previous, cfg.rollout, &suppress);
        reference = &fresh_reference;
    }

    RolloutParams scored = cfg.rollout;
    scored.stop_on_invalid = true;

    auto valid = [](const ScenePrediction& p) { return !p.collision && p.priority_fulfilled; };

    PrioritySet chosen;
    ScenePrediction chosen_pred;
    bool have_choice = false;

    if (cfg.method == PlanMethod::FIFO || cfg.method == PlanMethod::HEUR) {
        PrioritySet cand;
        if (cfg.method == PlanMethod::FIFO) {
            cand = generate_fifo(scene, net);
        } else {
            if (!cfg.urgency_model)
                throw std::runtime_error("plan_cycle: HEUR requires an urgency model");
            cand = generate_heur(scene, net, *cfg.urgency_model);
        }
        ScenePrediction pred = rollout_with_context(ctx, s0, v0, cand, previous, scored, &suppress);
        result.candidates_evaluated = 1;
        if (valid(pred)) {
            chosen = cand;
            chosen_pred = std::move(pred);
        } else {
            chosen = PrioritySet{};
            chosen_pred =
                rollout_with_context(ctx, s0, v0, chosen, previous, cfg.rollout, &suppress);
            ++result.candidates_evaluated;
        }
        result.metric = maneuver_metric(chosen_pred, net, weights, reference);
        have_choice = true;
    } else {  // OPT
        std::vector<PrioritySet> candidates = generate_opt(previous, scene, net, cfg.opt_budget);
        double best = kInf;
        int best_idx = -1;
        std::vector<ScenePrediction> preds;
        preds.reserve(candidates.size());
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            preds.push_back(
                rollout_with_context(ctx, s0, v0, candidates[c], previous, scored, &suppress));
            ++result.candidates_evaluated;
            if (!valid(preds.back())) continue;
            double cost = maneuver_metric(preds.back(), net, weights, reference);
            if (cost < best) {
                best = cost;
                best_idx = static_cast<int>(c);
            }
        }
        if (best_idx >= 0) {
            chosen = candidates[static_cast<std::size_t>(best_idx)];
            chosen_pred = std::move(preds[static_cast<std::size_t>(best_idx)]);
            result.metric = best;
        } else {
            chosen = PrioritySet{};
            chosen_pred =
                rollout_with_context(ctx, s0, v0, chosen, previous, cfg.rollout, &suppress);
            result.metric = maneuver_metric(chosen_pred, net, weights, reference);
        }
        have_choice = true;
    }

    if (have_choice) {
        result.chosen = chosen;
        result.constraints = extract_constraints(chosen, chosen_pred, scene, net,
                                                 &result.dropped_pairs, &result.pair_windows);
        memory.previous = chosen;
        memory.previous_prediction = chosen_pred;
        result.chosen_prediction = std::move(chosen_pred);
    }

    result.cycle_runtime = elapsed();
    if (cfg.enforce_cycle_budget && result.cycle_runtime > cfg.cycle_budget_s) {
        // over budget: pursue the previous maneuver for another cycle
        memory = entry_memory;
        PlanResult fallback;
        fallback.chosen = entry_memory.previous;
        fallback.budget_exceeded = true;
        fallback.candidates_evaluated = result.candidates_evaluated;
        fallback.cycle_runtime = result.cycle_runtime;
        return fallback;
    }
    return result;
}

}  // namespace coopsim
