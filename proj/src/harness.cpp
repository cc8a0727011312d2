#include "coopsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace coopsim {

using nlohmann::json;

namespace {

std::uint64_t scenario_stream(const ScenarioSpec& spec) {
    return mix_seed(mix_seed(spec.seed, hash_str(spec.map_id)),
                    1000u + static_cast<std::uint64_t>(spec.cav_percentage));
}

std::uint64_t run_stream(const ScenarioSpec& spec) {
    return mix_seed(mix_seed(spec.seed, hash_str(spec.map_id)),
                    2000u + static_cast<std::uint64_t>(spec.cav_percentage));
}

}  // namespace

SceneState sample_scenario(const RoadNetwork& net, const ScenarioSpec& spec) {
    if (spec.vehicle_count < 0 || spec.vehicle_count > kMaxVehicles)
        throw std::runtime_error("sample_scenario: vehicle_count out of range");
    if (spec.cav_percentage < 0 || spec.cav_percentage > 100)
        throw std::runtime_error("sample_scenario: cav_percentage out of range");
    if (net.entries.empty()) throw std::runtime_error("sample_scenario: map has no entries");

    Rng rng(scenario_stream(spec));
    int n = spec.vehicle_count;
    int n_cav = static_cast<int>(std::lround(n * spec.cav_percentage / 100.0));

    DriverParams p;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        SceneState scene;
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        rng.shuffle(order);

        // queues grow upstream: each vehicle goes behind the current tail of
        // its entry lane with a car-following consistent gap
        std::map<int, double> tail_rear;  // entry lane -> rearmost bumper
        bool valid = true;
        for (int id = 0; id < n && valid; ++id) {
            bool placed = false;
            for (int retry = 0; retry < 8 && !placed; ++retry) {
                const Entry& entry =
                    net.entries[static_cast<std::size_t>(rng.next_below(net.entries.size()))];
                int first_lane = net.routes[static_cast<std::size_t>(entry.route)].lanes.front();
                double limit = net.lanes[static_cast<std::size_t>(first_lane)].speed_limit;
                double v = rng.uniform(0.3, 0.7) * std::min(limit, 50.0 / 3.6);
                double hi = entry.spawn_s_max;
                auto it = tail_rear.find(first_lane);
                if (it != tail_rear.end()) hi = std::min(hi, it->second - (p.s0 + v * p.headway_T));
                if (hi < entry.spawn_s_min) continue;  // lane full, try another entry
                VehicleState veh;
                veh.id = id;
                veh.entry_lane = first_lane;
                veh.v = v;
                // stay loosely compact so dense scenes still fit the window
                double lo = std::max(entry.spawn_s_min, hi - 12.0);
                assign_route(net, veh, entry.route, rng.uniform(lo, hi));
                double rear = veh.rear();
                it = tail_rear.find(first_lane);
                if (it == tail_rear.end() || rear < it->second) tail_rear[first_lane] = rear;
                scene.vehicles.push_back(veh);
                placed = true;
            }
            if (!placed) valid = false;
        }
        if (!valid) continue;
        for (int k = 0; k < n_cav; ++k)
            scene.vehicles[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])].kind =
                VehicleKind::CAV;

        // nobody starts inside a conflict zone
        for (const VehicleState& v : scene.vehicles)
            for (const RouteZone& rz : net.route_zones[static_cast<std::size_t>(v.route)])
                if (v.s >= rz.s_stop && v.rear() <= rz.s_target) valid = false;
        if (valid) return scene;
    }
    throw std::runtime_error("sample_scenario: no valid placement after 1000 attempts (map=" +
                             spec.map_id + " seed=" + std::to_string(spec.seed) +
                             " count=" + std::to_string(spec.vehicle_count) +
                             " pct=" + std::to_string(spec.cav_percentage) + ")");
}

namespace {

// persistent zone entry/exit tracking for one vehicle of the closed loop
struct ZoneTracker {
    int route = -1;
    std::vector<char> entered;
    std::vector<char> exited;
    std::vector<int> event;

    void reset(const RoadNetwork& net, const VehicleState& veh) {
        route = veh.route;
        const auto& zones = net.route_zones[static_cast<std::size_t>(veh.route)];
        entered.assign(zones.size(), 0);
        exited.assign(zones.size(), 0);
        event.assign(zones.size(), -1);
        for (std::size_t z = 0; z < zones.size(); ++z)
            if (veh.rear() > zones[z].s_target) exited[z] = 1;  // spawned past it
    }
};

struct OccupancyAudit {
    std::vector<std::vector<std::pair<int, int>>> occupants;  // per zone: (veh idx, approach)

    explicit OccupancyAudit(std::size_t zones) : occupants(zones) {}

    void remove(int veh_idx) {
        for (auto& occ : occupants)
            for (std::size_t k = 0; k < occ.size(); ++k)
                if (occ[k].first == veh_idx) {
                    occ.erase(occ.begin() + static_cast<std::ptrdiff_t>(k));
                    break;
                }
    }
};

}  // namespace

RunResult run_simulation(const RoadNetwork& net, const ScenarioSpec& spec, const RunConfig& cfg) {
    RunResult rr;
    SceneState scene = sample_scenario(net, spec);
    Rng run_rng(run_stream(spec));

    PlannerConfig pcfg;
    pcfg.method = spec.method;
    pcfg.opt_budget = cfg.opt_budget;
    pcfg.cycle_budget_s = cfg.cycle_budget_s;
    pcfg.enforce_cycle_budget = cfg.enforce_cycle_budget;
    pcfg.rollout.driver = cfg.driver;
    pcfg.urgency_model = cfg.heur_model;
    if (spec.method == PlanMethod::HEUR && !cfg.heur_model)
        throw std::runtime_error("run_simulation: HEUR requires a trained urgency model");

    PlannerMemory memory;
    ProtocolState proto;
    std::map<int, CavControlState> agents;
    for (const VehicleState& v : scene.vehicles)
        if (v.kind == VehicleKind::CAV) {
            CavControlState ag;
            ag.params = cfg.driver;
            agents.emplace(v.id, std::move(ag));
        }
    PrioritySet active_chosen;

    std::vector<ZoneTracker> trackers(scene.vehicles.size());
    for (std::size_t i = 0; i < scene.vehicles.size(); ++i)
        trackers[i].reset(net, scene.vehicles[i]);
    OccupancyAudit occ(net.zones.size());

    auto steps = static_cast<long>(std::llround(spec.duration / kDtSim));
    std::vector<double> accels(scene.vehicles.size(), 0.0);
    std::vector<double> prev_s(scene.vehicles.size(), 0.0);

    auto abort_maneuver = [&] {
        memory.previous = {};
        memory.previous_prediction.reset();
        for (auto& [id, ag] : agents) ag.clear_maneuver();
        active_chosen = {};
        ++rr.maneuver_aborts;
    };

    for (long k = 0; k < steps; ++k) {
        // held vehicles try again for a slot before anything else happens
        for (VehicleState& veh : scene.vehicles)
            if (veh.held) {
                reinsert(scene, net, veh.id, run_rng);
                if (!veh.held) trackers[static_cast<std::size_t>(scene.find(veh.id))].reset(net, veh);
            }

        if (k % kStepsPerPlanCycle == 0) {
            PlanResult plan = plan_cycle(scene, net, pcfg, memory);
            rr.log.cycle_times_s.push_back(plan.cycle_runtime);
            if (!plan.budget_exceeded) {
                for (const PairWindow& w : plan.pair_windows)
                    if (w.t_min_yielding < w.t_max_prioritized) ++rr.constraint_window_violations;
                std::vector<ManeuverMessage> delivered;
                for (const ManeuverMessage& msg : issue(plan, k / kStepsPerPlanCycle, proto))
                    delivered.push_back(decode_message(encode_message(msg)));
                // a fresh maneuver replaces whatever was active
                for (auto& [id, ag] : agents) {
                    ag.clear_maneuver();
                    ag.non_conflicting.clear();
                }
                bool rejected = false;
                for (const ManeuverMessage& msg : delivered) {
                    agents[msg.recipient].non_conflicting = msg.non_conflicting;
                    ManeuverResponse resp = decode_response(
                        encode_response(cav_feasibility(scene, net, msg, cfg.driver)));
                    if (resp.verdict == ManeuverResponse::Verdict::reject) {
                        ++rr.maneuver_rejects;
                        if (handle_response(memory, resp, proto)) rejected = true;
                    }
                }
                if (rejected) {
                    for (auto& [id, ag] : agents) ag.clear_maneuver();
                    active_chosen = {};
                    ++rr.maneuver_aborts;
                } else {
                    for (const ManeuverMessage& msg : delivered) {
                        agents[msg.recipient].constraints = msg.constraints;
                        agents[msg.recipient].maneuver_id = msg.maneuver_id;
                    }
                    active_chosen = plan.chosen;
                }
            }
        }

        std::vector<double> s0;
        SceneContext ctx = build_context(net, scene, false, &s0);
        std::vector<double> v0(ctx.vehicles.size());
        std::vector<std::uint32_t> suppress(ctx.vehicles.size(), 0u);
        for (std::size_t i = 0; i < ctx.vehicles.size(); ++i) {
            const SceneContext::VehicleCtx& vc = ctx.vehicles[i];
            v0[i] = scene.vehicles[static_cast<std::size_t>(vc.scene_index)].v;
            if (vc.kind == VehicleKind::CAV)
                for (int other : agents[vc.id].non_conflicting) {
                    int oi = ctx.index_of(other);
                    if (oi >= 0) suppress[i] |= 1u << oi;
                }
        }
        std::vector<int> lane(ctx.vehicles.size());
        std::vector<double> lane_pos(ctx.vehicles.size());
        ctx.locate(s0.data(), lane.data(), lane_pos.data());
        PolicyInput in;
        in.s = s0.data();
        in.v = v0.data();
        in.lane = lane.data();
        in.lane_pos = lane_pos.data();
        in.suppress_mask = suppress.data();

        bool late_reject = false;
        std::fill(accels.begin(), accels.end(), 0.0);
        for (int ci = 0; ci < ctx.size(); ++ci) {
            const SceneContext::VehicleCtx& vc = ctx.vehicles[static_cast<std::size_t>(ci)];
            double a;
            if (vc.kind == VehicleKind::CAV) {
                CavDecision dec =
                    cav_accel_with_context(ctx, in, ci, scene.time, agents[vc.id]);
                a = dec.accel;
                if (dec.reject) {
                    late_reject = true;
                    ++rr.maneuver_rejects;
                }
            } else {
                a = eval_accel(ctx, in, ci, cfg.driver);
            }
            accels[static_cast<std::size_t>(vc.scene_index)] = a;
        }

        for (std::size_t i = 0; i < scene.vehicles.size(); ++i) prev_s[i] = scene.vehicles[i].s;
        step_in_place(scene.vehicles, accels.data(), kDtSim, scene.time, scene.step_index);

        // constraint compliance at waypoint crossings
        for (auto& [id, ag] : agents) {
            if (ag.constraints.empty()) continue;
            int vi = scene.find(id);
            const VehicleState& veh = scene.vehicles[static_cast<std::size_t>(vi)];
            if (veh.held) continue;
            for (const Constraint& c : ag.constraints) {
                if (prev_s[static_cast<std::size_t>(vi)] < c.s && veh.s >= c.s) {
                    if (scene.time < c.t_min - kDtSim || scene.time > c.t_max + kDtSim)
                        ++rr.compliance_violations;
                }
            }
        }

        // zone entries/exits, with the co-occupancy audit on entry
        for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
            VehicleState& veh = scene.vehicles[i];
            if (veh.held) continue;
            ZoneTracker& tr = trackers[i];
            const auto& zones = net.route_zones[static_cast<std::size_t>(veh.route)];
            for (std::size_t z = 0; z < zones.size(); ++z) {
                if (tr.exited[z]) continue;
                if (!tr.entered[z]) {
                    if (veh.s < zones[z].s_stop) continue;
                    tr.entered[z] = 1;
                    tr.event[z] = static_cast<int>(rr.log.zone_events.size());
                    rr.log.zone_events.push_back({veh.id, zones[z].zone, zones[z].approach,
                                                  scene.time, 0.0, false});
                    const ConflictZone& zone = net.zones[static_cast<std::size_t>(zones[z].zone)];
                    for (const auto& [other_idx, other_app] :
                         occ.occupants[static_cast<std::size_t>(zones[z].zone)]) {
                        if (!zone.conflicting(zones[z].approach, other_app)) continue;
                        const VehicleState& other = scene.vehicles[static_cast<std::size_t>(other_idx)];
                        if (veh.kind == VehicleKind::CAV && other.kind == VehicleKind::CAV &&
                            active_chosen.involves(veh.id, other.id))
                            ++rr.cav_conflicts_under_maneuver;
                    }
                    occ.occupants[static_cast<std::size_t>(zones[z].zone)].push_back(
                        {static_cast<int>(i), zones[z].approach});
                }
                if (tr.entered[z] && veh.rear() > zones[z].s_target) {
                    tr.exited[z] = 1;
                    auto& ev = rr.log.zone_events[static_cast<std::size_t>(tr.event[z])];
                    ev.t_exit = scene.time;
                    ev.exited = true;
                    auto& occupants = occ.occupants[static_cast<std::size_t>(zones[z].zone)];
                    for (std::size_t q = 0; q < occupants.size(); ++q)
                        if (occupants[q].first == static_cast<int>(i)) {
                            occupants.erase(occupants.begin() + static_cast<std::ptrdiff_t>(q));
                            break;
                        }
                }
            }
        }

        if (late_reject) abort_maneuver();

        for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
            VehicleState& veh = scene.vehicles[i];
            if (!veh.held && pass_completed(veh)) {
                occ.remove(static_cast<int>(i));
                reinsert(scene, net, veh.id, run_rng);
                trackers[i].reset(net, veh);
                auto it = agents.find(veh.id);
                if (it != agents.end()) {
                    it->second.clear_maneuver();
                    it->second.non_conflicting.clear();
                }
            }
        }
    }

    rr.log.duration = spec.duration;
    rr.log.final_vehicles = scene.vehicles;
    rr.metrics = compute_run_metrics(rr.log, net);
    return rr;
}

std::vector<PairSample> generate_heur_dataset(const std::vector<const RoadNetwork*>& nets,
                                              const DatasetConfig& cfg,
                                              const DriverParams& driver) {
    if (nets.empty()) throw std::runtime_error("generate_heur_dataset: no maps");
    std::vector<PairSample> samples;
    Rng pick_rng(mix_seed(cfg.seed, 0x646174));

    RolloutParams label_params;
    label_params.horizon = cfg.label_horizon;
    label_params.driver = driver;

    for (int run = 0; run < cfg.n_runs; ++run) {
        const RoadNetwork& net = *nets[static_cast<std::size_t>(pick_rng.next_below(nets.size()))];
        ScenarioSpec spec;
        spec.map_id = to_string(net.scenario_kind);
        spec.seed = mix_seed(cfg.seed, 7000u + static_cast<std::uint64_t>(run));
        spec.vehicle_count = 10;
        spec.cav_percentage = 100;
        spec.duration = cfg.run_length;
        SceneState scene = sample_scenario(net, spec);
        Rng run_rng(run_stream(spec));

        auto steps = static_cast<long>(std::llround(cfg.run_length / kDtSim));
        std::vector<double> accels(scene.vehicles.size(), 0.0);
        for (long k = 0; k < steps; ++k) {
            for (VehicleState& veh : scene.vehicles)
                if (veh.held) reinsert(scene, net, veh.id, run_rng);

            if (k % kStepsPerPlanCycle == 0) {
                auto pairs = conflicting_cav_pairs(scene, net);
                if (!pairs.empty()) {
                    std::vector<double> s0;
                    SceneContext ctx = build_context(net, scene, true, &s0);
                    std::vector<double> v0(ctx.vehicles.size());
                    for (std::size_t i = 0; i < ctx.vehicles.size(); ++i)
                        v0[i] =
                            scene.vehicles[static_cast<std::size_t>(ctx.vehicles[i].scene_index)].v;
                    std::vector<std::uint32_t> suppress = nc_suppress_masks(ctx);
                    auto [i, j] = pairs[static_cast<std::size_t>(pick_rng.next_below(pairs.size()))];
                    int ci = ctx.index_of(i), cj = ctx.index_of(j);
                    if (ci >= 0 && cj >= 0) {
                        std::map<int, double> weights = waiting_weights(scene);
                        PrioritySet p_ij, p_ji;
                        p_ij.add(i, j);
                        p_ji.add(j, i);
                        double l_ij =
                            time_loss(rollout_with_context(ctx, s0, v0, p_ij, {}, label_params,
                                                           &suppress),
                                      net, weights);
                        double l_ji =
                            time_loss(rollout_with_context(ctx, s0, v0, p_ji, {}, label_params,
                                                           &suppress),
                                      net, weights);
                        PairSample sample;
                        sample.x_i = urgency_features(ctx, s0.data(), v0.data(), ci).as_vector();
                        sample.x_j = urgency_features(ctx, s0.data(), v0.data(), cj).as_vector();
                        sample.target = -l_ij + l_ji;
                        samples.push_back(std::move(sample));
                    }
                }
            }

            // free-running traffic, no coordination while collecting data
            std::vector<double> s_real;
            SceneContext real_ctx = build_context(net, scene, false, &s_real);
            std::vector<double> v_real(real_ctx.vehicles.size());
            for (std::size_t i = 0; i < real_ctx.vehicles.size(); ++i)
                v_real[i] = scene.vehicles[static_cast<std::size_t>(real_ctx.vehicles[i].scene_index)].v;
            std::vector<int> lane(real_ctx.vehicles.size());
            std::vector<double> lane_pos(real_ctx.vehicles.size());
            real_ctx.locate(s_real.data(), lane.data(), lane_pos.data());
            PolicyInput in;
            in.s = s_real.data();
            in.v = v_real.data();
            in.lane = lane.data();
            in.lane_pos = lane_pos.data();
            std::fill(accels.begin(), accels.end(), 0.0);
            for (int ci = 0; ci < real_ctx.size(); ++ci)
                accels[static_cast<std::size_t>(real_ctx.vehicles[static_cast<std::size_t>(ci)].scene_index)] =
                    eval_accel(real_ctx, in, ci, driver);
            step_in_place(scene.vehicles, accels.data(), kDtSim, scene.time, scene.step_index);
            for (VehicleState& veh : scene.vehicles)
                if (!veh.held && pass_completed(veh)) reinsert(scene, net, veh.id, run_rng);
        }
    }
    return samples;
}

std::string dataset_to_json(const std::vector<PairSample>& data, const DatasetConfig& cfg) {
    json doc;
    doc["heur_dataset_version"] = 1;
    doc["seed"] = cfg.seed;
    doc["n_runs"] = cfg.n_runs;
    doc["run_length_s"] = cfg.run_length;
    doc["label_horizon_s"] = cfg.label_horizon;
    json rows = json::array();
    for (const PairSample& s : data) {
        json row = json::array();
        for (double v : s.x_i) row.push_back(v);
        for (double v : s.x_j) row.push_back(v);
        row.push_back(s.target);
        rows.push_back(std::move(row));
    }
    doc["rows"] = std::move(rows);
    return doc.dump();
}

std::vector<PairSample> dataset_from_json(const std::string& text) {
    json doc = json::parse(text);
    if (doc.at("heur_dataset_version").get<int>() != 1)
        throw std::runtime_error("dataset: unsupported version");
    std::vector<PairSample> out;
    for (const json& row : doc.at("rows")) {
        if (row.size() % 2 != 1) throw std::runtime_error("dataset: malformed row");
        std::size_t n = (row.size() - 1) / 2;
        PairSample s;
        for (std::size_t f = 0; f < n; ++f) s.x_i.push_back(row[f].get<double>());
        for (std::size_t f = 0; f < n; ++f) s.x_j.push_back(row[n + f].get<double>());
        s.target = row[row.size() - 1].get<double>();
        out.push_back(std::move(s));
    }
    return out;
}

TrainHeurReport train_heur(const std::vector<const RoadNetwork*>& nets, const DatasetConfig& dcfg,
                           const TrainConfig& tcfg, const DriverParams& driver, MlpModel& model) {
    std::vector<PairSample> data = generate_heur_dataset(nets, dcfg, driver);
    if (data.size() < 10) throw std::runtime_error("train_heur: dataset too small");
    Rng rng(mix_seed(dcfg.seed, 0x73706c69));
    rng.shuffle(data);
    std::size_t holdout = data.size() / 5;
    std::vector<PairSample> test(data.end() - static_cast<std::ptrdiff_t>(holdout), data.end());
    data.resize(data.size() - holdout);

    model = make_mlp(4, tcfg.seed);
    TrainReport tr = train_pairwise(model, data, tcfg);

    TrainHeurReport report;
    report.n_samples = data.size() + test.size();
    report.n_holdout = test.size();
    report.sign_accuracy = pairwise_sign_accuracy(model, test);
    report.final_rmse = tr.final_rmse;
    return report;
}

}  // namespace coopsim
