// Acceptance suite: runs the desk-scale experiment end to end and checks
// every release criterion at its stated tolerance, one PASS/FAIL line each.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "coopsim/harness.hpp"

using namespace coopsim;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

// independent O(n^2) successor scan (no sorting), duplicated here on purpose:
// the production path must agree with a second derivation
PetResult pet_oracle(const std::vector<ZoneOccupancy>& events, const RoadNetwork& net) {
    PetResult out;
    auto key_less = [](const ZoneOccupancy& a, const ZoneOccupancy& b) {
        return a.t_enter != b.t_enter ? a.t_enter < b.t_enter : a.vehicle_id < b.vehicle_id;
    };
    for (std::size_t i = 0; i < events.size(); ++i) {
        const ZoneOccupancy* succ = nullptr;
        for (std::size_t j = 0; j < events.size(); ++j) {
            if (i == j || events[j].zone != events[i].zone) continue;
            if (!key_less(events[i], events[j])) continue;
            if (!succ || key_less(events[j], *succ)) succ = &events[j];
        }
        if (!succ) continue;
        if (!net.zones[static_cast<std::size_t>(events[i].zone)].conflicting(events[i].approach,
                                                                             succ->approach))
            continue;
        if (!events[i].exited || succ->t_enter < events[i].t_exit) ++out.collisions;
        else out.values.push_back(succ->t_enter - events[i].t_exit);
    }
    std::sort(out.values.begin(), out.values.end());
    return out;
}

double mean_over_rows(const ExperimentReport& rep, const std::string& map, PlanMethod m, int pct,
                      double RunMetrics::* field) {
    double sum = 0.0;
    int n = 0;
    for (const SweepRow& r : rep.rows) {
        if (r.failed || r.method != m) continue;
        if (!map.empty() && r.map_id != map) continue;
        if (pct >= 0 && r.cav_pct != pct) continue;
        sum += r.metrics.*field;
        ++n;
    }
    return n > 0 ? sum / n : 0.0;
}

}  // namespace

int main(int argc, char** argv) {
    std::string maps_dir = "maps";
    std::string out_dir = "acceptance_out";
    int threads = 0;
    int seeds = 30;
    std::vector<int> pcts = {0, 20, 40, 60, 80, 100};
    int heur_runs = 200;
    bool quick = false;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--maps-dir" && i + 1 < argc) maps_dir = argv[++i];
        else if (arg == "--out" && i + 1 < argc) out_dir = argv[++i];
        else if (arg == "--threads" && i + 1 < argc) threads = std::atoi(argv[++i]);
        else if (arg == "--seeds" && i + 1 < argc) seeds = std::atoi(argv[++i]);
        else if (arg == "--quick") quick = true;
    }
    if (quick) {
        seeds = 3;
        pcts = {0, 40, 100};
        heur_runs = 8;
    }
    std::filesystem::create_directories(out_dir);

    const std::vector<std::string> map_names = {"main_road_intersection", "right_before_left",
                                                "roundabout", "narrowing"};
    std::vector<std::string> map_paths;
    for (const std::string& n : map_names) map_paths.push_back(maps_dir + "/" + n + ".json");

    std::vector<RoadNetwork> nets;
    for (const std::string& p : map_paths) nets.push_back(load_network_file(p));
    std::vector<const RoadNetwork*> net_ptrs;
    for (const RoadNetwork& n : nets) net_ptrs.push_back(&n);

    // ---- urgency model -------------------------------------------------
    std::printf("training the urgency model (%d runs)...\n", heur_runs);
    std::fflush(stdout);
    auto t_train0 = std::chrono::steady_clock::now();
    DatasetConfig dcfg;
    dcfg.n_runs = heur_runs;
    dcfg.seed = 1;
    TrainConfig tcfg;
    tcfg.seed = 1;
    MlpModel model;
    TrainHeurReport train_report = train_heur(net_ptrs, dcfg, tcfg, DriverParams{}, model);
    std::string model_path = out_dir + "/heur_model.json";
    save_model(model, model_path);
    double train_secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_train0).count();
    std::printf("model: %zu samples, holdout sign accuracy %.3f, rmse %.3f (%.0f s)\n",
                train_report.n_samples, train_report.sign_accuracy, train_report.final_rmse,
                train_secs);

    // ---- sweep ----------------------------------------------------------
    SweepConfig cfg;
    cfg.map_paths = map_paths;
    cfg.seeds_per_map = seeds;
    cfg.cav_percentages = pcts;
    cfg.heur_model_path = model_path;
    cfg.threads = threads;
    std::printf("running the sweep (%d maps x %d seeds x %zu pcts x %zu methods)...\n",
                static_cast<int>(map_paths.size()), seeds, pcts.size(), cfg.methods.size());
    std::fflush(stdout);
    ExperimentReport sweep = run_experiment(cfg);
    write_report(sweep, out_dir);
    std::printf("sweep finished in %.0f s, %zu runs, %d failed\n", sweep.wall_time_s,
                sweep.rows.size(), sweep.failed_runs);

    // ---- criterion 1: safety invariant ---------------------------------
    {
        long co_occ = 0, windows = 0, compliance = 0;
        for (const SweepRow& r : sweep.rows) {
            co_occ += r.cav_conflicts_under_maneuver;
            windows += r.constraint_window_violations;
            compliance += r.compliance_violations;
        }
        bool pass = sweep.rows.size() >= 360 && co_occ == 0 && windows == 0 &&
                    sweep.failed_runs == 0 && sweep.wall_time_s < 1800.0;
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "%zu runs, %ld planned-pair co-occupancies, %ld bad constraint windows, "
                      "%ld compliance misses, %d failed, %.0f s (< 1800)",
                      sweep.rows.size(), co_occ, windows, compliance, sweep.failed_runs,
                      sweep.wall_time_s);
        report(1, pass, buf);
    }

    const std::string main_road = "main_road_intersection";

    // ---- criterion 2: efficiency ordering at 100 % ----------------------
    {
        const AggregateCell* none = sweep.find(main_road, PlanMethod::NONE, 100);
        const AggregateCell* fifo = sweep.find(main_road, PlanMethod::FIFO, 100);
        const AggregateCell* heur = sweep.find(main_road, PlanMethod::HEUR, 100);
        const AggregateCell* opt = sweep.find(main_road, PlanMethod::OPT, 100);
        bool pass = none && fifo && heur && opt;
        double r_opt = 0, r_heur = 0, r_fifo = 0, thr = 0, p_sign = 1.0;
        if (pass) {
            r_opt = opt->wait_ratio;
            r_heur = heur->wait_ratio;
            r_fifo = fifo->wait_ratio;
            thr = opt->throughput_ratio;
            pass = r_opt <= r_heur && r_heur <= r_fifo && r_fifo <= 1.0 && r_opt <= 0.8 &&
                   thr >= 1.05;
            // paired per-seed comparison, OPT vs NONE waiting time
            int wins = 0, n = 0;
            for (const SweepRow& a : sweep.rows) {
                if (a.map_id != main_road || a.cav_pct != 100 || a.method != PlanMethod::OPT)
                    continue;
                for (const SweepRow& b : sweep.rows) {
                    if (b.map_id != main_road || b.cav_pct != 100 ||
                        b.method != PlanMethod::NONE || b.seed != a.seed)
                        continue;
                    if (a.metrics.mean_wait != b.metrics.mean_wait) {
                        ++n;
                        if (a.metrics.mean_wait < b.metrics.mean_wait) ++wins;
                    }
                }
            }
            p_sign = sign_test_p(wins, n);
            pass = pass && p_sign < 0.05;
        }
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "wait ratios opt %.3f <= heur %.3f <= fifo %.3f <= 1, opt <= 0.8, "
                      "opt throughput %.3f >= 1.05, sign test p=%.2e < 0.05",
                      r_opt, r_heur, r_fifo, thr, p_sign);
        report(2, pass, buf);
    }

    // ---- criterion 3: mixed-traffic onset at 40 % -----------------------
    {
        const AggregateCell* opt = sweep.find(main_road, PlanMethod::OPT, 40);
        bool pass = opt && opt->wait_ratio <= 0.95;
        char buf[128];
        std::snprintf(buf, sizeof(buf), "opt wait ratio at 40%% CAVs: %.3f (<= 0.95)",
                      opt ? opt->wait_ratio : -1.0);
        report(3, pass, buf);
    }

    // ---- criterion 4: criticality non-degradation -----------------------
    {
        double base = mean_over_rows(sweep, "", PlanMethod::NONE, -1, &RunMetrics::critical_pet_rate);
        double worst = -1.0;
        for (PlanMethod m : {PlanMethod::FIFO, PlanMethod::HEUR, PlanMethod::OPT})
            worst = std::max(worst,
                             mean_over_rows(sweep, "", m, -1, &RunMetrics::critical_pet_rate));
        bool pass = worst <= base + 0.002;
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "critical PET rate: planned worst %.4f vs baseline %.4f (+0.002 allowed)",
                      worst, base);
        report(4, pass, buf);
    }

    // ---- criterion 5: run-time budget -----------------------------------
    {
        double p97_opt = 0.0, max_light = 0.0;
        for (const SweepRow& r : sweep.rows) {
            if (r.method == PlanMethod::OPT) p97_opt = std::max(p97_opt, r.metrics.p97_cycle_ms);
            if (r.method == PlanMethod::NC || r.method == PlanMethod::FIFO ||
                r.method == PlanMethod::HEUR)
                max_light = std::max(max_light, r.metrics.max_cycle_ms);
        }
        bool pass = p97_opt <= 200.0 && max_light <= 50.0;
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "opt p97 cycle %.1f ms (<= 200), nc/fifo/heur max cycle %.1f ms (<= 50)",
                      p97_opt, max_light);
        report(5, pass, buf);
    }

    // ---- criterion 6: oracle equivalences --------------------------------
    {
        // (a) PET against the brute-force scan on 1000 random logs
        const RoadNetwork& rb = nets[2];
        Rng rng(2024);
        bool pet_ok = true;
        for (int trial = 0; trial < 1000 && pet_ok; ++trial) {
            std::vector<ZoneOccupancy> events;
            int n = 2 + static_cast<int>(rng.next_below(40));
            for (int i = 0; i < n; ++i) {
                ZoneOccupancy e;
                e.zone = static_cast<int>(rng.next_below(rb.zones.size()));
                e.approach = static_cast<int>(
                    rng.next_below(rb.zones[static_cast<std::size_t>(e.zone)].approaches.size()));
                e.vehicle_id = static_cast<int>(rng.next_below(10));
                e.t_enter = rng.uniform(0.0, 60.0);
                e.exited = rng.next_below(10) != 0;
                e.t_exit = e.t_enter + rng.uniform(0.1, 4.0);
                events.push_back(e);
            }
            PetResult got = compute_pet(events, rb);
            std::sort(got.values.begin(), got.values.end());
            PetResult expect = pet_oracle(events, rb);
            pet_ok = got.values == expect.values && got.collisions == expect.collisions;
        }
        // (b) empty-priority rollout equals a plain simulation, 1e-9
        const RoadNetwork& mr = nets[0];
        double worst_dev = 0.0;
        for (std::uint64_t seed : {3u, 4u, 5u}) {
            SceneState scene;
            ScenarioSpec spec;
            spec.map_id = main_road;
            spec.seed = seed;
            spec.cav_percentage = 0;
            scene = sample_scenario(mr, spec);
            // plain simulation needs motion on the conservative routes
            for (VehicleState& v : scene.vehicles) {
                double s = v.s;
                int route = most_conflicting_continuation(mr, v.route, v.s, &s);
                assign_route(mr, v, route, s);
            }
            RolloutParams params;
            ScenePrediction pred = rollout(scene, mr, {}, {}, params);
            SceneState plain = scene;
            int steps = static_cast<int>(std::llround(params.horizon / params.dt));
            for (int k = 0; k <= steps; ++k) {
                for (std::size_t i = 0; i < plain.vehicles.size(); ++i) {
                    int pi = pred.index_of(plain.vehicles[i].id);
                    worst_dev = std::max(
                        worst_dev,
                        std::fabs(pred.s_traj[static_cast<std::size_t>(pi)][static_cast<std::size_t>(k)] -
                                  plain.vehicles[i].s));
                }
                if (k == steps) break;
                std::map<int, double> accels;
                for (const VehicleState& veh : plain.vehicles)
                    accels[veh.id] = hdv_policy(plain, mr, veh.id, nullptr, params.driver);
                plain = step(plain, accels, params.dt);
            }
        }
        // (c) gradient check at 10 random parameterizations
        double worst_grad = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            MlpModel m = make_mlp(4, 500 + static_cast<std::uint64_t>(trial));
            Rng xr(900 + static_cast<std::uint64_t>(trial));
            std::vector<double> x(4);
            for (double& v : x) v = xr.uniform(-2.0, 2.0);
            worst_grad = std::max(worst_grad, grad_check(m, x, 1e-5));
        }
        bool pass = pet_ok && worst_dev <= 1e-9 && worst_grad < 1e-4;
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "PET oracle %s on 1000 logs, rollout-vs-sim max dev %.2e (<= 1e-9), "
                      "grad check max %.2e (< 1e-4)",
                      pet_ok ? "exact" : "MISMATCH", worst_dev, worst_grad);
        report(6, pass, buf);
    }

    // ---- criterion 7: urgency model quality gate -------------------------
    {
        const AggregateCell* fifo = sweep.find(main_road, PlanMethod::FIFO, 100);
        const AggregateCell* heur = sweep.find(main_road, PlanMethod::HEUR, 100);
        bool beats = fifo && heur && heur->mean_wait < fifo->mean_wait;
        bool pass = train_report.sign_accuracy >= 0.75 && beats;
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "holdout sign accuracy %.3f (>= 0.75), heur wait %.3f s < fifo wait %.3f s "
                      "at 100%% CAVs",
                      train_report.sign_accuracy, heur ? heur->mean_wait : -1.0,
                      fifo ? fifo->mean_wait : -1.0);
        report(7, pass, buf);
    }

    // ---- criterion 8: equation-level unit identities ----------------------
    {
        const RoadNetwork& mr = nets[0];
        bool ok = true;
        auto expect_eq = [&](double got, double want) {
            if (std::fabs(got - want) > 1e-9) ok = false;
        };
        auto synthetic = [&](const std::vector<double>& speeds) {
            ScenePrediction p;
            p.dt = 0.1;
            p.horizon = 12.0;
            p.ids = {0};
            p.routes = {mr.require_route("W_straight")};
            std::vector<double> s{0.0};
            for (std::size_t k = 1; k < speeds.size(); ++k) s.push_back(s.back() + speeds[k] * 0.1);
            p.s_traj = {s};
            p.v_traj = {speeds};
            return p;
        };
        expect_eq(time_loss(synthetic(std::vector<double>(121, 13.89)), mr), 0.0);
        expect_eq(time_loss(synthetic(std::vector<double>(121, 0.0)), mr), 12.0);
        std::vector<double> piecewise;
        for (int k = 0; k <= 120; ++k)
            piecewise.push_back(k < 60 ? 13.89 / 2.0 : (k == 60 ? 13.89 * 0.75 : 13.89));
        expect_eq(time_loss(synthetic(piecewise), mr, {{0, 2.0}}), 6.0);

        ScenePrediction prev;
        prev.crossing_order = {{0, 1}, {2, 3}};
        ScenePrediction same = prev;
        same.dt = 0.1;
        expect_eq(maneuver_metric(same, mr, {}, &prev), 0.0);
        ScenePrediction swapped;
        swapped.dt = 0.1;
        swapped.crossing_order = {{1, 0}, {2, 3}};
        expect_eq(maneuver_metric(swapped, mr, {}, &prev), 1.0);

        expect_eq(fifo_urgency(10.0, 5.0), 2.0);
        expect_eq(fifo_urgency(10.0, 0.0), 100.0);

        SceneState ws;
        VehicleState veh;
        veh.id = 0;
        veh.t_slow = 20.0;
        assign_route(mr, veh, mr.require_route("W_straight"), 10.0);
        ws.vehicles.push_back(veh);
        expect_eq(waiting_weights(ws)[0], 3.0);

        report(8, ok, "time loss, switching cost, arrival urgency and waiting weight identities "
                      "(tolerance 1e-9)");
    }

    // ---- criterion 9: determinism / replayability -------------------------
    {
        bool ok = true;
        Rng rng(31337);
        int checked = 0;
        std::string detail;
        for (int trial = 0; trial < 8; ++trial) {
            const SweepRow& row = sweep.rows[static_cast<std::size_t>(
                rng.next_below(sweep.rows.size()))];
            if (row.failed) continue;
            std::size_t ni = 0;
            for (std::size_t i = 0; i < map_paths.size(); ++i)
                if (map_id_from_path(map_paths[i]) == row.map_id) ni = i;
            RunResult replay = replay_cell(nets[ni], row.map_id, row.seed, row.method,
                                           row.cav_pct, cfg);
            bool same = fmt_g9(replay.metrics.mean_wait) == fmt_g9(row.metrics.mean_wait) &&
                        fmt_g9(replay.metrics.throughput) == fmt_g9(row.metrics.throughput) &&
                        fmt_g9(replay.metrics.stop_rate) == fmt_g9(row.metrics.stop_rate) &&
                        fmt_g9(replay.metrics.critical_pet_rate) ==
                            fmt_g9(row.metrics.critical_pet_rate);
            if (!same) {
                ok = false;
                detail = "mismatch at map=" + row.map_id + " seed=" + std::to_string(row.seed);
            }
            ++checked;
        }
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%d replayed cells byte-identical on all metric columns%s%s",
                      checked, detail.empty() ? "" : "; ", detail.c_str());
        report(9, ok, buf);
    }

    std::printf("%d criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
