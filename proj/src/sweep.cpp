#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "coopsim/harness.hpp"

namespace coopsim {

using nlohmann::json;

std::string fmt_g9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

double sign_test_p(int successes, int n) {
    if (n <= 0) return 1.0;
    // P[X >= successes], X ~ Bin(n, 1/2)
    double p = 0.0;
    double coeff = 1.0;  // C(n, 0)
    double scale = std::pow(0.5, n);
    for (int k = 0; k <= n; ++k) {
        if (k >= successes) p += coeff * scale;
        coeff = coeff * (n - k) / (k + 1.0);
    }
    return std::min(p, 1.0);
}

std::string map_id_from_path(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

const AggregateCell* ExperimentReport::find(const std::string& map_id, PlanMethod m,
                                            int pct) const {
    for (const AggregateCell& c : aggregates)
        if (c.map_id == map_id && c.method == m && c.cav_pct == pct) return &c;
    return nullptr;
}

namespace {

void aggregate_into(ExperimentReport& report, const std::string& map_filter,
                    const std::vector<PlanMethod>& methods, const std::vector<int>& pcts) {
    for (int pct : pcts) {
        for (PlanMethod m : methods) {
            AggregateCell cell;
            cell.map_id = map_filter;
            cell.method = m;
            cell.cav_pct = pct;
            for (const SweepRow& row : report.rows) {
                if (row.method != m || row.cav_pct != pct || row.failed) continue;
                if (map_filter != "all" && row.map_id != map_filter) continue;
                ++cell.runs;
                cell.mean_wait += row.metrics.mean_wait;
                cell.throughput += row.metrics.throughput;
                cell.stop_rate += row.metrics.stop_rate;
                cell.critical_pet_rate += row.metrics.critical_pet_rate;
            }
            if (cell.runs == 0) continue;
            cell.mean_wait /= cell.runs;
            cell.throughput /= cell.runs;
            cell.stop_rate /= cell.runs;
            cell.critical_pet_rate /= cell.runs;
            report.aggregates.push_back(cell);
        }
    }
    // ratios against the same-map/pct baseline
    for (AggregateCell& c : report.aggregates) {
        const AggregateCell* base = report.find(c.map_id, PlanMethod::NONE, c.cav_pct);
        if (!base || base->mean_wait <= 0.0 || base->throughput <= 0.0) continue;
        c.wait_ratio = c.mean_wait / base->mean_wait;
        c.throughput_ratio = c.throughput / base->throughput;
    }
}

}  // namespace

ExperimentReport run_experiment(const SweepConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    if (cfg.map_paths.empty()) throw std::runtime_error("run_experiment: no maps configured");

    std::vector<RoadNetwork> nets;
    nets.reserve(cfg.map_paths.size());
    for (const std::string& path : cfg.map_paths) nets.push_back(load_network_file(path));

    MlpModel heur_model;
    bool have_model = false;
    for (PlanMethod m : cfg.methods)
        if (m == PlanMethod::HEUR) {
            if (cfg.heur_model_path.empty())
                throw std::runtime_error("run_experiment: HEUR requested without a model file");
            heur_model = load_model(cfg.heur_model_path);
            have_model = true;
        }

    ExperimentReport report;
    struct Cell {
        std::size_t net_idx;
        std::uint64_t seed;
        PlanMethod method;
        int pct;
    };
    std::vector<Cell> cells;
    for (std::size_t ni = 0; ni < nets.size(); ++ni)
        for (int s = 0; s < cfg.seeds_per_map; ++s)
            for (int pct : cfg.cav_percentages)
                for (PlanMethod m : cfg.methods)
                    cells.push_back({ni, cfg.seed_base + static_cast<std::uint64_t>(s), m, pct});
    report.rows.resize(cells.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t idx = next.fetch_add(1);
            if (idx >= cells.size()) return;
            const Cell& cell = cells[idx];
            SweepRow& row = report.rows[idx];
            row.map_id = map_id_from_path(cfg.map_paths[cell.net_idx]);
            row.seed = cell.seed;
            row.method = cell.method;
            row.cav_pct = cell.pct;
            ScenarioSpec spec;
            spec.map_id = row.map_id;
            spec.seed = cell.seed;
            spec.vehicle_count = cfg.vehicle_count;
            spec.cav_percentage = cell.pct;
            spec.duration = cfg.duration;
            spec.method = cell.method;
            RunConfig rc;
            rc.driver = cfg.driver;
            rc.heur_model = have_model ? &heur_model : nullptr;
            try {
                RunResult result = run_simulation(nets[cell.net_idx], spec, rc);
                row.metrics = result.metrics;
                row.cav_conflicts_under_maneuver = result.cav_conflicts_under_maneuver;
                row.constraint_window_violations = result.constraint_window_violations;
                row.compliance_violations = result.compliance_violations;
                row.collisions = result.metrics.collisions;
            } catch (const std::exception& e) {
                row.failed = true;
            }
        }
    };
    unsigned n_threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();

    for (const SweepRow& row : report.rows)
        if (row.failed) ++report.failed_runs;

    std::vector<std::string> map_ids;
    for (const std::string& p : cfg.map_paths) map_ids.push_back(map_id_from_path(p));
    for (const std::string& id : map_ids) aggregate_into(report, id, cfg.methods, cfg.cav_percentages);
    aggregate_into(report, "all", cfg.methods, cfg.cav_percentages);

    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::string report_csv(const ExperimentReport& report) {
    std::ostringstream out;
    out << "map,seed,method,cav_pct,mean_wait_s,throughput_per_h,stop_rate,"
           "critical_pet_rate,max_cycle_ms,p97_cycle_ms\n";
    std::vector<const SweepRow*> rows;
    for (const SweepRow& r : report.rows) rows.push_back(&r);
    std::sort(rows.begin(), rows.end(), [](const SweepRow* a, const SweepRow* b) {
        return std::tie(a->map_id, a->seed, a->cav_pct, a->method) <
               std::tie(b->map_id, b->seed, b->cav_pct, b->method);
    });
    for (const SweepRow* r : rows) {
        out << r->map_id << ',' << r->seed << ',' << to_string(r->method) << ',' << r->cav_pct
            << ',' << fmt_g9(r->metrics.mean_wait) << ',' << fmt_g9(r->metrics.throughput) << ','
            << fmt_g9(r->metrics.stop_rate) << ',' << fmt_g9(r->metrics.critical_pet_rate) << ','
            << fmt_g9(r->metrics.max_cycle_ms) << ',' << fmt_g9(r->metrics.p97_cycle_ms) << '\n';
    }
    return out.str();
}

std::string report_summary(const ExperimentReport& report) {
    std::ostringstream out;
    out << "runs: " << report.rows.size() << "  failed: " << report.failed_runs
        << "  wall: " << fmt_g9(report.wall_time_s) << " s\n";
    out << "map        pct method  wait_s  ratio  thrpt/h ratio  stops  critPET\n";
    for (const AggregateCell& c : report.aggregates) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-22s %3d %-5s %7.2f %6.3f %8.1f %6.3f %6.3f %8.4f\n",
                      c.map_id.c_str(), c.cav_pct, to_string(c.method).c_str(), c.mean_wait,
                      c.wait_ratio, c.throughput, c.throughput_ratio, c.stop_rate,
                      c.critical_pet_rate);
        out << line;
    }
    return out.str();
}

void write_report(const ExperimentReport& report, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream f(out_dir + "/sweep.csv");
        f << report_csv(report);
    }
    {
        std::ofstream f(out_dir + "/summary.txt");
        f << report_summary(report);
    }
    json doc;
    json agg = json::array();
    for (const AggregateCell& c : report.aggregates) {
        json j;
        j["map"] = c.map_id;
        j["method"] = to_string(c.method);
        j["cav_pct"] = c.cav_pct;
        j["runs"] = c.runs;
        j["mean_wait_s"] = c.mean_wait;
        j["throughput_per_h"] = c.throughput;
        j["stop_rate"] = c.stop_rate;
        j["critical_pet_rate"] = c.critical_pet_rate;
        j["wait_ratio_vs_none"] = c.wait_ratio;
        j["throughput_ratio_vs_none"] = c.throughput_ratio;
        agg.push_back(std::move(j));
    }
    doc["aggregates"] = std::move(agg);
    doc["failed_runs"] = report.failed_runs;
    doc["wall_time_s"] = report.wall_time_s;
    std::ofstream f(out_dir + "/report.json");
    f << doc.dump(1) << '\n';
}

RunResult replay_cell(const RoadNetwork& net, const std::string& map_id, std::uint64_t seed,
                      PlanMethod method, int cav_pct, const SweepConfig& cfg) {
    ScenarioSpec spec;
    spec.map_id = map_id;
    spec.seed = seed;
    spec.vehicle_count = cfg.vehicle_count;
    spec.cav_percentage = cav_pct;
    spec.duration = cfg.duration;
    spec.method = method;
    RunConfig rc;
    rc.driver = cfg.driver;
    MlpModel model;
    if (method == PlanMethod::HEUR) {
        model = load_model(cfg.heur_model_path);
        rc.heur_model = &model;
    }
    return run_simulation(net, spec, rc);
}

DriverParams driver_params_from_json_text(const std::string& text, DriverParams base) {
    json j = json::parse(text);
    auto get = [&](const char* key, double& field) {
        if (j.contains(key)) field = j.at(key).get<double>();
    };
    get("v0_factor", base.v0_factor);
    get("headway_T_s", base.headway_T);
    get("a_max_mps2", base.a_max);
    get("b_comf_mps2", base.b_comf);
    get("s0_m", base.s0);
    get("delta_exp", base.delta_exp);
    get("b_emergency_mps2", base.b_emergency);
    get("a_lat_max_mps2", base.a_lat_max);
    get("tau_gap_s", base.tau_gap);
    get("lookahead_m", base.lookahead);
    return base;
}

SweepConfig sweep_config_from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open sweep config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    json j = json::parse(ss.str());
    SweepConfig cfg;
    cfg.map_paths = j.at("maps").get<std::vector<std::string>>();
    if (j.contains("seeds_per_map")) cfg.seeds_per_map = j.at("seeds_per_map").get<int>();
    if (j.contains("seed_base")) cfg.seed_base = j.at("seed_base").get<std::uint64_t>();
    if (j.contains("cav_percentages"))
        cfg.cav_percentages = j.at("cav_percentages").get<std::vector<int>>();
    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const json& m : j.at("methods"))
            cfg.methods.push_back(plan_method_from_string(m.get<std::string>()));
    }
    if (j.contains("vehicle_count")) cfg.vehicle_count = j.at("vehicle_count").get<int>();
    if (j.contains("duration_s")) cfg.duration = j.at("duration_s").get<double>();
    if (j.contains("heur_model")) cfg.heur_model_path = j.at("heur_model").get<std::string>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("driver"))
        cfg.driver = driver_params_from_json_text(j.at("driver").dump(), cfg.driver);
    return cfg;
}

}  // namespace coopsim
