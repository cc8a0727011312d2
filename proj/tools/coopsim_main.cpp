#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "coopsim/harness.hpp"

using namespace coopsim;
using nlohmann::json;

namespace {

json run_log_to_json(const ScenarioSpec& spec, const std::string& map_path,
                     const RunResult& result) {
    json doc;
    doc["map"] = spec.map_id;
    doc["map_path"] = map_path;
    doc["seed"] = spec.seed;
    doc["method"] = to_string(spec.method);
    doc["cav_pct"] = spec.cav_percentage;
    doc["vehicle_count"] = spec.vehicle_count;
    doc["duration_s"] = spec.duration;
    json m;
    m["mean_wait_s"] = result.metrics.mean_wait;
    m["throughput_per_h"] = result.metrics.throughput;
    m["stop_rate"] = result.metrics.stop_rate;
    m["critical_pet_rate"] = result.metrics.critical_pet_rate;
    m["pet_count"] = result.metrics.pet_values.size();
    m["collisions"] = result.metrics.collisions;
    m["max_cycle_ms"] = result.metrics.max_cycle_ms;
    m["p97_cycle_ms"] = result.metrics.p97_cycle_ms;
    doc["metrics"] = std::move(m);
    json audits;
    audits["cav_conflicts_under_maneuver"] = result.cav_conflicts_under_maneuver;
    audits["constraint_window_violations"] = result.constraint_window_violations;
    audits["compliance_violations"] = result.compliance_violations;
    audits["maneuver_rejects"] = result.maneuver_rejects;
    audits["maneuver_aborts"] = result.maneuver_aborts;
    doc["audits"] = std::move(audits);
    json events = json::array();
    for (const ZoneOccupancy& e : result.log.zone_events) {
        json je;
        je["vehicle"] = e.vehicle_id;
        je["zone"] = e.zone;
        je["approach"] = e.approach;
        je["t_enter_s"] = e.t_enter;
        if (e.exited) je["t_exit_s"] = e.t_exit;
        events.push_back(std::move(je));
    }
    doc["zone_events"] = std::move(events);
    json cycles = json::array();
    for (double t : result.log.cycle_times_s) cycles.push_back(t * 1e3);
    doc["cycle_times_ms"] = std::move(cycles);
    return doc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixed-traffic microsimulation and cooperative maneuver planning"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "run one scenario and write a JSON log");
    std::string sim_map, sim_method = "opt", sim_out, sim_model, sim_driver_json;
    std::uint64_t sim_seed = 1;
    int sim_pct = 100, sim_count = 10;
    double sim_duration = 60.0;
    sim->add_option("--map", sim_map, "map JSON file")->required();
    sim->add_option("--seed", sim_seed, "scenario seed");
    sim->add_option("--method", sim_method, "none|nc|fifo|heur|opt");
    sim->add_option("--cav-pct", sim_pct, "CAV percentage 0..100");
    sim->add_option("--count", sim_count, "vehicle count (max 10 by default)");
    sim->add_option("--duration", sim_duration, "seconds");
    sim->add_option("--out", sim_out, "output log JSON");
    sim->add_option("--heur-model", sim_model, "trained urgency model (for --method heur)");
    sim->add_option("--driver-config", sim_driver_json, "driver parameter overrides, JSON file");

    // train-heur
    auto* train = app.add_subcommand("train-heur", "generate pairwise data and train the urgency model");
    std::vector<std::string> train_maps;
    std::string train_out = "heur_model.json", train_dataset;
    int train_runs = 200, train_epochs = 200;
    double train_len = 120.0;
    std::uint64_t train_seed = 1;
    train->add_option("--map", train_maps, "map JSON file (repeatable)")->required();
    train->add_option("--runs", train_runs, "simulation runs for data generation");
    train->add_option("--run-length", train_len, "seconds per run");
    train->add_option("--seed", train_seed, "rng seed");
    train->add_option("--epochs", train_epochs, "training epochs");
    train->add_option("--out-model", train_out, "model output path");
    train->add_option("--out-dataset", train_dataset, "optional dataset dump path");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "run the full experiment sweep from a config file");
    std::string sweep_config, sweep_out = "sweep_out";
    sweep->add_option("--config", sweep_config, "sweep config JSON")->required();
    sweep->add_option("--out-dir", sweep_out, "output directory");

    // pet-check
    auto* pet = app.add_subcommand("pet-check", "recompute PET statistics from a run log");
    std::string pet_log;
    pet->add_option("--log", pet_log, "run log JSON written by simulate --out")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            RoadNetwork net = load_network_file(sim_map);
            ScenarioSpec spec;
            spec.map_id = map_id_from_path(sim_map);
            spec.seed = sim_seed;
            spec.vehicle_count = sim_count;
            spec.cav_percentage = sim_pct;
            spec.duration = sim_duration;
            spec.method = plan_method_from_string(sim_method);
            RunConfig cfg;
            if (!sim_driver_json.empty()) {
                std::ifstream f(sim_driver_json);
                std::stringstream ss;
                ss << f.rdbuf();
                cfg.driver = driver_params_from_json_text(ss.str(), cfg.driver);
            }
            MlpModel model;
            if (spec.method == PlanMethod::HEUR) {
                if (sim_model.empty()) throw std::runtime_error("--method heur needs --heur-model");
                model = load_model(sim_model);
                cfg.heur_model = &model;
            }
            RunResult result = run_simulation(net, spec, cfg);
            json doc = run_log_to_json(spec, sim_map, result);
            if (!sim_out.empty()) {
                std::ofstream f(sim_out);
                f << doc.dump(1) << '\n';
            }
            std::printf("map=%s seed=%llu method=%s cav_pct=%d\n", spec.map_id.c_str(),
                        static_cast<unsigned long long>(spec.seed), sim_method.c_str(), sim_pct);
            std::printf("mean_wait_s=%s throughput_per_h=%s stop_rate=%s critical_pet_rate=%s\n",
                        fmt_g9(result.metrics.mean_wait).c_str(),
                        fmt_g9(result.metrics.throughput).c_str(),
                        fmt_g9(result.metrics.stop_rate).c_str(),
                        fmt_g9(result.metrics.critical_pet_rate).c_str());
            std::printf("max_cycle_ms=%s p97_cycle_ms=%s collisions=%d\n",
                        fmt_g9(result.metrics.max_cycle_ms).c_str(),
                        fmt_g9(result.metrics.p97_cycle_ms).c_str(), result.metrics.collisions);
        } else if (*train) {
            std::vector<RoadNetwork> nets;
            std::vector<const RoadNetwork*> net_ptrs;
            for (const std::string& p : train_maps) nets.push_back(load_network_file(p));
            for (const RoadNetwork& n : nets) net_ptrs.push_back(&n);
            DatasetConfig dcfg;
            dcfg.n_runs = train_runs;
            dcfg.run_length = train_len;
            dcfg.seed = train_seed;
            TrainConfig tcfg;
            tcfg.epochs = train_epochs;
            tcfg.seed = train_seed;
            DriverParams driver;
            if (!train_dataset.empty()) {
                auto data = generate_heur_dataset(net_ptrs, dcfg, driver);
                std::ofstream f(train_dataset);
                f << dataset_to_json(data, dcfg) << '\n';
            }
            MlpModel model;
            TrainHeurReport report = train_heur(net_ptrs, dcfg, tcfg, driver, model);
            save_model(model, train_out);
            std::printf("samples=%zu holdout=%zu sign_accuracy=%s final_rmse=%s model=%s\n",
                        report.n_samples, report.n_holdout, fmt_g9(report.sign_accuracy).c_str(),
                        fmt_g9(report.final_rmse).c_str(), train_out.c_str());
        } else if (*sweep) {
            SweepConfig cfg = sweep_config_from_json_file(sweep_config);
            ExperimentReport report = run_experiment(cfg);
            write_report(report, sweep_out);
            std::printf("%s", report_summary(report).c_str());
            std::printf("wrote %s/sweep.csv, report.json, summary.txt\n", sweep_out.c_str());
        } else if (*pet) {
            std::ifstream f(pet_log);
            if (!f) throw std::runtime_error("cannot open log '" + pet_log + "'");
            std::stringstream ss;
            ss << f.rdbuf();
            json doc = json::parse(ss.str());
            RoadNetwork net = load_network_file(doc.at("map_path").get<std::string>());
            std::vector<ZoneOccupancy> events;
            for (const json& je : doc.at("zone_events")) {
                ZoneOccupancy e;
                e.vehicle_id = je.at("vehicle").get<int>();
                e.zone = je.at("zone").get<int>();
                e.approach = je.at("approach").get<int>();
                e.t_enter = je.at("t_enter_s").get<double>();
                if (je.contains("t_exit_s")) {
                    e.t_exit = je.at("t_exit_s").get<double>();
                    e.exited = true;
                }
                events.push_back(e);
            }
            PetResult pets = compute_pet(events, net);
            int critical = 0;
            for (double v : pets.values)
                if (v < kCriticalPet) ++critical;
            std::printf("pet_count=%zu critical=%d collisions=%d\n", pets.values.size(), critical,
                        pets.collisions);
            for (double v : pets.values) std::printf("%s\n", fmt_g9(v).c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
