#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "coopsim/harness.hpp"

namespace py = pybind11;
using namespace coopsim;

namespace {

struct NetworkHandle {
    std::shared_ptr<RoadNetwork> net;
    std::string path;
};

NetworkHandle load(const std::string& path) {
    return {std::make_shared<RoadNetwork>(load_network_file(path)), path};
}

py::dict metrics_dict(const RunResult& r) {
    py::dict m;
    m["mean_wait_s"] = r.metrics.mean_wait;
    m["throughput_per_h"] = r.metrics.throughput;
    m["stop_rate"] = r.metrics.stop_rate;
    m["critical_pet_rate"] = r.metrics.critical_pet_rate;
    m["pet_count"] = r.metrics.pet_values.size();
    m["collisions"] = r.metrics.collisions;
    m["max_cycle_ms"] = r.metrics.max_cycle_ms;
    m["p97_cycle_ms"] = r.metrics.p97_cycle_ms;
    m["cav_conflicts_under_maneuver"] = r.cav_conflicts_under_maneuver;
    m["constraint_window_violations"] = r.constraint_window_violations;
    m["compliance_violations"] = r.compliance_violations;
    m["maneuver_rejects"] = r.maneuver_rejects;
    m["maneuver_aborts"] = r.maneuver_aborts;
    return m;
}

}  // namespace

PYBIND11_MODULE(_coopsim, m) {
    m.doc() = "mixed-traffic microsimulation with centralized cooperative maneuver planning";

    py::class_<NetworkHandle>(m, "Network")
        .def_property_readonly("scenario_kind",
                               [](const NetworkHandle& h) { return to_string(h.net->scenario_kind); })
        .def_property_readonly("num_lanes",
                               [](const NetworkHandle& h) { return h.net->lanes.size(); })
        .def_property_readonly("num_routes",
                               [](const NetworkHandle& h) { return h.net->routes.size(); })
        .def_property_readonly("num_conflict_zones",
                               [](const NetworkHandle& h) { return h.net->zones.size(); })
        .def("route_ids",
             [](const NetworkHandle& h) {
                 std::vector<std::string> out;
                 for (const Route& r : h.net->routes) out.push_back(r.id);
                 return out;
             })
        .def("most_conflicting_route",
             [](const NetworkHandle& h, const std::string& entry_lane) {
                 return most_conflicting_route(*h.net, entry_lane).id;
             },
             py::arg("entry_lane"))
        .def("max_heading_diff",
             [](const NetworkHandle& h, const std::string& route, double s, double lookahead) {
                 return max_upcoming_heading_diff(*h.net, h.net->require_route(route), s, lookahead);
             },
             py::arg("route"), py::arg("s"), py::arg("lookahead") = 100.0);

    m.def("load_network", &load, py::arg("path"));

    m.def(
        "simulate",
        [](const NetworkHandle& net, std::uint64_t seed, const std::string& method, int cav_pct,
           double duration, int count, const std::string& heur_model_path) {
            ScenarioSpec spec;
            spec.map_id = map_id_from_path(net.path);
            spec.seed = seed;
            spec.vehicle_count = count;
            spec.cav_percentage = cav_pct;
            spec.duration = duration;
            spec.method = plan_method_from_string(method);
            RunConfig cfg;
            MlpModel model;
            if (spec.method == PlanMethod::HEUR) {
                model = load_model(heur_model_path);
                cfg.heur_model = &model;
            }
            RunResult r = run_simulation(*net.net, spec, cfg);
            return metrics_dict(r);
        },
        py::arg("network"), py::arg("seed") = 1, py::arg("method") = "opt",
        py::arg("cav_pct") = 100, py::arg("duration") = 60.0, py::arg("count") = 10,
        py::arg("heur_model") = "");

    m.def(
        "train_heur",
        [](const std::vector<std::string>& map_paths, int runs, double run_length,
           std::uint64_t seed, int epochs, const std::string& out_model) {
            std::vector<RoadNetwork> nets;
            std::vector<const RoadNetwork*> ptrs;
            for (const std::string& p : map_paths) nets.push_back(load_network_file(p));
            for (const RoadNetwork& n : nets) ptrs.push_back(&n);
            DatasetConfig dcfg;
            dcfg.n_runs = runs;
            dcfg.run_length = run_length;
            dcfg.seed = seed;
            TrainConfig tcfg;
            tcfg.epochs = epochs;
            tcfg.seed = seed;
            MlpModel model;
            TrainHeurReport rep = train_heur(ptrs, dcfg, tcfg, DriverParams{}, model);
            if (!out_model.empty()) save_model(model, out_model);
            py::dict out;
            out["n_samples"] = rep.n_samples;
            out["n_holdout"] = rep.n_holdout;
            out["sign_accuracy"] = rep.sign_accuracy;
            out["final_rmse"] = rep.final_rmse;
            return out;
        },
        py::arg("map_paths"), py::arg("runs") = 20, py::arg("run_length") = 60.0,
        py::arg("seed") = 1, py::arg("epochs") = 50, py::arg("out_model") = "");

    m.def(
        "compute_pet",
        [](const NetworkHandle& net, const std::vector<py::dict>& raw) {
            std::vector<ZoneOccupancy> events;
            for (const py::dict& d : raw) {
                ZoneOccupancy e;
                e.vehicle_id = d["vehicle"].cast<int>();
                e.zone = d["zone"].cast<int>();
                e.approach = d["approach"].cast<int>();
                e.t_enter = d["t_enter"].cast<double>();
                if (d.contains("t_exit")) {
                    e.t_exit = d["t_exit"].cast<double>();
                    e.exited = true;
                }
                events.push_back(e);
            }
            PetResult r = compute_pet(events, *net.net);
            return py::make_tuple(r.values, r.collisions);
        },
        py::arg("network"), py::arg("events"));

    m.def(
        "gap_accept",
        [](double d_targ, double v, double d_stop_other, double v_other, double tau_gap) {
            GapObservation g{d_targ, v, d_stop_other, v_other};
            DriverParams p;
            p.tau_gap = tau_gap;
            return gap_accept(g, p);
        },
        py::arg("d_targ"), py::arg("v"), py::arg("d_stop_other"), py::arg("v_other"),
        py::arg("tau_gap") = 1.5);

    m.def("mlp_grad_check", [](std::uint64_t seed) {
        MlpModel model = make_mlp(4, seed);
        Rng rng(mix_seed(seed, 0x6763));
        std::vector<double> x(4);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        return grad_check(model, x, 1e-5);
    }, py::arg("seed") = 1);
}
