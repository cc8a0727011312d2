#pragma once

#include <map>
#include <string>

#include "coopsim/harness.hpp"

namespace coopsim::test {

/// Fixture maps, loaded once (tests run from the repository root).
inline const RoadNetwork& fixture(const std::string& name) {
    static std::map<std::string, RoadNetwork> cache;
    auto it = cache.find(name);
    if (it == cache.end())
        it = cache.emplace(name, load_network_file("maps/" + name + ".json")).first;
    return it->second;
}

/// Minimal valid map: two 100 m single-lane routes crossing at their midpoint.
inline std::string mini_crossing_json(double s_stop = 47.0, double s_target = 53.0) {
    std::string stop = std::to_string(s_stop);
    std::string target = std::to_string(s_target);
    return R"({
      "map_version": 1,
      "scenario_kind": "right_before_left",
      "lanes": [
        {"id": "ew", "points": [[-50, 0], [50, 0]], "speed_limit_mps": 13.89, "successors": []},
        {"id": "ns", "points": [[0, 50], [0, -50]], "speed_limit_mps": 13.89, "successors": []}
      ],
      "routes": [
        {"id": "r_ew", "lane_ids": ["ew"]},
        {"id": "r_ns", "lane_ids": ["ns"]}
      ],
      "conflict_zones": [
        {"id": "x", "approaches": [
            {"route_id": "r_ew", "s_stop_m": )" + stop + R"(, "s_target_m": )" + target + R"(},
            {"route_id": "r_ns", "s_stop_m": )" + stop + R"(, "s_target_m": )" + target + R"(}
          ], "precedence": [[0, 1]]}
      ],
      "entries": [
        {"route_id": "r_ew", "spawn_s_min_m": 0, "spawn_s_max_m": 20},
        {"route_id": "r_ns", "spawn_s_min_m": 0, "spawn_s_max_m": 20}
      ]
    })";
}

inline const RoadNetwork& mini_crossing() {
    static RoadNetwork net = load_network(mini_crossing_json());
    return net;
}

inline VehicleState& place(const RoadNetwork& net, SceneState& scene, int id, VehicleKind kind,
                           const std::string& route_id, double s, double v) {
    VehicleState veh;
    veh.id = id;
    veh.kind = kind;
    veh.v = v;
    int route = net.require_route(route_id);
    veh.entry_lane = net.routes[static_cast<std::size_t>(route)].lanes.front();
    assign_route(net, veh, route, s);
    scene.vehicles.push_back(veh);
    return scene.vehicles.back();
}

}  // namespace coopsim::test
