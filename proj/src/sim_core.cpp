#include "coopsim/sim_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coopsim {

const VehicleState& SceneState::require(int vehicle_id) const {
    int i = find(vehicle_id);
    if (i < 0) throw std::runtime_error("unknown vehicle id " + std::to_string(vehicle_id));
    return vehicles[static_cast<std::size_t>(i)];
}

void assign_route(const RoadNetwork& net, VehicleState& veh, int route, double s) {
    veh.route = route;
    veh.s = s;
    const auto& zones = net.route_zones[static_cast<std::size_t>(route)];
    double pass = net.routes[static_cast<std::size_t>(route)].total_length;
    if (!zones.empty()) {
        pass = 0.0;
        for (const RouteZone& rz : zones) pass = std::max(pass, rz.s_target);
    }
    veh.pass_point_s = pass;
}

void step_in_place(std::vector<VehicleState>& vehicles, const double* accels, double dt,
                   double& time, long& step_index) {
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
        VehicleState& veh = vehicles[i];
        if (veh.held) continue;
        double a = accels[i];
        double v_new = std::max(0.0, veh.v + a * dt);
        double s_new = veh.s + v_new * dt;
        if (veh.s < veh.pass_point_s && s_new >= veh.pass_point_s) ++veh.crossings;
        veh.a = a;
        veh.v = v_new;
        veh.s = s_new;
        veh.t_slow = v_new < kSlowSpeed ? veh.t_slow + dt : 0.0;
        if (v_new < kWaitSpeed) veh.wait_accum += dt;
        if (v_new < kStopSpeed) veh.ever_stopped = true;
    }
    time += dt;
    ++step_index;
}

SceneState step(const SceneState& scene, const std::map<int, double>& accelerations, double dt) {
    if (dt <= 0.0) throw std::runtime_error("step: dt must be > 0");
    for (const auto& [id, a] : accelerations) {
        (void)a;
        if (scene.find(id) < 0) throw std::runtime_error("step: unknown vehicle id " + std::to_string(id));
    }
    SceneState out = scene;
    std::vector<double> accels(out.vehicles.size(), 0.0);
    for (std::size_t i = 0; i < out.vehicles.size(); ++i) {
        auto it = accelerations.find(out.vehicles[i].id);
        if (it == accelerations.end())
            throw std::runtime_error("step: missing acceleration for vehicle " +
                                     std::to_string(out.vehicles[i].id));
        accels[i] = it->second;
    }
    step_in_place(out.vehicles, accels.data(), dt, out.time, out.step_index);
    return out;
}

bool pass_completed(const VehicleState& veh) {
    return !veh.held && veh.s >= veh.pass_point_s + kReinsertTriggerGap;
}

namespace {

// Entry routes starting at the given lane, in stable order.
std::vector<int> entry_routes_from_lane(const RoadNetwork& net, int lane) {
    std::vector<int> out;
    for (const Entry& e : net.entries)
        if (net.routes[static_cast<std::size_t>(e.route)].lanes.front() == lane)
            out.push_back(e.route);
    return out;
}

}  // namespace

void reinsert(SceneState& scene, const RoadNetwork& net, int vehicle_id, Rng& rng,
              const ReinsertParams& params) {
    int idx = scene.find(vehicle_id);
    if (idx < 0) throw std::runtime_error("reinsert: unknown vehicle id " + std::to_string(vehicle_id));
    VehicleState& veh = scene.vehicles[static_cast<std::size_t>(idx)];

    std::vector<int> candidates = entry_routes_from_lane(net, veh.entry_lane);
    if (candidates.empty())
        throw std::runtime_error("reinsert: no entry route starts at the originating lane");
    int route = candidates[static_cast<std::size_t>(rng.next_below(candidates.size()))];

    double v_new = std::min(veh.v, kReinsertSpeedCap);
    const auto& zones = net.route_zones[static_cast<std::size_t>(route)];
    double point = zones.empty()
                       ? net.routes[static_cast<std::size_t>(route)].total_length * 0.5
                       : zones.front().s_stop - kReinsertLeadGap;

    // queue tail on the entry lane: rear of the rearmost occupant, lane coords
    int entry_lane = net.routes[static_cast<std::size_t>(route)].lanes.front();
    double lane_len = net.lanes[static_cast<std::size_t>(entry_lane)].centerline.length();
    double tail_rear = std::numeric_limits<double>::infinity();
    for (const VehicleState& other : scene.vehicles) {
        if (other.id == vehicle_id || other.held) continue;
        double start = net.lane_start_in_route(other.route, entry_lane);
        if (start < 0.0) continue;
        double in_lane = other.s - start;
        if (in_lane < -other.length || in_lane > lane_len + other.length) continue;
        tail_rear = std::min(tail_rear, in_lane - other.length);
    }
    if (std::isfinite(tail_rear)) {
        double gap = params.gap_s0 + v_new * params.headway_T;
        point = std::min(point, tail_rear - gap);
    }

    if (point < 0.0) {
        veh.held = true;
        veh.v = v_new;
        return;
    }
    veh.held = false;
    veh.v = v_new;
    veh.a = 0.0;
    assign_route(net, veh, route, point);
}

}  // namespace coopsim
