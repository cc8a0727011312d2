#include "coopsim/protocol.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace coopsim {

using nlohmann::json;

std::string to_string(ManeuverResponse::Reason r) {
    switch (r) {
        case ManeuverResponse::Reason::none: return "none";
        case ManeuverResponse::Reason::infeasible_tmin: return "infeasible_tmin";
        case ManeuverResponse::Reason::infeasible_tmax: return "infeasible_tmax";
        case ManeuverResponse::Reason::internal: return "internal";
    }
    return "?";
}

std::vector<ManeuverMessage> issue(const PlanResult& plan, long cycle, ProtocolState& state) {
    state.outstanding.clear();
    std::map<int, ManeuverMessage> by_recipient;
    for (const ConstraintSet& cs : plan.constraints) {
        ManeuverMessage& m = by_recipient[cs.vehicle_id];
        m.recipient = cs.vehicle_id;
        m.constraints = cs.entries;
    }
    for (const auto& [id, others] : plan.non_conflicting) {
        if (others.empty() && !by_recipient.count(id)) continue;
        ManeuverMessage& m = by_recipient[id];
        m.recipient = id;
        m.non_conflicting = others;
    }
    std::vector<ManeuverMessage> out;
    for (auto& [id, msg] : by_recipient) {
        msg.cycle = cycle;
        msg.maneuver_id = state.next_id[id]++;
        state.outstanding.insert(msg.maneuver_id);
        out.push_back(std::move(msg));
    }
    return out;
}

namespace {

json constraint_to_json(const Constraint& c) {
    json j;
    j["s_m"] = c.s;
    j["t_min_s"] = std::isfinite(c.t_min) ? json(c.t_min) : json(nullptr);
    j["t_max_s"] = std::isfinite(c.t_max) ? json(c.t_max) : json(nullptr);
    return j;
}

Constraint constraint_from_json(const json& j) {
    Constraint c;
    c.s = j.at("s_m").get<double>();
    c.t_min = j.at("t_min_s").is_null() ? -kInf : j.at("t_min_s").get<double>();
    c.t_max = j.at("t_max_s").is_null() ? kInf : j.at("t_max_s").get<double>();
    return c;
}

std::vector<std::uint8_t> frame(const std::string& body) {
    std::vector<std::uint8_t> out;
    auto n = static_cast<std::uint32_t>(body.size());
    out.push_back(static_cast<std::uint8_t>(n >> 24));
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    out.push_back(static_cast<std::uint8_t>(n >> 8));
    out.push_back(static_cast<std::uint8_t>(n));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

std::string unframe(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4) throw std::runtime_error("wire frame too short");
    std::uint32_t n = (static_cast<std::uint32_t>(bytes[0]) << 24) |
                      (static_cast<std::uint32_t>(bytes[1]) << 16) |
                      (static_cast<std::uint32_t>(bytes[2]) << 8) |
                      static_cast<std::uint32_t>(bytes[3]);
    if (bytes.size() != n + 4) throw std::runtime_error("wire frame length mismatch");
    return std::string(bytes.begin() + 4, bytes.end());
}

}  // namespace

std::vector<std::uint8_t> encode_message(const ManeuverMessage& msg) {
    json j;
    j["mcm_version"] = 1;
    j["cycle"] = msg.cycle;
    j["maneuver_id"] = msg.maneuver_id;
    j["recipient"] = msg.recipient;
    j["constraints"] = json::array();
    for (const Constraint& c : msg.constraints) j["constraints"].push_back(constraint_to_json(c));
    j["non_conflicting"] = msg.non_conflicting;
    return frame(j.dump());
}

ManeuverMessage decode_message(const std::vector<std::uint8_t>& bytes) {
    json j = json::parse(unframe(bytes));
    if (j.at("mcm_version").get<int>() != 1)
        throw std::runtime_error("unsupported mcm_version");
    ManeuverMessage msg;
    msg.cycle = j.at("cycle").get<long>();
    msg.maneuver_id = j.at("maneuver_id").get<long>();
    msg.recipient = j.at("recipient").get<int>();
    for (const json& c : j.at("constraints")) msg.constraints.push_back(constraint_from_json(c));
    msg.non_conflicting = j.at("non_conflicting").get<std::vector<int>>();
    return msg;
}

std::vector<std::uint8_t> encode_response(const ManeuverResponse& resp) {
    json j;
    j["maneuver_id"] = resp.maneuver_id;
    j["verdict"] = resp.verdict == ManeuverResponse::Verdict::accept ? "accept" : "reject";
    j["reason"] = to_string(resp.reason);
    return frame(j.dump());
}

ManeuverResponse decode_response(const std::vector<std::uint8_t>& bytes) {
    json j = json::parse(unframe(bytes));
    ManeuverResponse resp;
    resp.maneuver_id = j.at("maneuver_id").get<long>();
    std::string v = j.at("verdict").get<std::string>();
    resp.verdict = v == "accept" ? ManeuverResponse::Verdict::accept
                                 : ManeuverResponse::Verdict::reject;
    std::string r = j.at("reason").get<std::string>();
    if (r == "infeasible_tmin") resp.reason = ManeuverResponse::Reason::infeasible_tmin;
    else if (r == "infeasible_tmax") resp.reason = ManeuverResponse::Reason::infeasible_tmax;
    else if (r == "internal") resp.reason = ManeuverResponse::Reason::internal;
    else resp.reason = ManeuverResponse::Reason::none;
    return resp;
}

double earliest_arrival(const RoadNetwork& net, int route, double s, double v, double waypoint_s,
                        double a_max) {
    if (waypoint_s <= s) return 0.0;
    const Route& r = net.routes[static_cast<std::size_t>(route)];
    double t = 0.0;
    double pos = s;
    double speed = v;
    for (std::size_t li = 0; li < r.lanes.size() && pos < waypoint_s; ++li) {
        double lane_end = li + 1 < r.lanes.size() ? r.lane_start_s[li + 1] : r.total_length;
        if (lane_end <= pos) continue;
        double seg_end = std::min(lane_end, waypoint_s);
        double d = seg_end - pos;
        // a vehicle already above the cap is not forced to brake here
        double cap = std::max(net.lanes[static_cast<std::size_t>(r.lanes[li])].speed_limit, speed);
        double d_acc = (cap * cap - speed * speed) / (2.0 * a_max);
        if (d_acc >= d) {
            double v_end = std::sqrt(speed * speed + 2.0 * a_max * d);
            t += (v_end - speed) / a_max;
            speed = v_end;
        } else {
            t += (cap - speed) / a_max + (d - d_acc) / cap;
            speed = cap;
        }
        pos = seg_end;
    }
    if (pos < waypoint_s) t += (waypoint_s - pos) / std::max(speed, 0.1);
    return t;
}

ManeuverResponse cav_feasibility(const SceneState& scene, const RoadNetwork& net,
                                 const ManeuverMessage& msg, const DriverParams& limits) {
    const VehicleState& veh = scene.require(msg.recipient);
    ManeuverResponse resp;
    resp.maneuver_id = msg.maneuver_id;
    auto reject = [&](ManeuverResponse::Reason reason) {
        resp.verdict = ManeuverResponse::Verdict::reject;
        resp.reason = reason;
        return resp;
    };
    for (const Constraint& c : msg.constraints) {
        if (std::isfinite(c.t_min)) {
            if (veh.s >= c.s) return reject(ManeuverResponse::Reason::infeasible_tmin);
            bool can_stop = veh.v * veh.v <= 2.0 * limits.b_emergency * (c.s - veh.s);
            bool arrives_late =
                scene.time + earliest_arrival(net, veh.route, veh.s, veh.v, c.s, limits.a_max) >=
                c.t_min;
            if (!can_stop && !arrives_late) return reject(ManeuverResponse::Reason::infeasible_tmin);
        }
        if (std::isfinite(c.t_max)) {
            if (veh.s >= c.s) {
                if (c.t_max < scene.time) return reject(ManeuverResponse::Reason::infeasible_tmax);
                continue;
            }
            double arrival =
                scene.time + earliest_arrival(net, veh.route, veh.s, veh.v, c.s, limits.a_max);
            if (arrival > c.t_max) return reject(ManeuverResponse::Reason::infeasible_tmax);
        }
    }
    return resp;
}

bool handle_response(PlannerMemory& memory, const ManeuverResponse& resp,
                     const ProtocolState& state) {
    if (!state.outstanding.count(resp.maneuver_id)) return false;  // stale token
    if (resp.verdict == ManeuverResponse::Verdict::accept) return false;
    memory.previous = {};
    memory.previous_prediction.reset();
    return true;
}

}  // namespace coopsim
