#include "coopsim/map_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace coopsim {

using nlohmann::json;

std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::main_road_intersection: return "main_road_intersection";
        case ScenarioKind::right_before_left: return "right_before_left";
        case ScenarioKind::roundabout: return "roundabout";
        case ScenarioKind::narrowing: return "narrowing";
    }
    return "?";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
    if (s == "main_road_intersection") return ScenarioKind::main_road_intersection;
    if (s == "right_before_left") return ScenarioKind::right_before_left;
    if (s == "roundabout") return ScenarioKind::roundabout;
    if (s == "narrowing") return ScenarioKind::narrowing;
    throw MapError("scenario_kind: unknown value '" + s + "'");
}

int RoadNetwork::require_route(const std::string& id) const {
    auto it = route_index.find(id);
    if (it == route_index.end()) throw MapError("unknown route '" + id + "'");
    return it->second;
}

int RoadNetwork::require_lane(const std::string& id) const {
    auto it = lane_index.find(id);
    if (it == lane_index.end()) throw MapError("unknown lane '" + id + "'");
    return it->second;
}

int RoadNetwork::lane_at(int route, double s) const {
    const Route& r = routes[static_cast<std::size_t>(route)];
    // lanes are half-open [start, next start); the last lane is closed
    std::size_t i = 0;
    while (i + 1 < r.lanes.size() && s >= r.lane_start_s[i + 1]) ++i;
    return r.lanes[i];
}

double RoadNetwork::lane_start_in_route(int route, int lane) const {
    const Route& r = routes[static_cast<std::size_t>(route)];
    for (std::size_t i = 0; i < r.lanes.size(); ++i)
        if (r.lanes[i] == lane) return r.lane_start_s[i];
    return -1.0;
}

namespace {

double num(const json& j, const std::string& path) {
    if (!j.is_number()) throw MapError(path + ": expected a number");
    return j.get<double>();
}

const json& field(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw MapError(path + ": missing key '" + key + "'");
    return *it;
}

}  // namespace

RoadNetwork load_network(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw MapError(std::string("map document is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw MapError("map document: expected an object");
    if (field(doc, "map_version", "map").get<int>() != 1)
        throw MapError("map_version: only version 1 is supported");

    RoadNetwork net;
    net.scenario_kind =
        scenario_kind_from_string(field(doc, "scenario_kind", "map").get<std::string>());

    const json& jlanes = field(doc, "lanes", "map");
    std::vector<std::vector<std::string>> succ_ids;
    for (std::size_t i = 0; i < jlanes.size(); ++i) {
        const json& jl = jlanes[i];
        std::string path = "lanes[" + std::to_string(i) + "]";
        Lane lane;
        lane.id = field(jl, "id", path).get<std::string>();
        path = "lanes['" + lane.id + "']";
        if (net.lane_index.count(lane.id)) throw MapError(path + ": duplicate lane id");
        const json& jp = field(jl, "points", path);
        if (jp.size() < 2) throw MapError(path + ".points: polyline needs at least 2 points");
        std::vector<Vec2> pts;
        for (const auto& p : jp) pts.push_back({num(p[0], path), num(p[1], path)});
        for (std::size_t k = 1; k < pts.size(); ++k)
            if (dist(pts[k - 1], pts[k]) < 1e-9)
                throw MapError(path + ".points[" + std::to_string(k) + "]: degenerate polyline "
                               "(consecutive points coincide)");
        lane.centerline = Polyline(std::move(pts));
        lane.speed_limit = num(field(jl, "speed_limit_mps", path), path + ".speed_limit_mps");
        if (lane.speed_limit <= 0.0)
            throw MapError(path + ".speed_limit_mps: must be > 0");
        std::vector<std::string> succ;
        for (const auto& s : field(jl, "successors", path)) succ.push_back(s.get<std::string>());
        succ_ids.push_back(std::move(succ));
        net.lane_index[lane.id] = static_cast<int>(net.lanes.size());
        net.lanes.push_back(std::move(lane));
    }
    for (std::size_t i = 0; i < net.lanes.size(); ++i) {
        for (const std::string& sid : succ_ids[i]) {
            auto it = net.lane_index.find(sid);
            if (it == net.lane_index.end())
                throw MapError("lanes['" + net.lanes[i].id + "'].successors: dangling lane id '" +
                               sid + "'");
            net.lanes[i].successors.push_back(it->second);
        }
    }

    for (const json& jr : field(doc, "routes", "map")) {
        Route r;
        r.id = field(jr, "id", "routes").get<std::string>();
        std::string path = "routes['" + r.id + "']";
        if (net.route_index.count(r.id)) throw MapError(path + ": duplicate route id");
        std::vector<Vec2> pts;
        double s_acc = 0.0;
        for (const auto& jid : field(jr, "lane_ids", path)) {
            std::string lid = jid.get<std::string>();
            auto it = net.lane_index.find(lid);
            if (it == net.lane_index.end())
                throw MapError(path + ".lane_ids: dangling lane id '" + lid + "'");
            int li = it->second;
            if (!r.lanes.empty()) {
                const Lane& prev = net.lanes[static_cast<std::size_t>(r.lanes.back())];
                if (std::find(prev.successors.begin(), prev.successors.end(), li) ==
                    prev.successors.end())
                    throw MapError(path + ": lane '" + lid + "' is not a successor of '" +
                                   prev.id + "'");
                if (dist(prev.centerline.points().back(),
                         net.lanes[static_cast<std::size_t>(li)].centerline.points().front()) > 0.5)
                    throw MapError(path + ": lane '" + lid + "' is not geometrically connected");
            }
            r.lanes.push_back(li);
            r.lane_start_s.push_back(s_acc);
            const auto& lane_pts = net.lanes[static_cast<std::size_t>(li)].centerline.points();
            std::size_t start =
                (!pts.empty() && dist(pts.back(), lane_pts.front()) < 1e-9) ? 1 : 0;
            pts.insert(pts.end(), lane_pts.begin() + static_cast<std::ptrdiff_t>(start),
                       lane_pts.end());
            s_acc += net.lanes[static_cast<std::size_t>(li)].centerline.length();
        }
        if (r.lanes.empty()) throw MapError(path + ": route has no lanes");
        r.total_length = s_acc;
        r.path = Polyline(std::move(pts));
        net.route_index[r.id] = static_cast<int>(net.routes.size());
        net.routes.push_back(std::move(r));
    }

    net.route_zones.assign(net.routes.size(), {});
    for (const json& jz : field(doc, "conflict_zones", "map")) {
        ConflictZone z;
        z.id = field(jz, "id", "conflict_zones").get<std::string>();
        std::string path = "conflict_zones['" + z.id + "']";
        const json& japp = field(jz, "approaches", path);
        if (japp.size() < 2) throw MapError(path + ": needs at least 2 approaches");
        if (japp.size() > 32) throw MapError(path + ": more than 32 approaches unsupported");
        for (const json& ja : japp) {
            ZoneApproach a;
            std::string rid = field(ja, "route_id", path).get<std::string>();
            auto it = net.route_index.find(rid);
            if (it == net.route_index.end())
                throw MapError(path + ".approaches: dangling route id '" + rid + "'");
            a.route = it->second;
            for (const ZoneApproach& other : z.approaches)
                if (other.route == a.route)
                    throw MapError(path + ": route '" + rid + "' appears in two approaches");
            a.s_stop = num(field(ja, "s_stop_m", path), path + ".s_stop_m");
            a.s_target = num(field(ja, "s_target_m", path), path + ".s_target_m");
            double len = net.routes[static_cast<std::size_t>(a.route)].total_length;
            if (!(0.0 <= a.s_stop && a.s_stop < a.s_target && a.s_target <= len + 1e-6))
                throw MapError(path + ".approaches['" + rid +
                               "']: requires 0 <= s_stop < s_target <= route length");
            z.approaches.push_back(a);
        }
        std::size_t n = z.approaches.size();
        z.conflicts_mask.assign(n, 0);
        z.yields_to_mask.assign(n, 0);
        for (const json& jp : field(jz, "precedence", path)) {
            int w = jp[0].get<int>();
            int l = jp[1].get<int>();
            if (w < 0 || l < 0 || w >= static_cast<int>(n) || l >= static_cast<int>(n))
                throw MapError(path + ".precedence: approach index out of range");
            if (w == l) throw MapError(path + ".precedence: must be irreflexive");
            z.precedence.emplace_back(w, l);
            z.conflicts_mask[static_cast<std::size_t>(w)] |= 1u << l;
            z.conflicts_mask[static_cast<std::size_t>(l)] |= 1u << w;
            z.yields_to_mask[static_cast<std::size_t>(l)] |= 1u << w;
        }
        int zi = static_cast<int>(net.zones.size());
        for (std::size_t ai = 0; ai < n; ++ai) {
            const ZoneApproach& a = z.approaches[ai];
            net.route_zones[static_cast<std::size_t>(a.route)].push_back(
                {zi, static_cast<int>(ai), a.s_stop, a.s_target});
        }
        net.zones.push_back(std::move(z));
    }
    for (auto& rz : net.route_zones)
        std::sort(rz.begin(), rz.end(),
                  [](const RouteZone& a, const RouteZone& b) { return a.s_stop < b.s_stop; });

    for (const json& je : field(doc, "entries", "map")) {
        Entry e;
        std::string rid = field(je, "route_id", "entries").get<std::string>();
        auto it = net.route_index.find(rid);
        if (it == net.route_index.end())
            throw MapError("entries: dangling route id '" + rid + "'");
        e.route = it->second;
        e.spawn_s_min = num(field(je, "spawn_s_min_m", "entries"), "entries.spawn_s_min_m");
        e.spawn_s_max = num(field(je, "spawn_s_max_m", "entries"), "entries.spawn_s_max_m");
        double len = net.routes[static_cast<std::size_t>(e.route)].total_length;
        if (!(0.0 <= e.spawn_s_min && e.spawn_s_min <= e.spawn_s_max && e.spawn_s_max <= len))
            throw MapError("entries['" + rid + "']: invalid spawn window");
        net.entries.push_back(e);
    }

    net.lane_routes.assign(net.lanes.size(), {});
    for (std::size_t ri = 0; ri < net.routes.size(); ++ri)
        for (int li : net.routes[ri].lanes)
            net.lane_routes[static_cast<std::size_t>(li)].push_back(static_cast<int>(ri));

    net.zone_lane.assign(net.zones.size(), {});
    for (auto& per_lane : net.zone_lane) per_lane.assign(net.lanes.size(), {});
    for (std::size_t ri = 0; ri < net.routes.size(); ++ri) {
        const Route& r = net.routes[ri];
        for (const RouteZone& rz : net.route_zones[ri]) {
            for (std::size_t li = 0; li < r.lanes.size(); ++li) {
                double stop_off = rz.s_stop - r.lane_start_s[li];
                double target_off = rz.s_target - r.lane_start_s[li];
                if (target_off < -2.0 * kMaxVehicleLengthHint) continue;  // lane lies past it
                auto& entries = net.zone_lane[static_cast<std::size_t>(rz.zone)]
                                            [static_cast<std::size_t>(r.lanes[li])];
                bool dup = false;
                for (const ZoneLaneEntry& e : entries)
                    if (e.approach == rz.approach && std::abs(e.stop_off - stop_off) < 1e-9 &&
                        std::abs(e.target_off - target_off) < 1e-9)
                        dup = true;
                if (!dup) entries.push_back({rz.approach, stop_off, target_off});
            }
        }
    }

    for (std::size_t ri = 0; ri < net.routes.size(); ++ri) {
        Route& r = net.routes[ri];
        auto n_grid = static_cast<std::size_t>(r.total_length * 2.0) + 1;
        r.heading_diff_grid.resize(n_grid);
        for (std::size_t g = 0; g < n_grid; ++g)
            r.heading_diff_grid[g] =
                max_upcoming_heading_diff(net, static_cast<int>(ri), 0.5 * static_cast<double>(g));
    }

    return net;
}

RoadNetwork load_network_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw MapError("cannot open map file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return load_network(ss.str());
}

const Route& most_conflicting_route(const RoadNetwork& net, const std::string& entry_lane) {
    int lane = net.require_lane(entry_lane);
    const Route* best = nullptr;
    std::size_t best_count = 0;
    for (const Route& r : net.routes) {
        if (r.lanes.empty() || r.lanes.front() != lane) continue;
        std::size_t count =
            net.route_zones[static_cast<std::size_t>(&r - net.routes.data())].size();
        if (!best || count > best_count || (count == best_count && r.id < best->id)) {
            best = &r;
            best_count = count;
        }
    }
    if (!best) throw MapError("lane '" + entry_lane + "' is not the first lane of any route");
    return *best;
}

int most_conflicting_continuation(const RoadNetwork& net, int route, double s, double* s_mapped) {
    int lane = net.lane_at(route, s);
    double in_lane = s - net.lane_start_in_route(route, lane);
    int best = route;
    double best_s = s;
    std::size_t best_count = 0;
    bool first = true;
    for (int cand : net.lane_routes[static_cast<std::size_t>(lane)]) {
        double cs = net.lane_start_in_route(cand, lane) + in_lane;
        std::size_t count = 0;
        for (const RouteZone& rz : net.route_zones[static_cast<std::size_t>(cand)])
            if (rz.s_target > cs) ++count;
        const std::string& cid = net.routes[static_cast<std::size_t>(cand)].id;
        const std::string& bid = net.routes[static_cast<std::size_t>(best)].id;
        if (first || count > best_count || (count == best_count && cid < bid)) {
            best = cand;
            best_s = cs;
            best_count = count;
            first = false;
        }
    }
    if (s_mapped) *s_mapped = best_s;
    return best;
}

bool routes_conflict_remaining(const RoadNetwork& net, int route_a, double rear_a, int route_b,
                               double rear_b) {
    for (const RouteZone& ra : net.route_zones[static_cast<std::size_t>(route_a)]) {
        if (rear_a > ra.s_target) continue;
        for (const RouteZone& rb : net.route_zones[static_cast<std::size_t>(route_b)]) {
            if (rb.zone != ra.zone || rear_b > rb.s_target) continue;
            if (net.zones[static_cast<std::size_t>(ra.zone)].conflicting(ra.approach, rb.approach))
                return true;
        }
    }
    return false;
}

double max_upcoming_heading_diff(const RoadNetwork& net, int route, double s, double lookahead) {
    const Polyline& path = net.routes[static_cast<std::size_t>(route)].path;
    double h0 = path.heading_at(s);
    double end = std::min(s + lookahead, path.length());
    double best = 0.0;
    constexpr double kStep = 0.5;
    for (double sp = s;; sp += kStep) {
        bool last = sp >= end;
        double d = std::fabs(wrap_angle(path.heading_at(last ? end : sp) - h0));
        if (d > best) best = d;
        if (last) break;
    }
    return best;
}

}  // namespace coopsim
