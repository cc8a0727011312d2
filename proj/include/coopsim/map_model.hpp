#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "coopsim/geometry.hpp"

namespace coopsim {

/// Raised on schema violations, dangling references and invariant
/// violations while loading a map document.  The message names the
/// offending element.
class MapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ScenarioKind {
    main_road_intersection,
    right_before_left,
    roundabout,
    narrowing,
};

inline constexpr double kMaxVehicleLengthHint = 6.0;

std::string to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(const std::string& s);

struct Lane {
    std::string id;
    Polyline centerline;
    double speed_limit = 0.0;            // m/s
    std::vector<int> successors;         // lane indices
};

struct Route {
    std::string id;
    std::vector<int> lanes;              // lane indices, in driving order
    std::vector<double> lane_start_s;    // route arc length where each lane begins
    double total_length = 0.0;
    Polyline path;                       // concatenated centerline

    // max_upcoming_heading_diff sampled on a 0.5 m grid, for O(1) lookups in
    // the driver model hot path
    std::vector<double> heading_diff_grid;
    double heading_diff(double s) const {
        if (heading_diff_grid.empty()) return 0.0;
        auto i = static_cast<std::size_t>(std::max(0.0, s) * 2.0);
        return heading_diff_grid[std::min(i, heading_diff_grid.size() - 1)];
    }
};

struct ZoneApproach {
    int route = -1;
    double s_stop = 0.0;     // route arc length of the stop line
    double s_target = 0.0;   // route arc length of the target line
};

struct ConflictZone {
    std::string id;
    std::vector<ZoneApproach> approaches;
    std::vector<std::pair<int, int>> precedence;  // (winner, loser) approach indices
    // Approach pairs related by precedence are the conflicting ones; approaches
    // from the same direction (e.g. two routes sharing an entry lane) are listed
    // separately but never ordered against each other.
    std::vector<std::uint32_t> conflicts_mask;    // per approach: bit j = conflicts with j
    std::vector<std::uint32_t> yields_to_mask;    // per approach: bit j = j has priority

    bool conflicting(int a, int b) const {
        return (conflicts_mask[static_cast<std::size_t>(a)] >> b) & 1u;
    }
    bool must_yield(int a, int b) const {
        return (yields_to_mask[static_cast<std::size_t>(a)] >> b) & 1u;
    }
};

struct Entry {
    int route = -1;
    double spawn_s_min = 0.0;
    double spawn_s_max = 0.0;
};

/// A zone traversal along one route, in driving order.
struct RouteZone {
    int zone = -1;
    int approach = -1;
    double s_stop = 0.0;
    double s_target = 0.0;
};

/// Zone passage relative to a lane: some route through this lane crosses the
/// zone, with the stop/target lines at these offsets from the lane start.
/// Turn intentions are not shared, so a vehicle on the lane must be expected
/// at every such zone until its path physically diverges.
struct ZoneLaneEntry {
    int approach = -1;
    double stop_off = 0.0;
    double target_off = 0.0;
};

/// Immutable after load; safe for concurrent reads.
struct RoadNetwork {
    ScenarioKind scenario_kind = ScenarioKind::main_road_intersection;
    std::vector<Lane> lanes;
    std::vector<Route> routes;
    std::vector<ConflictZone> zones;
    std::vector<Entry> entries;

    std::unordered_map<std::string, int> lane_index;
    std::unordered_map<std::string, int> route_index;
    std::vector<std::vector<RouteZone>> route_zones;  // per route, sorted by s_stop
    std::vector<std::vector<int>> lane_routes;        // per lane: routes containing it
    std::vector<std::vector<std::vector<ZoneLaneEntry>>> zone_lane;  // [zone][lane]

    int require_route(const std::string& id) const;
    int require_lane(const std::string& id) const;

    /// Index of the lane occupied at route position s.
    int lane_at(int route, double s) const;
    /// Route arc length where `lane` starts within `route`, or <0 if absent.
    double lane_start_in_route(int route, int lane) const;
};

RoadNetwork load_network(const std::string& json_text);
RoadNetwork load_network_file(const std::string& path);

/// Among routes starting at `entry_lane`, the one traversing the most
/// conflict-zone approaches; ties go to the lexicographically smallest id.
const Route& most_conflicting_route(const RoadNetwork& net, const std::string& entry_lane);

/// Conservative continuation for a vehicle mid-route: among all routes
/// containing the lane under (route, s), the one with the most conflict-zone
/// approaches still ahead.  Returns the route index and writes the position
/// remapped onto it.
int most_conflicting_continuation(const RoadNetwork& net, int route, double s, double* s_mapped);

/// Max |heading(s') - heading(s)| for s' in [s, s+lookahead], clamped at the
/// route end, sampled every 0.5 m.
double max_upcoming_heading_diff(const RoadNetwork& net, int route, double s,
                                 double lookahead = 100.0);

/// True while the two routes still share a conflict zone with conflicting
/// approaches that neither rear bumper has cleared.
bool routes_conflict_remaining(const RoadNetwork& net, int route_a, double rear_a, int route_b,
                               double rear_b);

}  // namespace coopsim
