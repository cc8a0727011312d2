#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "coopsim/driver.hpp"
#include "coopsim/planner.hpp"

namespace coopsim {

struct ManeuverMessage {
    long cycle = 0;
    int recipient = -1;
    std::vector<Constraint> constraints;     // absolute times
    std::vector<int> non_conflicting;
    long maneuver_id = -1;
};

struct ManeuverResponse {
    enum class Verdict { accept, reject };
    enum class Reason { none, infeasible_tmin, infeasible_tmax, internal };
    long maneuver_id = -1;
    Verdict verdict = Verdict::accept;
    Reason reason = Reason::none;
};

std::string to_string(ManeuverResponse::Reason r);

/// Per-recipient monotonically increasing maneuver tokens.
struct ProtocolState {
    std::map<int, long> next_id;
    std::set<long> outstanding;  // ids issued in the current cycle
};

/// One message per CAV that has constraints or a non-empty non-conflicting
/// set, ordered by recipient id.
std::vector<ManeuverMessage> issue(const PlanResult& plan, long cycle, ProtocolState& state);

// Wire format: 4-byte big-endian length followed by a JSON document
// ("mcm_version": 1).  Serialization is byte-deterministic.
std::vector<std::uint8_t> encode_message(const ManeuverMessage& msg);
ManeuverMessage decode_message(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_response(const ManeuverResponse& resp);
ManeuverResponse decode_response(const std::vector<std::uint8_t>& bytes);

/// Kinematic viability check of a requested maneuver: every t_min must be
/// reachable by stopping short or arriving late, every t_max by driving at
/// full acceleration up to the speed limits.
ManeuverResponse cav_feasibility(const SceneState& scene, const RoadNetwork& net,
                                 const ManeuverMessage& msg, const DriverParams& limits);

/// Reject aborts the whole maneuver: the planner memory resets to the empty
/// set and all outstanding constraints are withdrawn (the caller clears agent
/// state).  Stale maneuver ids are ignored.  Returns true when an abort
/// happened.
bool handle_response(PlannerMemory& memory, const ManeuverResponse& resp,
                     const ProtocolState& state);

/// Earliest possible arrival time at waypoint_s driving at a_max, capped by
/// the lane speed limits along the route.
double earliest_arrival(const RoadNetwork& net, int route, double s, double v, double waypoint_s,
                        double a_max);

}  // namespace coopsim
