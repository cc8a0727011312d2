#pragma once

#include <vector>

#include "coopsim/map_model.hpp"
#include "coopsim/sim_core.hpp"

namespace coopsim {

inline constexpr double kCriticalPet = 1.0;  // s

/// One completed or open occupancy of a conflict zone during a run.
struct ZoneOccupancy {
    int vehicle_id = -1;
    int zone = -1;
    int approach = -1;
    double t_enter = 0.0;
    double t_exit = 0.0;
    bool exited = false;
};

struct PetResult {
    std::vector<double> values;
    int collisions = 0;  // overlapping occupancy from conflicting approaches
};

/// Post-encroachment times: per zone, for each consecutive pair of
/// occupancies from conflicting approaches, the gap between the first
/// vehicle's exit and the second one's entry.  Overlaps count as collisions.
PetResult compute_pet(const std::vector<ZoneOccupancy>& events, const RoadNetwork& net);

struct RunMetrics {
    double mean_wait = 0.0;          // s, time below 5 km/h averaged over vehicles
    double throughput = 0.0;         // vehicles/h
    double stop_rate = 0.0;          // fraction that fell below 1 km/h
    std::vector<double> pet_values;  // s
    double critical_pet_rate = 0.0;  // fraction of PETs below 1 s
    int collisions = 0;
    double max_cycle_ms = 0.0;
    double p97_cycle_ms = 0.0;
    bool empty_scene = false;
};

struct RunLog {
    double duration = 0.0;
    std::vector<VehicleState> final_vehicles;
    std::vector<ZoneOccupancy> zone_events;
    std::vector<double> cycle_times_s;
};

RunMetrics compute_run_metrics(const RunLog& log, const RoadNetwork& net);

/// Nearest-rank percentile of a sample (q in [0, 1]).
double percentile(std::vector<double> values, double q);

}  // namespace coopsim
