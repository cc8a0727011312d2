#include "coopsim/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace coopsim {

PetResult compute_pet(const std::vector<ZoneOccupancy>& events, const RoadNetwork& net) {
    PetResult out;
    for (std::size_t zi = 0; zi < net.zones.size(); ++zi) {
        std::vector<const ZoneOccupancy*> zone_events;
        for (const ZoneOccupancy& e : events)
            if (e.zone == static_cast<int>(zi)) zone_events.push_back(&e);
        std::sort(zone_events.begin(), zone_events.end(),
                  [](const ZoneOccupancy* a, const ZoneOccupancy* b) {
                      return a->t_enter != b->t_enter ? a->t_enter < b->t_enter
                                                      : a->vehicle_id < b->vehicle_id;
                  });
        for (std::size_t k = 0; k + 1 < zone_events.size(); ++k) {
            const ZoneOccupancy& first = *zone_events[k];
            const ZoneOccupancy& second = *zone_events[k + 1];
            if (!net.zones[zi].conflicting(first.approach, second.approach)) continue;
            if (!first.exited || second.t_enter < first.t_exit) {
                ++out.collisions;
                continue;
            }
            out.values.push_back(second.t_enter - first.t_exit);
        }
    }
    return out;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(values.size())));
    if (rank > 0) --rank;
    return values[std::min(rank, values.size() - 1)];
}

RunMetrics compute_run_metrics(const RunLog& log, const RoadNetwork& net) {
    RunMetrics m;
    if (log.final_vehicles.empty()) {
        m.empty_scene = true;
        return m;
    }
    double wait_sum = 0.0;
    int crossings = 0;
    int stopped = 0;
    for (const VehicleState& v : log.final_vehicles) {
        wait_sum += v.wait_accum;
        crossings += v.crossings;
        if (v.ever_stopped) ++stopped;
    }
    auto n = static_cast<double>(log.final_vehicles.size());
    m.mean_wait = wait_sum / n;
    m.throughput = log.duration > 0.0 ? crossings / log.duration * 3600.0 : 0.0;
    m.stop_rate = static_cast<double>(stopped) / n;

    PetResult pet = compute_pet(log.zone_events, net);
    m.pet_values = pet.values;
    m.collisions = pet.collisions;
    if (!pet.values.empty()) {
        int critical = 0;
        for (double p : pet.values)
            if (p < kCriticalPet) ++critical;
        m.critical_pet_rate = static_cast<double>(critical) / static_cast<double>(pet.values.size());
    }

    if (!log.cycle_times_s.empty()) {
        m.max_cycle_ms = *std::max_element(log.cycle_times_s.begin(), log.cycle_times_s.end()) * 1e3;
        m.p97_cycle_ms = percentile(log.cycle_times_s, 0.97) * 1e3;
    }
    return m;
}

}  // namespace coopsim
