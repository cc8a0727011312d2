#include <doctest.h>

#include "helpers.hpp"

using namespace coopsim;
using coopsim::test::fixture;
using coopsim::test::mini_crossing;
using coopsim::test::place;

namespace {

// independent O(n^2) successor scan, no sorting
PetResult pet_oracle(const std::vector<ZoneOccupancy>& events, const RoadNetwork& net) {
    PetResult out;
    auto key_less = [](const ZoneOccupancy& a, const ZoneOccupancy& b) {
        return a.t_enter != b.t_enter ? a.t_enter < b.t_enter : a.vehicle_id < b.vehicle_id;
    };
    for (std::size_t i = 0; i < events.size(); ++i) {
        const ZoneOccupancy* succ = nullptr;
        for (std::size_t j = 0; j < events.size(); ++j) {
            if (i == j || events[j].zone != events[i].zone) continue;
            if (!key_less(events[i], events[j])) continue;
            if (!succ || key_less(events[j], *succ)) succ = &events[j];
        }
        if (!succ) continue;
        if (!net.zones[static_cast<std::size_t>(events[i].zone)].conflicting(events[i].approach,
                                                                             succ->approach))
            continue;
        if (!events[i].exited || succ->t_enter < events[i].t_exit) ++out.collisions;
        else out.values.push_back(succ->t_enter - events[i].t_exit);
    }
    std::sort(out.values.begin(), out.values.end());
    return out;
}

std::vector<ZoneOccupancy> random_log(const RoadNetwork& net, Rng& rng, int n) {
    std::vector<ZoneOccupancy> events;
    for (int i = 0; i < n; ++i) {
        ZoneOccupancy e;
        e.zone = static_cast<int>(rng.next_below(net.zones.size()));
        e.approach = static_cast<int>(
            rng.next_below(net.zones[static_cast<std::size_t>(e.zone)].approaches.size()));
        e.vehicle_id = static_cast<int>(rng.next_below(10));
        e.t_enter = rng.uniform(0.0, 60.0);
        e.exited = rng.next_below(10) != 0;
        e.t_exit = e.t_enter + rng.uniform(0.1, 4.0);
        events.push_back(e);
    }
    return events;
}

}  // namespace

TEST_CASE("pet arithmetic at the critical threshold") {
    const RoadNetwork& net = mini_crossing();
    std::vector<ZoneOccupancy> events{
        {0, 0, 0, 3.0, 5.0, true},   // first vehicle, approach 0
        {1, 0, 1, 5.8, 7.0, true},   // conflicting follower enters 0.8 s later
    };
    PetResult r = compute_pet(events, net);
    REQUIRE(r.values.size() == 1);
    CHECK(r.values[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(r.values[0] < kCriticalPet);
    CHECK(r.collisions == 0);
}

TEST_CASE("same-approach followers produce no pet") {
    const RoadNetwork& net = mini_crossing();
    std::vector<ZoneOccupancy> events{
        {0, 0, 0, 3.0, 5.0, true},
        {1, 0, 0, 5.5, 7.0, true},
    };
    CHECK(compute_pet(events, net).values.empty());
}

TEST_CASE("overlapping conflicting occupancy counts as a collision") {
    const RoadNetwork& net = mini_crossing();
    std::vector<ZoneOccupancy> events{
        {0, 0, 0, 3.0, 5.0, true},
        {1, 0, 1, 4.5, 7.0, true},
    };
    PetResult r = compute_pet(events, net);
    CHECK(r.values.empty());
    CHECK(r.collisions == 1);
}

TEST_CASE("pet matches the brute-force oracle on random logs") {
    const RoadNetwork& net = fixture("roundabout");
    Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        auto events = random_log(net, rng, 2 + static_cast<int>(rng.next_below(40)));
        PetResult got = compute_pet(events, net);
        std::sort(got.values.begin(), got.values.end());
        PetResult expect = pet_oracle(events, net);
        CHECK(got.values == expect.values);
        CHECK(got.collisions == expect.collisions);
    }
}

TEST_CASE("run metrics arithmetic") {
    const RoadNetwork& net = fixture("main_road_intersection");
    RunLog log;
    log.duration = 60.0;
    SceneState scene;
    for (int i = 0; i < 5; ++i) {
        VehicleState& veh =
            place(net, scene, i, VehicleKind::HDV, "W_straight", 10.0 + 20.0 * i, 10.0);
        veh.crossings = 2;  // 10 crossings in 60 s -> 600 per hour
        veh.wait_accum = 0.0;
        veh.ever_stopped = i == 0;
    }
    log.final_vehicles = scene.vehicles;
    RunMetrics m = compute_run_metrics(log, net);
    CHECK(m.mean_wait == 0.0);
    CHECK(m.throughput == doctest::Approx(600.0).epsilon(1e-12));
    CHECK(m.stop_rate == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(m.critical_pet_rate == 0.0);
    CHECK_FALSE(m.empty_scene);

    // idempotent
    RunMetrics again = compute_run_metrics(log, net);
    CHECK(again.mean_wait == m.mean_wait);
    CHECK(again.throughput == m.throughput);

    RunLog empty;
    empty.duration = 60.0;
    CHECK(compute_run_metrics(empty, net).empty_scene);
}

TEST_CASE("cycle-time percentiles use the nearest rank") {
    std::vector<double> times;
    for (int i = 1; i <= 100; ++i) times.push_back(static_cast<double>(i));
    CHECK(percentile(times, 0.97) == doctest::Approx(97.0));
    CHECK(percentile({5.0}, 0.97) == doctest::Approx(5.0));
    CHECK(percentile({}, 0.97) == 0.0);
}
