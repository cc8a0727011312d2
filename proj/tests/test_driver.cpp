#include <doctest.h>

#include <cmath>

#include "helpers.hpp"

using namespace coopsim;
using coopsim::test::fixture;
using coopsim::test::place;

namespace {

// independent textbook IDM evaluation, kept free of the production code path
double idm_reference(double v, double v0, double gap, double dv, const DriverParams& p) {
    double s_star = p.s0 + v * p.headway_T + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf));
    double a = p.a_max * (1.0 - std::pow(v / v0, p.delta_exp) - std::pow(s_star / gap, 2.0));
    return std::max(-p.b_emergency, std::min(a, p.a_max));
}

}  // namespace

TEST_CASE("gap acceptance: no conflicting vehicle always accepts") {
    DriverParams p;
    CHECK(gap_accept({15.0, 5.0, kInf, 0.0}, p));
}

TEST_CASE("gap acceptance arithmetic") {
    DriverParams p;  // tau_gap = 1.5
    // ETAs 3.0 vs 10.0
    CHECK(gap_accept({15.0, 5.0, 100.0, 10.0}, p));
    // 3.0 + 1.5 > 3.0: reject
    CHECK_FALSE(gap_accept({15.0, 5.0, 30.0, 10.0}, p));
    // stopped observer uses the 0.5 m/s floor, stopped opponent the 0.1 m/s floor
    CHECK(gap_accept({1.0, 0.0, 100.0, 0.0}, p));  // 1000 s vs 2 s + 1.5 s
}

TEST_CASE("gap acceptance is monotone in the opponent's distance") {
    DriverParams p;
    Rng rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        GapObservation g;
        g.d_targ = rng.uniform(1.0, 60.0);
        g.v = rng.uniform(0.0, 14.0);
        g.v_other = rng.uniform(0.0, 14.0);
        g.d_stop_other = rng.uniform(0.0, 150.0);
        bool before = gap_accept(g, p);
        g.d_stop_other += rng.uniform(0.0, 100.0);
        if (before) CHECK(gap_accept(g, p));
    }
}

TEST_CASE("idm: equilibrium at desired speed on a free road") {
    DriverParams p;
    EnvObservation obs;
    obs.v = 13.89;
    obs.v_max = 13.89;
    CHECK(std::fabs(idm_accel(obs, kInf, p)) < 0.05);
}

TEST_CASE("idm: standing at the stop line holds position") {
    DriverParams p;
    EnvObservation obs;
    obs.v = 0.0;
    obs.v_max = 13.89;
    CHECK(idm_accel(obs, p.s0, p) <= 0.0);
}

TEST_CASE("idm matches the reference formula with a lead vehicle") {
    DriverParams p;
    EnvObservation obs;
    obs.v = 10.0;
    obs.v_max = 13.89;
    obs.v_lead = 10.0;
    obs.d_lead = 20.0 + kVehicleLength;  // bumper gap of 20 m
    double got = idm_accel(obs, kInf, p);
    CHECK(got == doctest::Approx(idm_reference(10.0, 13.89, 20.0, 0.0, p)).epsilon(1e-12));

    obs.v_lead = 6.0;  // closing
    got = idm_accel(obs, kInf, p);
    CHECK(got == doctest::Approx(idm_reference(10.0, 13.89, 20.0, 4.0, p)).epsilon(1e-12));
}

TEST_CASE("idm output is always within the comfort envelope") {
    DriverParams p;
    Rng rng(5);
    for (int trial = 0; trial < 2000; ++trial) {
        EnvObservation obs;
        obs.v = rng.uniform(0.0, 20.0);
        obs.v_max = rng.uniform(5.0, 20.0);
        obs.delta_psi_max = rng.uniform(0.0, 3.14);
        obs.d_lead = rng.next_below(3) == 0 ? kInf : rng.uniform(0.0, 80.0);
        obs.v_lead = rng.uniform(0.0, 20.0);
        double yield_point = rng.next_below(3) == 0 ? kInf : rng.uniform(0.0, 80.0);
        double a = idm_accel(obs, yield_point, p);
        CHECK(a >= -p.b_emergency - 1e-12);
        CHECK(a <= p.a_max + 1e-12);
    }
}

TEST_CASE("curvature cap slows turning vehicles") {
    const RoadNetwork& net = fixture("main_road_intersection");
    SceneState scene;
    // just before the right turn, at the straight-route equilibrium speed
    place(net, scene, 0, VehicleKind::HDV, "W_right", 100.0, 13.89);
    double a_turn = hdv_policy(scene, net, 0, nullptr, DriverParams{});
    SceneState scene2;
    place(net, scene2, 0, VehicleKind::HDV, "W_straight", 100.0, 13.89);
    double a_str = hdv_policy(scene2, net, 0, nullptr, DriverParams{});
    CHECK(a_turn < a_str - 0.5);  // braking for the corner
}

TEST_CASE("hdv policy: free road reduces to plain idm") {
    const RoadNetwork& net = fixture("main_road_intersection");
    SceneState scene;
    place(net, scene, 0, VehicleKind::HDV, "W_straight", 20.0, 10.0);
    double a = hdv_policy(scene, net, 0, nullptr, DriverParams{});
    int route = net.require_route("W_straight");
    EnvObservation obs;
    obs.v = 10.0;
    obs.v_max = net.lanes[static_cast<std::size_t>(net.lane_at(route, 20.0))].speed_limit;
    obs.d_stop = net.route_zones[static_cast<std::size_t>(route)][0].s_stop - 20.0;
    CHECK(a == doctest::Approx(idm_accel(obs, kInf, DriverParams{})).epsilon(1e-9));
    CHECK_THROWS((void)hdv_policy(scene, net, 9, nullptr, DriverParams{}));
}

TEST_CASE("hdv policy: minor road yields to approaching major traffic") {
    const RoadNetwork& net = fixture("main_road_intersection");
    SceneState scene;
    // minor vehicle nearing its stop line (zone x_WN at ~125.25 on N_straight... use N route)
    place(net, scene, 0, VehicleKind::HDV, "N_straight", 115.0, 8.0);
    place(net, scene, 1, VehicleKind::HDV, "W_straight", 95.0, 13.0);  // major, ~30 m out
    double a = hdv_policy(scene, net, 0, nullptr, DriverParams{});
    CHECK(a < -0.5);  // braking toward the stop line

    // with priority override <minor, major> the minor vehicle proceeds
    PrioritySet forced;
    forced.add(0, 1);
    double a_forced = hdv_policy(scene, net, 0, &forced, DriverParams{});
    CHECK(a_forced > a + 0.5);

    // and the reverse pair forces the major vehicle to yield
    PrioritySet reversed;
    reversed.add(0, 1);
    double a_major = hdv_policy(scene, net, 1, &reversed, DriverParams{});
    CHECK(a_major < -0.5);
}

TEST_CASE("override dominance: a prioritized vehicle never yields to its partner") {
    const RoadNetwork& net = fixture("main_road_intersection");
    Rng rng(23);
    PrioritySet forced;
    forced.add(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        SceneState scene;
        place(net, scene, 0, VehicleKind::CAV, "N_straight", rng.uniform(40.0, 122.0),
              rng.uniform(0.0, 12.0));
        place(net, scene, 1, VehicleKind::CAV, "W_straight", rng.uniform(40.0, 122.0),
              rng.uniform(0.0, 12.0));
        SceneState solo;
        place(net, solo, 0, VehicleKind::CAV, "N_straight", scene.vehicles[0].s,
              scene.vehicles[0].v);
        double with_partner = hdv_policy(scene, net, 0, &forced, DriverParams{});
        double alone = hdv_policy(solo, net, 0, nullptr, DriverParams{});
        CHECK(with_partner == doctest::Approx(alone).epsilon(1e-9));
    }
}

TEST_CASE("closed loop: a vehicle held at the stop line never crosses it") {
    const RoadNetwork& net = coopsim::test::mini_crossing();
    SceneState scene;
    double s_stop = 47.0;
    place(net, scene, 0, VehicleKind::HDV, "r_ns", s_stop - DriverParams{}.s0, 0.0);
    // a stopped opponent parked inside the zone forces a permanent yield
    place(net, scene, 1, VehicleKind::HDV, "r_ew", 48.0, 0.0);
    for (int k = 0; k < 600; ++k) {
        double a0 = hdv_policy(scene, net, 0, nullptr, DriverParams{});
        scene = step(scene, {{0, a0}, {1, 0.0}}, kDtSim);
        CHECK(scene.vehicles[0].s <= s_stop + 1e-9);
    }
}
