#!/usr/bin/env python3
"""Generate the bundled fixture maps under maps/.

Each map is a JSON document matching the loader schema (map_version 1):
lanes with 2D centerlines, routes as lane chains, conflict zones as
per-route [s_stop, s_target] intervals with a static precedence order,
and entry routes with spawn windows.

Zone intervals are computed by projecting the zone anchor point onto each
route's concatenated centerline, so the intervals stay consistent with the
geometry if parameters change.
"""

import json
import math
import os

HALF_CROSS = 3.0   # crossing zones extend +-3 m around the crossing point
HALF_MERGE = 1.0   # merge zones are short; car-following handles the rest
SPEED_ROAD = 50.0 / 3.6
SPEED_RING = 30.0 / 3.6


def rot(theta_deg):
    t = math.radians(theta_deg)
    c, s = math.cos(t), math.sin(t)
    return lambda p: (c * p[0] - s * p[1], s * p[0] + c * p[1])


def arc(cx, cy, r, a0_deg, a1_deg, step=0.5):
    """Sampled circular arc from a0 to a1 (degrees), direction inferred."""
    a0, a1 = math.radians(a0_deg), math.radians(a1_deg)
    length = abs(a1 - a0) * r
    n = max(2, int(math.ceil(length / step)) + 1)
    pts = []
    for i in range(n):
        a = a0 + (a1 - a0) * i / (n - 1)
        pts.append((cx + r * math.cos(a), cy + r * math.sin(a)))
    return pts


def seg_len(a, b):
    return math.hypot(b[0] - a[0], b[1] - a[1])


def polyline_length(pts):
    return sum(seg_len(pts[i], pts[i + 1]) for i in range(len(pts) - 1))


def route_polyline(lanes, lane_ids):
    pts = []
    for lid in lane_ids:
        lp = lanes[lid]
        start = 1 if pts and seg_len(pts[-1], lp[0]) < 1e-6 else 0
        pts.extend(lp[start:])
    return pts


def project_s(pts, p):
    """Arc length of the closest point on the polyline to p."""
    best_d, best_s = float("inf"), 0.0
    s_acc = 0.0
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        abx, aby = b[0] - a[0], b[1] - a[1]
        ll = abx * abx + aby * aby
        t = 0.0 if ll == 0 else max(0.0, min(1.0, ((p[0] - a[0]) * abx + (p[1] - a[1]) * aby) / ll))
        qx, qy = a[0] + t * abx, a[1] + t * aby
        d = math.hypot(p[0] - qx, p[1] - qy)
        if d < best_d:
            best_d, best_s = d, s_acc + t * math.sqrt(ll)
        s_acc += math.sqrt(ll)
    return best_s, best_d


class MapBuilder:
    def __init__(self, kind):
        self.kind = kind
        self.lanes = {}        # id -> points
        self.limits = {}       # id -> speed limit
        self.successors = {}   # id -> [ids]
        self.routes = {}       # id -> [lane ids]
        self.zones = []        # dicts
        self.entries = []

    def lane(self, lid, pts, limit):
        self.lanes[lid] = pts
        self.limits[lid] = limit
        self.successors.setdefault(lid, [])

    def route(self, rid, lane_ids):
        self.routes[rid] = lane_ids
        for a, b in zip(lane_ids, lane_ids[1:]):
            if b not in self.successors[a]:
                self.successors[a].append(b)

    def zone(self, zid, anchor, approaches, prec_pairs, half):
        """approaches: list of route ids; prec_pairs: (winner rid, loser rid)."""
        entries = []
        for rid in approaches:
            pts = route_polyline(self.lanes, self.routes[rid])
            s, d = project_s(pts, anchor)
            assert d < 0.75, f"{zid}: anchor {d:.2f} m off route {rid}"
            total = polyline_length(pts)
            entries.append({
                "route_id": rid,
                "s_stop_m": round(max(0.0, s - half), 3),
                "s_target_m": round(min(total, s + half), 3),
            })
        idx = {rid: i for i, rid in enumerate(approaches)}
        prec = [[idx[w], idx[l]] for w, l in prec_pairs]
        self.zones.append({"id": zid, "approaches": entries, "precedence": prec})

    def entry(self, rid, s_min, s_max):
        self.entries.append({"route_id": rid, "spawn_s_min_m": s_min, "spawn_s_max_m": s_max})

    def dump(self, path):
        doc = {
            "map_version": 1,
            "scenario_kind": self.kind,
            "lanes": [
                {
                    "id": lid,
                    "points": [[round(x, 4), round(y, 4)] for x, y in pts],
                    "speed_limit_mps": round(self.limits[lid], 4),
                    "successors": self.successors[lid],
                }
                for lid, pts in sorted(self.lanes.items())
            ],
            "routes": [{"id": rid, "lane_ids": ls} for rid, ls in sorted(self.routes.items())],
            "conflict_zones": self.zones,
            "entries": self.entries,
        }
        with open(path, "w") as f:
            json.dump(doc, f, indent=1)
        print(f"{path}: {len(self.lanes)} lanes, {len(self.routes)} routes, "
              f"{len(self.zones)} zones")


def four_arm(kind):
    """Shared geometry for the two four-arm intersections.

    Template arm 'W' approaches heading east on y=-1.75; the other arms are
    rotations.  Each arm has an approach lane, a straight connector, a
    right-turn connector, and an exit lane.  Right turns merge onto the exit
    lane also used by the crossing straight movement.
    """
    b = MapBuilder(kind)
    offs = 1.75
    app_len = 125.0
    box = 5.0
    arms = {"W": 0.0, "N": -90.0, "E": 180.0, "S": 90.0}
    for arm, theta in arms.items():
        R = rot(theta)
        app = [(-app_len - box, -offs), (-box, -offs)]
        stc = [(-box, -offs), (box, -offs)]
        # right turn: quarter arc, center (-box, -box), radius box-offs
        rtc = arc(-box, -box, box - offs, 90.0, 0.0)
        # outbound lane physically on this arm (carries traffic leaving here)
        out = [(-box, offs), (-app_len - box, offs)]
        b.lane(f"{arm}_app", [R(p) for p in app], SPEED_ROAD)
        b.lane(f"{arm}_str", [R(p) for p in stc], SPEED_ROAD)
        b.lane(f"{arm}_rt", [R(p) for p in rtc], SPEED_ROAD)
        b.lane(f"{arm}_out", [R(p) for p in out], SPEED_ROAD)
    # straight from X leaves through the opposite arm; right turn from X
    # leaves through the arm on X's right (W->S, N->W, E->N, S->E)
    opposite = {"W": "E", "N": "S", "E": "W", "S": "N"}
    right_of = {"W": "S", "N": "W", "E": "N", "S": "E"}
    for arm in arms:
        b.route(f"{arm}_straight", [f"{arm}_app", f"{arm}_str", f"{opposite[arm]}_out"])
        b.route(f"{arm}_right", [f"{arm}_app", f"{arm}_rt", f"{right_of[arm]}_out"])

    main = {"W", "E"}  # used only for the main-road variant

    def winner(a_r, b_r, a_arm, b_arm):
        if kind == "main_road_intersection":
            return a_r if a_arm in main else b_r
        # right-before-left: X yields to the arm on X's right
        return a_r if right_of[b_arm] == a_arm else b_r

    # crossing zones: straight x straight of adjacent arms
    cross_pts = {
        ("W", "N"): (-offs, -offs),
        ("W", "S"): (offs, -offs),
        ("E", "N"): (-offs, offs),
        ("E", "S"): (offs, offs),
    }
    for (a, c), pt in cross_pts.items():
        ra, rc = f"{a}_straight", f"{c}_straight"
        w = winner(ra, rc, a, c)
        l = rc if w == ra else ra
        b.zone(f"x_{a}{c}", pt, [ra, rc], [(w, l)], HALF_CROSS)
    # merge zones: on each outbound lane, the right-turner into that arm
    # meets the straight from the opposite arm
    for exit_arm in arms:
        turner = [x for x in arms if right_of[x] == exit_arm][0]
        straight_owner = opposite[exit_arm]
        rr, rs = f"{turner}_right", f"{straight_owner}_straight"
        anchor = b.lanes[f"{exit_arm}_out"][0]
        w = winner(rr, rs, turner, straight_owner)
        l = rs if w == rr else rr
        b.zone(f"m_{exit_arm}", anchor, [rr, rs], [(w, l)], HALF_MERGE)
    for arm in arms:
        for suffix in ("straight", "right"):
            b.entry(f"{arm}_{suffix}", 5.0, 75.0)
    return b


def roundabout():
    b = MapBuilder("roundabout")
    R_ring = 12.0
    spur = 95.0
    # connection angles per arm (ccw circulation): exit spur then entry merge
    arms = {"N": 90.0, "W": 180.0, "S": 270.0, "E": 0.0}
    exit_a = {k: (v - 20.0) % 360.0 for k, v in arms.items()}
    entry_a = {k: (v + 10.0) % 360.0 for k, v in arms.items()}

    def ring_pt(a_deg):
        t = math.radians(a_deg)
        return (R_ring * math.cos(t), R_ring * math.sin(t))

    # ring arcs between consecutive connection points (ascending angle)
    points = sorted(set(list(exit_a.values()) + list(entry_a.values())))
    ring_ids = []
    for i, a0 in enumerate(points):
        a1 = points[(i + 1) % len(points)]
        if a1 <= a0:
            a1 += 360.0
        lid = f"ring_{int(round(a0)):03d}"
        b.lane(lid, arc(0.0, 0.0, R_ring, a0, a1), SPEED_RING)
        ring_ids.append((a0, lid))

    def ring_chain(a_from, a_to):
        """Ring lane ids covering (a_from, a_to) ccw."""
        out, a = [], a_from % 360.0
        total = (a_to - a_from) % 360.0
        covered = 0.0
        while covered < total - 1e-6:
            for a0, lid in ring_ids:
                if abs(a0 - a) < 1e-6:
                    out.append(lid)
                    nxt = points[(points.index(a0) + 1) % len(points)]
                    step = (nxt - a0) % 360.0
                    covered += step
                    a = (a + step) % 360.0
                    break
            else:
                raise AssertionError(f"no ring lane at {a}")
        return out

    for arm, base in arms.items():
        # straight spurs point radially; entry curves onto the ring
        ea, xa = entry_a[arm], exit_a[arm]
        dirv = (math.cos(math.radians(base)), math.sin(math.radians(base)))
        app_out = (dirv[0] * (R_ring + spur + 8.0), dirv[1] * (R_ring + spur + 8.0))
        app_in = (dirv[0] * (R_ring + 8.0), dirv[1] * (R_ring + 8.0))
        b.lane(f"{arm}_app", [app_out, app_in], SPEED_ROAD)
        # entry connector: blend from app_in to the merge point on the ring
        mp = ring_pt(ea)
        mid = ((app_in[0] + mp[0]) * 0.55, (app_in[1] + mp[1]) * 0.55)
        b.lane(f"{arm}_in", [app_in, mid, mp], SPEED_RING)
        # exit connector and spur
        xp = ring_pt(xa)
        ex_in = (dirv[0] * (R_ring + 8.0), dirv[1] * (R_ring + 8.0))
        # offset the exit spur laterally so it does not overlap the approach
        perp = (-dirv[1], dirv[0])
        ex_in = (ex_in[0] + perp[0] * 4.0, ex_in[1] + perp[1] * 4.0)
        ex_out = (ex_in[0] + dirv[0] * spur, ex_in[1] + dirv[1] * spur)
        midx = ((xp[0] + ex_in[0]) * 0.55, (xp[1] + ex_in[1]) * 0.55)
        b.lane(f"{arm}_out", [xp, midx, ex_in], SPEED_RING)
        b.lane(f"{arm}_exit", [ex_in, ex_out], SPEED_ROAD)

    order = ["N", "W", "S", "E"]  # ccw arm order
    for arm in order:
        i = order.index(arm)
        for hops in (1, 2, 3):
            dest = order[(i + hops) % 4]
            chain = ([f"{arm}_app", f"{arm}_in"]
                     + ring_chain(entry_a[arm], exit_a[dest])
                     + [f"{dest}_out", f"{dest}_exit"])
            b.route(f"{arm}_{dest}", chain)

    # one conflict zone per entry merge point
    for arm in order:
        anchor = ring_pt(entry_a[arm])
        entering = [f"{arm}_{order[(order.index(arm)+h)%4]}" for h in (1, 2, 3)]
        circulating = []
        for src in order:
            if src == arm:
                continue
            for hops in (1, 2, 3):
                dest = order[(order.index(src) + hops) % 4]
                span = (exit_a[dest] - entry_a[src]) % 360.0
                off = (entry_a[arm] - entry_a[src]) % 360.0
                if 1e-6 < off < span - 1e-6:
                    circulating.append(f"{src}_{dest}")
        prec = [(c, e) for c in circulating for e in entering]
        b.zone(f"z_{arm}", anchor, entering + circulating, prec, HALF_MERGE)
    for arm in order:
        for hops in (1, 2, 3):
            b.entry(f"{arm}_{order[(order.index(arm)+hops)%4]}", 5.0, 55.0)
    return b


def narrowing():
    b = MapBuilder("narrowing")
    offs, taper, half_n = 1.75, 12.0, 15.0
    app = 115.0
    # eastbound (priority) route a, westbound route b
    b.lane("a_app", [(-half_n - taper - app, -offs), (-half_n - taper, -offs)], SPEED_ROAD)
    b.lane("a_in", [(-half_n - taper, -offs), (-half_n, 0.0)], SPEED_ROAD)
    b.lane("a_nar", [(-half_n, 0.0), (half_n, 0.0)], SPEED_ROAD)
    b.lane("a_out", [(half_n, 0.0), (half_n + taper, -offs)], SPEED_ROAD)
    b.lane("a_exit", [(half_n + taper, -offs), (half_n + taper + app, -offs)], SPEED_ROAD)
    b.lane("b_app", [(half_n + taper + app, offs), (half_n + taper, offs)], SPEED_ROAD)
    b.lane("b_in", [(half_n + taper, offs), (half_n, 0.0)], SPEED_ROAD)
    b.lane("b_nar", [(half_n, 0.0), (-half_n, 0.0)], SPEED_ROAD)
    b.lane("b_out", [(-half_n, 0.0), (-half_n - taper, offs)], SPEED_ROAD)
    b.lane("b_exit", [(-half_n - taper, offs), (-half_n - taper - app, offs)], SPEED_ROAD)
    b.route("a_through", ["a_app", "a_in", "a_nar", "a_out", "a_exit"])
    b.route("b_through", ["b_app", "b_in", "b_nar", "b_out", "b_exit"])
    # the whole taper-to-taper stretch is mutually exclusive
    pts_a = route_polyline(b.lanes, b.routes["a_through"])
    s_mid, _ = project_s(pts_a, (0.0, 0.0))
    half_zone = half_n + taper
    entries = []
    for rid in ("a_through", "b_through"):
        pts = route_polyline(b.lanes, b.routes[rid])
        s, d = project_s(pts, (0.0, 0.0))
        entries.append({
            "route_id": rid,
            "s_stop_m": round(s - half_zone, 3),
            "s_target_m": round(s + half_zone, 3),
        })
    b.zones.append({"id": "z_nar", "approaches": entries, "precedence": [[0, 1]]})
    b.entry("a_through", 5.0, 95.0)
    b.entry("b_through", 5.0, 95.0)
    return b


def main():
    out = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "maps")
    os.makedirs(out, exist_ok=True)
    four_arm("main_road_intersection").dump(os.path.join(out, "main_road_intersection.json"))
    four_arm("right_before_left").dump(os.path.join(out, "right_before_left.json"))
    roundabout().dump(os.path.join(out, "roundabout.json"))
    narrowing().dump(os.path.join(out, "narrowing.json"))


if __name__ == "__main__":
    main()
