#!/usr/bin/env python3
"""Generate the bundled mini-map lane graphs under crates/core/data/corpus/maps.

Geometry is authored here once; the JSON files are checked in. Right-hand
traffic, metres, radians measured counter-clockwise from +x.
"""
import json
import math
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "data", "corpus", "maps")
W = 3.5


def r(v):
    return round(v, 4)


def pt(p):
    return [r(p[0]), r(p[1])]


def line(a, b):
    return [pt(a), pt(b)]


def bezier(p0, h0, p3, h3, step=1.0):
    dist = math.hypot(p3[0] - p0[0], p3[1] - p0[1])
    k = 0.39 * dist
    p1 = (p0[0] + h0[0] * k, p0[1] + h0[1] * k)
    p2 = (p3[0] - h3[0] * k, p3[1] - h3[1] * k)
    n = max(4, int(math.ceil(dist * 1.3 / step)))
    pts = []
    for i in range(n + 1):
        t = i / n
        a = (1 - t) ** 3
        b = 3 * (1 - t) ** 2 * t
        c = 3 * (1 - t) * t ** 2
        d = t ** 3
        pts.append(pt((a * p0[0] + b * p1[0] + c * p2[0] + d * p3[0],
                       a * p0[1] + b * p1[1] + c * p2[1] + d * p3[1])))
    return pts


def arc(center, radius, a0, a1, step=1.0):
    n = max(4, int(math.ceil(abs(a1 - a0) * radius / step)))
    return [pt((center[0] + radius * math.cos(a0 + (a1 - a0) * i / n),
                center[1] + radius * math.sin(a0 + (a1 - a0) * i / n))) for i in range(n + 1)]


def lane(lane_id, points, successors=(), left=None, right=None, left_marking="solid",
         right_marking="solid", tags=()):
    return {
        "lane_id": lane_id,
        "tags": list(tags),
        "points": points,
        "successors": list(successors),
        "left": left,
        "right": right,
        "left_marking": left_marking,
        "right_marking": right_marking,
    }


def write(m):
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, m["map_id"] + ".map.json"), "w") as f:
        json.dump(m, f, indent=2)
        f.write("\n")


def straight_2lane():
    return {
        "map_id": "straight_2lane",
        "topology_tags": ["straight_road", "two_lanes"],
        "lane_width": W,
        "speed_limit": 13.889,
        "lanes": [
            lane("r1", line((0, 0), (300, 0)), left="r2", left_marking="broken", right_marking="solid"),
            lane("r2", line((0, W), (300, W)), right="r1", right_marking="broken", left_marking="double_solid"),
        ],
        "stop_lines": [],
        "signals": [],
    }


def highway_3lane():
    return {
        "map_id": "highway_3lane",
        "topology_tags": ["highway", "straight_road", "three_lanes"],
        "lane_width": W,
        "speed_limit": 27.778,
        "lanes": [
            lane("h1", line((0, 0), (600, 0)), left="h2", left_marking="broken", right_marking="solid"),
            lane("h2", line((0, W), (600, W)), left="h3", right="h1", left_marking="broken", right_marking="broken"),
            lane("h3", line((0, 2 * W), (600, 2 * W)), right="h2", right_marking="broken", left_marking="solid"),
        ],
        "stop_lines": [],
        "signals": [],
    }


def curve_2lane():
    r1 = 80.0
    r2 = r1 - W
    c = (100.0, 80.0)
    right = [pt((0, 0))] + arc(c, r1, -math.pi / 2, 0.0) + [pt((c[0] + r1, 180.0))]
    left = [pt((0, W))] + arc(c, r2, -math.pi / 2, 0.0) + [pt((c[0] + r2, 180.0))]
    return {
        "map_id": "curve_2lane",
        "topology_tags": ["curved_road", "two_lanes"],
        "lane_width": W,
        "speed_limit": 16.667,
        "lanes": [
            lane("c1", right, left="c2", left_marking="broken", right_marking="solid", tags=["curve"]),
            lane("c2", left, right="c1", right_marking="broken", left_marking="double_solid", tags=["curve"]),
        ],
        "stop_lines": [],
        "signals": [],
    }


ARM_ANGLES = {"s": -math.pi / 2, "e": 0.0, "n": math.pi / 2, "w": math.pi}


def arm_frame(theta):
    u = (math.cos(theta), math.sin(theta))
    h = (-u[0], -u[1])
    right_in = (h[1], -h[0])
    right_out = (u[1], -u[0])
    return u, h, right_in, right_out


def offset(base, v, d):
    return (base[0] + v[0] * d, base[1] + v[1] * d)


def junction(map_id, tags, arms, movements, per_direction, box, arm_len, speed_limit, signals_spec):
    lanes = []
    stop_lines = []
    offsets = [W / 2 + i * W for i in range(per_direction)]
    names = ["inner", "outer", "outer2"][:per_direction] if per_direction > 1 else ["main"]
    ends = {}
    for arm in arms:
        theta = ARM_ANGLES[arm]
        u, h, ri, ro = arm_frame(theta)
        for i, (off, nm) in enumerate(zip(offsets, names)):
            far_in = offset((u[0] * (box + arm_len), u[1] * (box + arm_len)), ri, off)
            near_in = offset((u[0] * box, u[1] * box), ri, off)
            near_out = offset((u[0] * box, u[1] * box), ro, off)
            far_out = offset((u[0] * (box + arm_len), u[1] * (box + arm_len)), ro, off)
            in_id = f"{arm}_in_{nm}"
            out_id = f"{arm}_out_{nm}"
            left_in = f"{arm}_in_{names[i - 1]}" if i > 0 else None
            right_in = f"{arm}_in_{names[i + 1]}" if i + 1 < per_direction else None
            left_out = f"{arm}_out_{names[i - 1]}" if i > 0 else None
            right_out = f"{arm}_out_{names[i + 1]}" if i + 1 < per_direction else None
            lanes.append(lane(in_id, line(far_in, near_in), left=left_in, right=right_in,
                              left_marking="broken" if left_in else "double_solid",
                              right_marking="broken" if right_in else "solid", tags=["approach"]))
            lanes.append(lane(out_id, line(near_out, far_out), left=left_out, right=right_out,
                              left_marking="broken" if left_out else "double_solid",
                              right_marking="broken" if right_out else "solid", tags=["exit"]))
            ends[in_id] = (near_in, h)
            ends[out_id] = (near_out, u)
            stop_lines.append({"id": f"sl_{in_id}", "lane_id": in_id, "s": r(arm_len - 1.0)})
    by_id = {l["lane_id"]: l for l in lanes}
    for (src, dst, kind) in movements:
        p0, h0 = ends[src]
        p3, h3 = ends[dst]
        cid = f"{src}__{dst}"
        if kind == "straight":
            pts = line(p0, p3)
        else:
            pts = bezier(p0, h0, p3, h3)
        lanes.append(lane(cid, pts, successors=[dst], left_marking="none", right_marking="none",
                          tags=["junction", kind]))
        by_id[src]["successors"].append(cid)
    signals = []
    for sig_id, arm_list, off in signals_spec:
        signals.append({
            "id": sig_id,
            "stop_lines": [s["id"] for s in stop_lines if s["lane_id"].split("_")[0] in arm_list],
            "phases": [{"state": "green", "duration": 12.0}, {"state": "yellow", "duration": 3.0},
                       {"state": "red", "duration": 17.0}],
            "offset": off,
        })
    return {
        "map_id": map_id,
        "topology_tags": tags,
        "lane_width": W,
        "speed_limit": speed_limit,
        "lanes": lanes,
        "stop_lines": stop_lines,
        "signals": signals,
    }


def intersection():
    left_of = {"s": "w", "w": "n", "n": "e", "e": "s"}
    right_of = {v: k for k, v in left_of.items()}
    opposite = {"s": "n", "n": "s", "e": "w", "w": "e"}
    moves = []
    for a in "senw":
        moves.append((f"{a}_in_inner", f"{left_of[a]}_out_inner", "left"))
        moves.append((f"{a}_in_inner", f"{opposite[a]}_out_inner", "straight"))
        moves.append((f"{a}_in_outer", f"{opposite[a]}_out_outer", "straight"))
        moves.append((f"{a}_in_outer", f"{right_of[a]}_out_outer", "right"))
    return junction("intersection_4way", ["intersection", "two_lanes"], "senw", moves, 2, 10.0, 100.0,
                    13.889, [("sig_ns", "sn", 0.0), ("sig_ew", "ew", 16.0)])


def t_junction():
    moves = [
        ("s_in_main", "w_out_main", "left"),
        ("s_in_main", "e_out_main", "right"),
        ("e_in_main", "w_out_main", "straight"),
        ("e_in_main", "s_out_main", "left"),
        ("w_in_main", "e_out_main", "straight"),
        ("w_in_main", "s_out_main", "right"),
    ]
    return junction("t_junction", ["t_junction", "single_lane"], "sew", moves, 1, 7.0, 100.0,
                    13.889, [("sig_main", "ew", 0.0), ("sig_side", "s", 16.0)])


def roundabout():
    ring_r = 25.0
    box = 35.0
    arm_len = 80.0
    delta = math.radians(20.0)
    lanes = []
    ring_pts = []
    for arm in "senw":
        theta = ARM_ANGLES[arm]
        ring_pts.append((theta - delta, "exit", arm))
        ring_pts.append((theta + delta, "entry", arm))
    ring_pts.sort(key=lambda p: (p[0] + 2 * math.pi) % (2 * math.pi))
    n = len(ring_pts)
    ring_ids = [f"ring_{k}" for k in range(n)]

    def ring_point(a):
        return (ring_r * math.cos(a), ring_r * math.sin(a))

    def ring_tangent(a):
        return (-math.sin(a), math.cos(a))

    entry_seg = {}
    exit_seg = {}
    for k in range(n):
        a0 = ring_pts[k][0]
        a1 = ring_pts[(k + 1) % n][0]
        while a1 <= a0:
            a1 += 2 * math.pi
        succ = [ring_ids[(k + 1) % n]]
        kind, arm = ring_pts[(k + 1) % n][1], ring_pts[(k + 1) % n][2]
        if kind == "exit":
            succ.append(f"ring__{arm}_out_main")
            exit_seg[arm] = ring_ids[k]
        if ring_pts[k][1] == "entry":
            entry_seg[ring_pts[k][2]] = ring_ids[k]
        lanes.append(lane(ring_ids[k], arc((0.0, 0.0), ring_r, a0, a1), successors=succ,
                          left_marking="solid", right_marking="broken", tags=["roundabout"]))
    for arm in "senw":
        theta = ARM_ANGLES[arm]
        u, h, ri, ro = arm_frame(theta)
        far_in = offset((u[0] * (box + arm_len), u[1] * (box + arm_len)), ri, W / 2)
        near_in = offset((u[0] * box, u[1] * box), ri, W / 2)
        near_out = offset((u[0] * box, u[1] * box), ro, W / 2)
        far_out = offset((u[0] * (box + arm_len), u[1] * (box + arm_len)), ro, W / 2)
        in_id = f"{arm}_in_main"
        out_id = f"{arm}_out_main"
        entry_id = f"{arm}_in_main__ring"
        exit_id = f"ring__{arm}_out_main"
        lanes.append(lane(in_id, line(far_in, near_in), successors=[entry_id], left_marking="double_solid",
                          tags=["approach"]))
        lanes.append(lane(out_id, line(near_out, far_out), left_marking="double_solid", tags=["exit"]))
        ea = theta + delta
        lanes.append(lane(entry_id, bezier(near_in, h, ring_point(ea), ring_tangent(ea)),
                          successors=[entry_seg[arm]], left_marking="none", right_marking="none",
                          tags=["junction", "roundabout_entry"]))
        xa = theta - delta
        lanes.append(lane(exit_id, bezier(ring_point(xa), ring_tangent(xa), near_out, u),
                          successors=[out_id], left_marking="none", right_marking="none",
                          tags=["junction", "roundabout_exit"]))
    stop_lines = [{"id": f"sl_{a}_in_main", "lane_id": f"{a}_in_main", "s": arm_len - 1.0} for a in "senw"]
    return {
        "map_id": "roundabout",
        "topology_tags": ["roundabout", "single_lane"],
        "lane_width": W,
        "speed_limit": 11.111,
        "lanes": lanes,
        "stop_lines": stop_lines,
        "signals": [],
    }


if __name__ == "__main__":
    for m in (straight_2lane(), highway_3lane(), curve_2lane(), intersection(), t_junction(), roundabout()):
        write(m)
        print(m["map_id"], len(m["lanes"]), "lanes")
