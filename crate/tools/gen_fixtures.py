#!/usr/bin/env python3
"""Generate the bundled demo corpus and its scripted model responses.

Writes, under crates/core/data/demo:
  cases.json            id, style, text and ground-truth record per case
  texts/<id>.txt        the description alone, one file per case
  scripted_table.json   responses keyed "<stage>:<fingerprint>"

Responses are the ground truth with a nested set of slot errors: every
stage fixes a prefix of the errors the previous stage made, so accuracy
never drops from BP to the full pipeline. The unprotected left turn gets a
BP answer that puts a broken line at an intersection.
"""
import hashlib
import json
import os
import random

ROOT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "data")
OUT = os.path.join(ROOT, "demo")

with open(os.path.join(ROOT, "repository.json")) as f:
    REPO = json.load(f)
VOCAB = {s["slot_name"]: s["vocabulary"] for s in REPO["slots"]}

SCALAR = {
    "C.type": ("climate", "weather_type"),
    "C.density": ("climate", "density"),
    "C.time": ("climate", "time_of_day"),
    "RT.topology": ("road_topology", "topology"),
    "RT.lanes": ("road_topology", "lanes"),
    "TF.road_marker": ("transportation_facilities", "road_marker"),
    "TF.traffic_sign": ("transportation_facilities", "traffic_sign"),
    "TC.type": ("temporary_changes", "change_type"),
    "TC.position_relation": ("temporary_changes", "position_relation"),
    "EV.type": ("ego_vehicle", "vehicle_type"),
    "EV.position": ("ego_vehicle", "position"),
    "EV.global_behavior": ("ego_vehicle", "global_behavior"),
}
PARTICIPANT = {
    "TP.type": "participant_type",
    "TP.position_relation": "position_relation",
    "TP.longitudinal_oracle": "longitudinal_oracle",
    "TP.lateral_oracle": "lateral_oracle",
    "TP.global_behavior": "global_behavior",
}


def tp(kind, rel, lon, lat, glob, count=1):
    return {
        "participant_type": kind,
        "position_relation": rel,
        "longitudinal_oracle": lon,
        "lateral_oracle": lat,
        "global_behavior": glob,
        "count": count,
    }


def rec(text, weather, topo, marker, sign, ego, tps, tc=("none", "none")):
    w, d, t = weather
    return {
        "climate": {"weather_type": w, "density": d, "time_of_day": t},
        "road_topology": {"topology": topo[0], "lanes": topo[1]},
        "transportation_facilities": {"road_marker": marker, "traffic_sign": sign},
        "temporary_changes": {"change_type": tc[0], "position_relation": tc[1]},
        "ego_vehicle": {"vehicle_type": ego[0], "position": ego[1], "global_behavior": ego[2]},
        "traffic_participants": tps,
        "source_text": text,
    }


SUNNY = ("sunny", "none", "daytime")
INTER = ("intersection", "two_lanes")
STRAIGHT = ("straight_road", "two_lanes")
HIGHWAY = ("highway", "three_lanes")
CURVE = ("curved_road", "two_lanes")
TJ = ("t_junction", "single_lane")
RB = ("roundabout", "single_lane")

LEFT_TURN = "Unprotected left turn for traffic vehicle"

# (id, style, text, record args)
CASES = [
    ("left_turn", "nhtsa", LEFT_TURN,
     (SUNNY, INTER, "none", "none", ("car", "right_lane", "turn_left"),
      [tp("car", "opposite", "yield", "keep_lane", "go_forward")])),
    ("lead_vehicle_decelerating", "nhtsa",
     "Lead vehicle decelerating: on a two-lane straight road under an overcast sky, the car ahead of the ego car brakes while both keep their lane.",
     (("cloudy", "medium", "daytime"), STRAIGHT, "broken_line", "none", ("car", "right_lane", "go_forward"),
      [tp("car", "front", "decelerate", "keep_lane", "go_forward")])),
    ("lead_vehicle_stopped", "nhtsa",
     "Lead vehicle stopped: at dusk a truck stands still in the ego lane of a two-lane straight road and the ego car approaches from behind.",
     (("sunny", "none", "dusk"), STRAIGHT, "broken_line", "none", ("car", "right_lane", "go_forward"),
      [tp("truck", "front", "none", "keep_lane", "stationary")])),
    ("cut_in_highway", "nhtsa",
     "Vehicle changing lanes, same direction: in light rain a car in the left lane of a three-lane highway speeds up and cuts in front of the ego car in the middle lane.",
     (("rainy", "weak", "daytime"), HIGHWAY, "broken_line", "none", ("car", "middle_lane", "go_forward"),
      [tp("car", "left", "accelerate", "cut_in", "go_forward")])),
    ("straight_crossing_paths", "nhtsa",
     "Straight crossing paths: the ego car goes straight through a four-way intersection with a stop sign while a van from the crossing road continues straight.",
     (SUNNY, INTER, "solid_line", "stop_sign", ("car", "right_lane", "go_forward"),
      [tp("van", "crossing", "cruise", "keep_lane", "go_forward")])),
    ("signalized_right_turn", "nhtsa",
     "Turning right at a signalized intersection while a cyclist rides behind the ego car in the same lane on a clear morning.",
     (("sunny", "none", "morning"), INTER, "solid_line", "traffic_light", ("car", "right_lane", "turn_right"),
      [tp("bicycle", "behind", "cruise", "keep_lane", "go_forward")])),
    ("opposite_direction_turn", "nhtsa",
     "Left turn across path from opposite direction: at a signalized crossroads at night the ego van turns left while two oncoming cars slow down and go straight.",
     (("sunny", "none", "nighttime"), INTER, "double_solid_line", "traffic_light", ("van", "right_lane", "turn_left"),
      [tp("car", "opposite", "decelerate", "keep_lane", "go_forward", 2)])),
    ("rear_end_stationary", "cncap",
     "Car-to-car rear stationary: the ego car drives straight in the right lane of a two-lane road toward a car parked in its lane.",
     (SUNNY, STRAIGHT, "broken_line", "none", ("car", "right_lane", "go_forward"),
      [tp("car", "front", "none", "none", "stationary")])),
    ("rear_end_moving", "cncap",
     "Car-to-car rear moving: the ego car closes in on a slower car travelling at constant speed in the same lane of a straight two-lane road.",
     (SUNNY, STRAIGHT, "broken_line", "none", ("car", "right_lane", "go_forward"),
      [tp("car", "front", "cruise", "keep_lane", "go_forward")])),
    ("rear_end_braking", "cncap",
     "Car-to-car rear braking: on a wet two-lane highway section in heavy rain the lead car in front of the ego car brakes hard.",
     (("rainy", "strong", "daytime"), STRAIGHT, "broken_line", "none", ("car", "right_lane", "go_forward"),
      [tp("car", "front", "decelerate", "keep_lane", "go_forward")])),
    ("pedestrian_crossing_nearside", "cncap",
     "Car-to-pedestrian nearside crossing: an adult pedestrian walks across the road from the right in front of the ego car approaching a signalized intersection.",
     (SUNNY, INTER, "solid_line", "traffic_light", ("car", "right_lane", "go_forward"),
      [tp("pedestrian", "crossing", "cruise", "none", "go_forward")])),
    ("cyclist_longitudinal", "cncap",
     "Car-to-bicyclist longitudinal: a cyclist rides ahead in the ego lane of a two-lane straight road in the same direction.",
     (SUNNY, STRAIGHT, "broken_line", "none", ("car", "right_lane", "go_forward"),
      [tp("bicycle", "front", "cruise", "keep_lane", "go_forward")])),
    ("lane_keep_solid", "cncap",
     "Lane support on a solid line: the ego car drifts toward the solid edge line of a curved two-lane road with no other traffic.",
     (SUNNY, CURVE, "solid_line", "none", ("car", "right_lane", "go_forward"), [])),
    ("motorcycle_overtake", "cncap",
     "A motorcycle approaches from behind the ego car on a straight two-lane road, changes to the left lane and overtakes.",
     (SUNNY, STRAIGHT, "broken_line", "none", ("car", "right_lane", "go_forward"),
      [tp("motorcycle", "behind", "accelerate", "overtake", "go_forward")])),
    ("cone_lane_closure", "custom",
     "Cones close the right lane of a three-lane highway on a foggy morning; the ego truck in the middle lane continues past while a car ahead keeps its lane.",
     (("foggy", "medium", "morning"), HIGHWAY, "broken_line", "none", ("truck", "middle_lane", "go_forward"),
      [tp("car", "front", "cruise", "keep_lane", "go_forward")], ("cone_barrel", "right"))),
    ("warning_sign_ahead", "custom",
     "A warning triangle stands in the ego lane of a straight two-lane road at night and the ego car changes lane to pass it.",
     (("sunny", "none", "nighttime"), STRAIGHT, "broken_line", "none", ("car", "right_lane", "change_lane"),
      [], ("warning_sign", "front"))),
    ("roundabout_follow", "custom",
     "In light snow the ego car enters a single-lane roundabout behind a car that keeps driving around it.",
     (("snowy", "weak", "daytime"), RB, "none", "none", ("car", "right_lane", "go_forward"),
      [tp("car", "front", "cruise", "keep_lane", "go_forward")])),
    ("roundabout_stop_sign", "custom",
     "The ego bus must stop at the stop sign before entering a single-lane roundabout on a cloudy evening.",
     (("cloudy", "weak", "dusk"), RB, "none", "stop_sign", ("bus", "right_lane", "go_forward"), [])),
    ("t_junction_turn_left", "custom",
     "At a T-junction the ego car turns left onto the main road while a truck ahead of it waits.",
     (SUNNY, TJ, "none", "none", ("car", "right_lane", "turn_left"),
      [tp("truck", "front", "none", "keep_lane", "stationary")])),
    ("t_junction_signal", "custom",
     "Snow falls heavily as the ego van turns right at a signal-controlled T-junction.",
     (("snowy", "strong", "daytime"), TJ, "none", "traffic_light", ("van", "right_lane", "turn_right"), [])),
    ("highway_truck_platoon", "custom",
     "On a three-lane highway at dusk, two trucks drive ahead of the ego car in its lane while a bus in the right lane speeds up.",
     (("sunny", "none", "dusk"), HIGHWAY, "broken_line", "speed_limit_sign", ("car", "middle_lane", "go_forward"),
      [tp("truck", "front", "cruise", "keep_lane", "go_forward", 2),
       tp("bus", "right", "accelerate", "keep_lane", "go_forward")])),
    ("curve_van_passes", "custom",
     "On a curved two-lane road in medium fog a van behind the ego car changes into the left lane and passes.",
     (("foggy", "medium", "daytime"), CURVE, "broken_line", "none", ("car", "right_lane", "go_forward"),
      [tp("van", "behind", "accelerate", "change_lane_left", "go_forward")])),
    ("speed_limit_straight", "custom",
     "The ego car drives along a straight two-lane road with a speed limit sign while a car in the left lane cruises beside it.",
     (SUNNY, STRAIGHT, "broken_line", "speed_limit_sign", ("car", "right_lane", "go_forward"),
      [tp("car", "left", "cruise", "keep_lane", "go_forward")])),
    ("bucket_left_highway", "custom",
     "Warning buckets sit in the left lane of a three-lane highway in light rain; the ego car drives in the middle lane behind a van that keeps its lane.",
     (("rainy", "weak", "morning"), HIGHWAY, "broken_line", "none", ("car", "middle_lane", "go_forward"),
      [tp("van", "front", "cruise", "keep_lane", "go_forward")], ("warning_bucket", "left"))),
]

# Stages in ablation order and the number of errors each one leaves behind.
ERRORS = {"BP": (4, 6), "FS": (1, 1), "CoT": (0, 1), "SAC": (1, 2), "SC": (1, 2)}


def fingerprint(text):
    norm = " ".join(text.split()).lower()
    return hashlib.sha256(norm.encode()).hexdigest()[:16]


def slots_of(truth):
    out = list(SCALAR)
    if truth["traffic_participants"]:
        out += list(PARTICIPANT)
    return out


def alternative(truth, slot, rng):
    topo = truth["road_topology"]["topology"]
    if slot in SCALAR:
        sec, field = SCALAR[slot]
        current = truth[sec][field]
    else:
        current = truth["traffic_participants"][0][PARTICIPANT[slot]]
    choices = [v for v in VOCAB[slot] if v != current]
    if slot == "TF.road_marker" and topo == "intersection":
        choices = [v for v in choices if v != "broken_line"]
    if slot == "RT.topology":
        # A broken line at an intersection would turn the slip into a refusal.
        if truth["transportation_facilities"]["road_marker"] == "broken_line":
            choices = [v for v in choices if v != "intersection"]
    return rng.choice(choices)


def corrupt(truth, slots, rng_seed):
    rep = json.loads(json.dumps(truth))
    rng = random.Random(rng_seed)
    for slot in slots:
        value = alternative(truth, slot, rng)
        if slot in SCALAR:
            sec, field = SCALAR[slot]
            rep[sec][field] = value
        else:
            rep["traffic_participants"][0][PARTICIPANT[slot]] = value
    return rep


def as_response(rep, style):
    body = json.dumps(rep, indent=2)
    if style == 0:
        return body
    if style == 1:
        return "Here is the completed scenario record.\n```json\n" + body + "\n```\n"
    return "Reasoning: the layout, signals and road users are listed above.\nFinal answer:\n" + body


def main():
    os.makedirs(os.path.join(OUT, "texts"), exist_ok=True)
    cases, table = [], {}
    for n, (cid, style, text, args) in enumerate(CASES):
        truth = rec(text, *args)
        cases.append({"id": cid, "style": style, "text": text, "truth": truth})
        with open(os.path.join(OUT, "texts", cid + ".txt"), "w") as f:
            f.write(text + "\n")

        rng = random.Random(1000 + n)
        order = slots_of(truth)
        rng.shuffle(order)
        remaining = rng.randint(*ERRORS["BP"])
        counts = {"BP": remaining}
        for stage in ("FS", "CoT", "SAC", "SC"):
            remaining = max(0, remaining - rng.randint(*ERRORS[stage]))
            counts[stage] = remaining
        answers = {s: corrupt(truth, order[: counts[s]], n * 10 + i) for i, s in enumerate(counts)}
        if cid == "left_turn":
            # The model forgets that the intersection has no lane markings.
            answers["BP"] = json.loads(json.dumps(truth))
            answers["BP"]["transportation_facilities"]["road_marker"] = "broken_line"

        fp = fingerprint(text)
        table[f"BP:{fp}"] = [as_response(answers["BP"], n % 3)]
        table[f"FS:{fp}"] = [as_response(answers["FS"], (n + 1) % 3)]
        table[f"CoT:{fp}"] = [as_response(answers["CoT"], 2)]
        # Path 0 is the single-path alignment answer. Six paths agree on the
        # voted answer and the rest each add one stray error.
        sac = [as_response(answers["SAC"], 1)]
        sac += [as_response(answers["SC"], 0)] * 6
        spare = [s for s in order if s not in order[: counts["SC"]]]
        for k in range(3):
            stray = spare[k % len(spare)]
            sac.append(as_response(corrupt(truth, order[: counts["SC"]] + [stray], 7000 + n * 10 + k), 0))
        table[f"SAC:{fp}"] = sac

    with open(os.path.join(OUT, "cases.json"), "w") as f:
        json.dump(cases, f, indent=2)
        f.write("\n")
    with open(os.path.join(OUT, "scripted_table.json"), "w") as f:
        json.dump(table, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
