//! Hand-built plans with scripted ego traces that trigger, or narrowly
//! avoid, each monitor. Used by the unit tests, the acceptance suite and
//! the benches.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::*;
use crate::corpus::{DslCorpus, WaypointRef};

/// One scripted run and the event counts it must produce.
#[derive(Debug, Clone)]
pub struct MonitorCase<'m> {
    pub name: &'static str,
    pub monitor: MonitorId,
    /// Whether the trace is meant to trip `monitor`.
    pub positive: bool,
    pub plan: ScenarioPlan<'m>,
    pub spec: MonitorSpec,
    pub trace: Vec<TraceSample>,
    /// Non-zero counts per metric id.
    pub expected: BTreeMap<String, u32>,
}

impl MonitorCase<'_> {
    pub fn run(&self) -> EvaluationReport {
        run(
            &self.plan,
            &self.spec,
            &EgoPolicy::Scripted {
                trace: self.trace.clone(),
            },
        )
        .expect("fixture specs are valid")
    }
}

/// Non-zero counts of a report, for comparison with [`MonitorCase::expected`].
pub fn nonzero_counts(report: &EvaluationReport) -> BTreeMap<String, u32> {
    report
        .counts
        .iter()
        .filter(|(_, v)| **v > 0)
        .map(|(k, v)| (k.clone(), *v))
        .collect()
}

pub fn wp(lane: &str, s: f64) -> WaypointRef {
    WaypointRef {
        lane_id: lane.into(),
        s,
    }
}

pub fn car(id: &str, spawn: WaypointRef, speed: f64, route: &[&str], end: Option<WaypointRef>) -> PlannedActor {
    PlannedActor {
        id: id.into(),
        kind: ActorKind::Vehicle { category: "car".into() },
        length: 4.5,
        width: 1.9,
        spawn,
        speed,
        route: route.iter().map(|s| s.to_string()).collect(),
        route_end: end,
        events: Vec::new(),
    }
}

/// A plan on a bundled map with the map's speed limit and no overrides.
pub fn plan<'m>(corpus: &'m DslCorpus, map: &str, actors: Vec<PlannedActor>) -> ScenarioPlan<'m> {
    let map = &corpus.maps[map];
    ScenarioPlan {
        map,
        road_marker: None,
        traffic_sign: None,
        speed_limit: map.speed_limit,
        actors,
        monitors: Vec::new(),
    }
}

/// Samples a position-over-time path every step up to `t_end`. Speed and
/// heading come from a central difference.
pub fn trace(t_end: f64, f: impl Fn(f64) -> (f64, f64)) -> Vec<TraceSample> {
    let n = (t_end / DT).round() as usize;
    let mut out: Vec<TraceSample> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = i as f64 * DT;
        let (x, y) = f(t);
        let (t0, t1) = ((t - 1e-3).max(0.0), t + 1e-3);
        let ((xa, ya), (xb, yb)) = (f(t0), f(t1));
        let (vx, vy) = ((xb - xa) / (t1 - t0), (yb - ya) / (t1 - t0));
        let speed = vx.hypot(vy);
        let heading = if speed > 1e-9 {
            vy.atan2(vx)
        } else {
            out.last().map_or(0.0, |s| s.heading)
        };
        out.push(TraceSample {
            t,
            x,
            y,
            heading,
            speed,
        });
    }
    out
}

/// Cosine-eased lateral move from `from` to `to` starting at `t0`.
pub fn ease(t: f64, t0: f64, dur: f64, from: f64, to: f64) -> f64 {
    let u = ((t - t0) / dur).clamp(0.0, 1.0);
    from + (to - from) * (0.5 - 0.5 * (PI * u).cos())
}

/// Out to the left lane at `t0` and back `hold` seconds later.
fn out_and_back(t: f64, t0: f64, hold: f64, depth: f64) -> f64 {
    if t < t0 + hold {
        ease(t, t0, 2.0, 0.0, depth)
    } else {
        ease(t, t0 + hold, 2.0, depth, 0.0)
    }
}

fn counts(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn straight_ego() -> PlannedActor {
    car("ego", wp("r1", 30.0), 0.0, &["r1"], Some(wp("r1", 300.0)))
}

/// Northbound through the four-way intersection; the stop line is at
/// y = -11 and the north-south signal is red from t = 15 s.
fn north_ego() -> PlannedActor {
    car(
        "ego",
        wp("s_in_inner", 30.0),
        0.0,
        &["s_in_inner", "s_in_inner__n_out_inner", "n_out_inner"],
        Some(wp("n_out_inner", 100.0)),
    )
}

/// A positive and a negative case for every monitor.
pub fn monitor_cases(corpus: &DslCorpus) -> Vec<MonitorCase<'_>> {
    let mut cases = Vec::new();
    let mut add = |name, monitor, positive, plan, timeout: f64, trace, expected: &[(&str, u32)]| {
        cases.push(MonitorCase {
            name,
            monitor,
            positive,
            plan,
            spec: MonitorSpec::all(timeout),
            trace,
            expected: counts(expected),
        })
    };
    let straight = || plan(corpus, "straight_2lane", vec![straight_ego()]);

    add(
        "speeding",
        MonitorId::SpeedLimit,
        true,
        straight(),
        100.0,
        trace(20.0, |t| (30.0 + 15.0 * t, 0.0)),
        &[("RSL", 1)],
    );
    add(
        "just_under_limit",
        MonitorId::SpeedLimit,
        false,
        straight(),
        100.0,
        trace(20.0, |t| (30.0 + 14.0 * t, 0.0)),
        &[],
    );

    let pass = |t: f64| (30.0 + 10.0 * t, out_and_back(t, 5.0, 10.0, 3.5));
    let mut solid = straight();
    solid.road_marker = Some("solid_line".into());
    add(
        "lane_change_over_solid",
        MonitorId::SolidLine,
        true,
        solid,
        100.0,
        trace(30.0, pass),
        &[("CSL", 2)],
    );
    add(
        "lane_change_over_broken",
        MonitorId::SolidLine,
        false,
        straight(),
        100.0,
        trace(30.0, pass),
        &[],
    );

    // Drift right of the outer lane and return.
    let drift = |depth: f64| move |t: f64| (30.0 + 10.0 * t, out_and_back(t, 5.0, 7.0, -depth));
    add(
        "edge_drift",
        MonitorId::LaneInvasion,
        true,
        straight(),
        100.0,
        trace(30.0, drift(2.5)),
        &[("LI", 1)],
    );
    add(
        "lane_change_is_not_invasion",
        MonitorId::LaneInvasion,
        false,
        straight(),
        100.0,
        trace(30.0, pass),
        &[],
    );
    add(
        "leaves_the_road",
        MonitorId::OffRoad,
        true,
        straight(),
        100.0,
        trace(30.0, drift(5.0)),
        &[("LI", 1), ("OR", 1)],
    );
    add(
        "edge_drift_stays_on_road",
        MonitorId::OffRoad,
        false,
        straight(),
        100.0,
        trace(30.0, drift(2.5)),
        &[("LI", 1)],
    );

    let backwards = || {
        let ego = car("ego", wp("r1", 30.0), 0.0, &["r1"], Some(wp("r1", 0.0)));
        plan(corpus, "straight_2lane", vec![ego])
    };
    add(
        "reversing_down_the_lane",
        MonitorId::WrongDirection,
        true,
        backwards(),
        100.0,
        trace(10.0, |t| (30.0 - 5.0 * t, 0.0)),
        &[("WD", 1)],
    );
    add(
        "brief_back_up",
        MonitorId::WrongDirection,
        false,
        backwards(),
        20.0,
        trace(10.0, |t| (30.0 - 5.0 * t.min(0.8), 0.0)),
        &[("TO", 1)],
    );

    let north = || plan(corpus, "intersection_4way", vec![north_ego()]);
    add(
        "one_second_into_red",
        MonitorId::RedLight,
        true,
        north(),
        200.0,
        trace(50.0, |t| (1.75, -80.0 + 69.0 / 16.0 * t)),
        &[("RRL", 1)],
    );
    add(
        "through_on_green",
        MonitorId::RedLight,
        false,
        north(),
        200.0,
        trace(20.0, |t| (1.75, -80.0 + 69.0 / 5.0 * t)),
        &[],
    );

    let mut stop = north();
    stop.traffic_sign = Some("stop_sign".into());
    add(
        "rolling_stop",
        MonitorId::StopSign,
        true,
        stop.clone(),
        200.0,
        trace(40.0, |t| (1.75, -80.0 + 5.0 * t)),
        &[("RSS", 1)],
    );
    // Reach y = -13 at t = 13.4, wait two seconds, then continue.
    let halt = |t: f64| {
        let y = if t < 13.4 {
            -80.0 + 5.0 * t
        } else if t < 15.4 {
            -13.0
        } else {
            -13.0 + 5.0 * (t - 15.4)
        };
        (1.75, y)
    };
    add(
        "full_stop",
        MonitorId::StopSign,
        false,
        stop,
        200.0,
        trace(50.0, halt),
        &[],
    );

    // A cyclist 50 m ahead at 4 m/s. Swerving late predicts a conflict,
    // swerving early never comes close.
    let mut bike = car("bike", wp("r1", 80.0), 4.0, &["r1"], Some(wp("r1", 300.0)));
    bike.kind = ActorKind::Vehicle {
        category: "bicycle".into(),
    };
    bike.length = 1.8;
    bike.width = 0.6;
    let cyclist = || plan(corpus, "straight_2lane", vec![straight_ego(), bike.clone()]);
    let swerve = |t0: f64| move |t: f64| (30.0 + 10.0 * t, out_and_back(t, t0, 10.0, 3.5));
    add(
        "late_swerve_past_cyclist",
        MonitorId::RoadRights,
        true,
        cyclist(),
        100.0,
        trace(30.0, swerve(6.0)),
        &[("VRR", 1)],
    );
    add(
        "early_swerve_past_cyclist",
        MonitorId::RoadRights,
        false,
        cyclist(),
        100.0,
        trace(30.0, swerve(2.0)),
        &[],
    );

    let mut cone = car("cone", wp("r1", 100.0), 0.0, &["r1"], None);
    cone.kind = ActorKind::Object;
    cone.length = 0.5;
    cone.width = 0.5;
    let coned = || plan(corpus, "straight_2lane", vec![straight_ego(), cone.clone()]);
    add(
        "hits_cone",
        MonitorId::Collision,
        true,
        coned(),
        100.0,
        trace(30.0, |t| (30.0 + 10.0 * t, 0.0)),
        &[("C", 1)],
    );
    add(
        "passes_cone",
        MonitorId::Collision,
        false,
        coned(),
        100.0,
        trace(30.0, |t| (30.0 + 10.0 * t, out_and_back(t, 3.0, 6.0, 3.5))),
        &[],
    );

    // 500 m of route at a 10 m/s limit allows 500 s.
    let long = || {
        let ego = car("ego", wp("h1", 50.0), 0.0, &["h1"], Some(wp("h1", 550.0)));
        let mut p = plan(corpus, "highway_3lane", vec![ego]);
        p.speed_limit = 10.0;
        p
    };
    add(
        "stands_still",
        MonitorId::Timeout,
        true,
        long(),
        500.0,
        trace(0.0, |_| (50.0, 0.0)),
        &[("TO", 1)],
    );
    add(
        "drives_to_goal",
        MonitorId::Timeout,
        false,
        long(),
        500.0,
        trace(60.0, |t| (50.0 + 9.0 * t, 0.0)),
        &[],
    );

    cases
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_monitor_has_both_polarities() {
        let corpus = DslCorpus::bundled();
        let cases = monitor_cases(&corpus);
        for m in MonitorId::ALL {
            assert!(cases.iter().any(|c| c.monitor == m && c.positive), "{m} positive");
            assert!(cases.iter().any(|c| c.monitor == m && !c.positive), "{m} negative");
        }
        for c in &cases {
            let fired = c.expected.contains_key(c.monitor.code());
            assert_eq!(fired, c.positive, "{}", c.name);
        }
    }

    #[test]
    fn cases_produce_expected_counts() {
        let corpus = DslCorpus::bundled();
        for c in monitor_cases(&corpus) {
            let report = c.run();
            assert_eq!(nonzero_counts(&report), c.expected, "{}", c.name);
        }
    }

    #[test]
    fn clean_run_reaches_goal() {
        let corpus = DslCorpus::bundled();
        let p = plan(&corpus, "straight_2lane", vec![straight_ego()]);
        let r = run(
            &p,
            &MonitorSpec::all(100.0),
            &EgoPolicy::Scripted {
                trace: trace(30.0, |t| (30.0 + 10.0 * t, 0.0)),
            },
        )
        .unwrap();
        assert!(r.events.is_empty());
        assert_eq!(r.outcome, Outcome::GoalReached);
    }

    #[test]
    fn timeout_fires_at_limit() {
        let corpus = DslCorpus::bundled();
        let case = monitor_cases(&corpus)
            .into_iter()
            .find(|c| c.name == "stands_still")
            .unwrap();
        let limit = timeout_limit(case.plan.ego_route_length(), case.plan.speed_limit).unwrap();
        assert!((limit - 500.0).abs() < 1e-9);
        let r = case.run();
        assert_eq!(r.outcome, Outcome::Timeout);
        assert!((r.events[0].time - 500.0).abs() < 1e-6);
    }

    #[test]
    fn cruise_and_ramp_kinematics() {
        let corpus = DslCorpus::bundled();
        let mut npc = car("npc", wp("h2", 100.0), 10.0, &["h2"], None);
        npc.events.push(PlannedEvent {
            name: "slow".into(),
            action: PlannedAction::Speed {
                target: 5.0,
                duration: 3.0,
            },
            trigger: PlannedTrigger::SimulationTime(2.0),
        });
        let ego = car("ego", wp("h1", 10.0), 0.0, &["h1"], Some(wp("h1", 600.0)));
        let p = plan(&corpus, "highway_3lane", vec![ego, npc]);
        let spec = MonitorSpec::all(100.0);
        let policy = EgoPolicy::Scripted {
            trace: trace(0.0, |_| (10.0, 0.0)),
        };
        let mut sim = Simulation::new(&p, &spec, &policy);
        sim.step();
        assert!((sim.state().actors[1].s - 101.0).abs() < 1e-9);
        while sim.state().time < 5.0 - 1e-9 {
            sim.step();
        }
        assert!((sim.state().actors[1].speed - 5.0).abs() < 1e-9);
        for _ in 0..20 {
            sim.step();
        }
        assert!((sim.state().actors[1].speed - 5.0).abs() < 1e-9);
    }

    #[test]
    fn distance_trigger_fires_next_frame() {
        let corpus = DslCorpus::bundled();
        let mut npc = car("npc", wp("r2", 62.0), 0.0, &["r2"], None);
        npc.events.push(PlannedEvent {
            name: "go".into(),
            action: PlannedAction::Speed {
                target: 8.0,
                duration: 0.0,
            },
            trigger: PlannedTrigger::DistanceToEgo {
                entity: "npc".into(),
                distance: 30.0,
            },
        });
        // Starts about 32 m from the ego, which closes at 1 m/s.
        let p = plan(&corpus, "straight_2lane", vec![straight_ego(), npc]);
        let spec = MonitorSpec::all(100.0);
        let policy = EgoPolicy::Scripted {
            trace: trace(10.0, |t| (30.0 + t, 0.0)),
        };
        let mut sim = Simulation::new(&p, &spec, &policy);
        while sim.state().actors[1].speed == 0.0 && sim.state().time < 5.0 {
            sim.step();
        }
        // The event starts on the first frame inside 30 m and moves the
        // actor on the next.
        let started = sim.state().time;
        let gap_at = |t: f64| ((62.0 - (30.0 + t)).powi(2) + 3.5f64.powi(2)).sqrt();
        assert!(gap_at(started - DT) < 30.0);
        assert!(gap_at(started - 2.0 * DT) >= 30.0);
    }

    #[test]
    fn lane_follow_stops_for_red() {
        let corpus = DslCorpus::bundled();
        let p = plan(&corpus, "intersection_4way", vec![north_ego()]);
        let r = run(&p, &MonitorSpec::all(300.0), &EgoPolicy::lane_follow()).unwrap();
        assert!(r.events.is_empty());
        assert_eq!(r.outcome, Outcome::GoalReached);
    }

    #[test]
    fn identical_runs_match() {
        let corpus = DslCorpus::bundled();
        let case = monitor_cases(&corpus)
            .into_iter()
            .find(|c| c.name == "one_second_into_red")
            .unwrap();
        assert_eq!(case.run(), case.run());
    }
}
