//! Fixed-step world update and the ego monitors.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::corpus::{Lane, Marking, MiniMap, SignalState};

use super::geometry::Obb;
use super::plan::{ActorKind, PlannedAction, PlannedActor, PlannedTrigger, ScenarioPlan};
use super::{EgoPolicy, EvaluationReport, MonitorId, MonitorSpec, Outcome, TraceSample, ViolationEvent, DT};

pub(crate) const EGO: &str = "ego";
/// Distance to the route end that counts as arrival, metres.
const GOAL_RADIUS: f64 = 3.0;
/// A stop must happen this close to the line, metres.
const STOP_WINDOW: f64 = 5.0;
const STOPPED_SPEED: f64 = 0.1;
/// Crossing a stop-sign line slower than this is not a violation, m/s.
const ROLLING_SPEED: f64 = 0.5;
const MOVING_SPEED: f64 = 0.5;
/// Deceleration that counts as yielding, m/s^2.
const YIELD_DECEL: f64 = 0.5;
/// Clearance added to half-widths when predicting conflicts, metres.
const CONFLICT_CLEARANCE: f64 = 1.0;
const AUTOPILOT_FRACTION: f64 = 0.8;
const AUTOPILOT_ACCEL: f64 = 2.0;
const AUTOPILOT_DECEL: f64 = 3.0;
const LANE_OFFSET_TIME: f64 = 1.0;
const FOLLOW_ACCEL: f64 = 2.0;
const FOLLOW_BRAKE: f64 = 6.0;
const FOLLOW_COMFORT_BRAKE: f64 = 3.0;
/// Lane-follow ego stops this far before a line, metres.
const FOLLOW_STOP_GAP: f64 = 1.5;
/// Lane-follow ego waits this long at a stop sign, seconds.
const FOLLOW_STOP_WAIT: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActorState {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub lane_id: String,
    pub s: f64,
    /// Left-positive offset from the lane centerline.
    pub offset: f64,
    /// False once the actor has left the map at its route end.
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldState {
    pub time: f64,
    pub frame: u64,
    pub actors: Vec<ActorState>,
    pub signals: BTreeMap<String, SignalState>,
    pub active_events: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventPhase {
    Standby,
    Running,
    Complete,
}

#[derive(Debug, Clone)]
struct Ramp {
    from: f64,
    to: f64,
    start: f64,
    duration: f64,
    event: Option<usize>,
}

#[derive(Debug, Clone)]
struct Blend {
    from: f64,
    to: f64,
    start: f64,
    duration: f64,
    event: Option<usize>,
}

/// Per-actor controller state that is not part of the observable world.
#[derive(Debug, Clone)]
struct Control {
    route_pos: usize,
    ramp: Option<Ramp>,
    blend: Option<Blend>,
    autopilot: bool,
    events: Vec<EventPhase>,
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Ego lane bookkeeping derived from its pose alone.
#[derive(Debug, Clone)]
struct Tracker {
    lane: String,
    s: f64,
    offset: f64,
}

#[derive(Debug, Default)]
struct TrackStep {
    /// Stop lines passed this frame.
    crossed: Vec<String>,
    /// Marking of a boundary crossed into a same-direction neighbor.
    switched_across: Option<Marking>,
}

impl Tracker {
    fn new(lane: &str, s: f64) -> Self {
        Tracker {
            lane: lane.to_string(),
            s,
            offset: 0.0,
        }
    }

    fn pick<'m>(map: &'m MiniMap, ids: &[String], route: &[String], x: f64, y: f64) -> Option<(&'m Lane, f64, f64)> {
        ids.iter()
            .filter_map(|id| map.lane(id))
            .map(|l| {
                let p = l.project(x, y);
                (l, p)
            })
            .min_by(|a, b| {
                let ka = (a.1.distance, !route.contains(&a.0.lane_id));
                let kb = (b.1.distance, !route.contains(&b.0.lane_id));
                ka.0.partial_cmp(&kb.0)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(ka.1.cmp(&kb.1))
            })
            .map(|(l, p)| (l, p.s, p.offset))
    }

    fn update(
        &mut self,
        map: &MiniMap,
        route: &[String],
        x: f64,
        y: f64,
        override_marking: Option<Marking>,
    ) -> TrackStep {
        let mut step = TrackStep::default();
        let half = map.lane_width / 2.0;
        let prev_s = self.s;
        let mut lane = map.lane(&self.lane).expect("tracked lane exists");

        // Overlapping junction connectors: keep the sibling that best fits.
        if !lane.predecessors.is_empty() && lane.has_tag("junction") {
            let mut siblings: Vec<String> = Vec::new();
            for pred in &lane.predecessors {
                if let Some(p) = map.lane(pred) {
                    siblings.extend(p.successors.iter().cloned());
                }
            }
            if let Some((best, _, _)) = Self::pick(map, &siblings, route, x, y) {
                lane = best;
            }
        }

        let mut p = lane.project(x, y);
        if p.s >= lane.length() - 1e-6 && !lane.successors.is_empty() {
            if let Some((next, _, _)) = Self::pick(map, &lane.successors, route, x, y) {
                let q = next.project(x, y);
                if q.distance <= map.lane_width {
                    for sl in map.stop_lines_on(&lane.lane_id) {
                        if prev_s < sl.s || self.lane != lane.lane_id {
                            step.crossed.push(sl.id.clone());
                        }
                    }
                    lane = next;
                    p = q;
                }
            }
        } else if lane.lane_id == self.lane {
            for sl in map.stop_lines_on(&lane.lane_id) {
                if prev_s < sl.s && p.s >= sl.s {
                    step.crossed.push(sl.id.clone());
                }
            }
        }

        if p.offset.abs() > half {
            let neighbor = if p.offset > 0.0 { &lane.left } else { &lane.right };
            if let Some(n) = neighbor.as_ref().and_then(|id| map.lane(id)) {
                let q = n.project(x, y);
                if q.offset.abs() < p.offset.abs() {
                    let marking = if p.offset > 0.0 {
                        lane.left_marking
                    } else {
                        lane.right_marking
                    };
                    step.switched_across = Some(override_marking.unwrap_or(marking));
                    lane = n;
                    p = q;
                }
            }
        }

        // Lost track entirely: re-lock onto the nearest lane.
        if p.distance > 1.5 * map.lane_width {
            if let Some((near, q)) = map.nearest_lane(x, y) {
                if q.distance <= half {
                    lane = near;
                    p = q;
                }
            }
        }

        self.lane = lane.lane_id.clone();
        self.s = p.s;
        self.offset = p.offset;
        step
    }
}

struct Follow {
    route_pos: usize,
    stopped_for: f64,
    cleared: BTreeSet<String>,
}

pub struct Simulation<'p, 'm> {
    plan: &'p ScenarioPlan<'m>,
    spec: &'p MonitorSpec,
    policy: &'p EgoPolicy,
    state: WorldState,
    controls: Vec<Control>,
    tracker: Tracker,
    follow: Follow,
    override_marking: Option<Marking>,
    cruise: f64,
    // Monitor memory.
    invading: bool,
    off_road: bool,
    speeding: bool,
    wrong_way_time: f64,
    wrong_way_fired: bool,
    stop_time: f64,
    stopped_at: BTreeSet<String>,
    conflicts: BTreeSet<String>,
    events: Vec<ViolationEvent>,
    outcome: Option<Outcome>,
}

fn trace_at(trace: &[TraceSample], t: f64) -> TraceSample {
    let first = trace[0];
    if t <= first.t {
        return first;
    }
    for w in trace.windows(2) {
        let (a, b) = (w[0], w[1]);
        if t <= b.t {
            let span = b.t - a.t;
            let u = if span > 0.0 { (t - a.t) / span } else { 1.0 };
            let dh = crate::corpus::map::wrap_angle(b.heading - a.heading);
            return TraceSample {
                t,
                x: a.x + (b.x - a.x) * u,
                y: a.y + (b.y - a.y) * u,
                heading: a.heading + dh * u,
                speed: a.speed + (b.speed - a.speed) * u,
            };
        }
    }
    let last = trace[trace.len() - 1];
    TraceSample { t, speed: 0.0, ..last }
}

impl<'p, 'm> Simulation<'p, 'm> {
    pub fn new(plan: &'p ScenarioPlan<'m>, spec: &'p MonitorSpec, policy: &'p EgoPolicy) -> Self {
        let map = plan.map;
        let mut actors = Vec::with_capacity(plan.actors.len());
        let mut controls = Vec::with_capacity(plan.actors.len());
        for a in &plan.actors {
            let lane = map.lane(&a.spawn.lane_id).expect("plan lanes exist");
            let pose = lane.pose_at(a.spawn.s, 0.0);
            actors.push(ActorState {
                id: a.id.clone(),
                x: pose.x,
                y: pose.y,
                heading: pose.heading,
                speed: a.speed,
                lane_id: lane.lane_id.clone(),
                s: a.spawn.s,
                offset: 0.0,
                active: true,
            });
            controls.push(Control {
                route_pos: 0,
                ramp: None,
                blend: None,
                autopilot: false,
                events: vec![EventPhase::Standby; a.events.len()],
            });
        }
        let ego = plan.ego();
        let override_marking = plan.road_marker.as_deref().and_then(Marking::from_road_marker);
        let mut sim = Simulation {
            plan,
            spec,
            policy,
            state: WorldState {
                time: 0.0,
                frame: 0,
                actors,
                signals: BTreeMap::new(),
                active_events: Vec::new(),
            },
            controls,
            tracker: Tracker::new(&ego.spawn.lane_id, ego.spawn.s),
            follow: Follow {
                route_pos: 0,
                stopped_for: 0.0,
                cleared: BTreeSet::new(),
            },
            override_marking,
            cruise: AUTOPILOT_FRACTION * plan.speed_limit,
            invading: false,
            off_road: false,
            speeding: false,
            wrong_way_time: 0.0,
            wrong_way_fired: false,
            stop_time: 0.0,
            stopped_at: BTreeSet::new(),
            conflicts: BTreeSet::new(),
            events: Vec::new(),
            outcome: None,
        };
        if let EgoPolicy::Scripted { trace } = policy {
            if !trace.is_empty() {
                sim.place_scripted_ego(0.0);
            }
        }
        sim.refresh_signals();
        sim.fire_triggers();
        sim.check_collision();
        sim
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn events(&self) -> &[ViolationEvent] {
        &self.events
    }

    fn refresh_signals(&mut self) {
        let t = self.state.time;
        self.state.signals = self
            .plan
            .map
            .signals
            .iter()
            .map(|s| (s.id.clone(), s.state_at(t)))
            .collect();
        self.state.active_events = self
            .plan
            .actors
            .iter()
            .zip(&self.controls)
            .flat_map(|(a, c)| {
                a.events
                    .iter()
                    .zip(&c.events)
                    .filter(|(_, p)| **p == EventPhase::Running)
                    .map(|(e, _)| e.name.clone())
            })
            .collect();
    }

    fn place_scripted_ego(&mut self, t: f64) {
        let EgoPolicy::Scripted { trace } = self.policy else {
            return;
        };
        let sample = trace_at(trace, t);
        let ego = &mut self.state.actors[0];
        ego.x = sample.x;
        ego.y = sample.y;
        ego.heading = sample.heading;
        ego.speed = sample.speed.max(0.0);
    }

    /// Advances the world by one fixed step.
    pub fn step(&mut self) {
        if self.outcome.is_some() {
            return;
        }
        let prev_ego_speed = self.state.actors[0].speed;
        self.state.frame += 1;
        self.state.time = self.state.frame as f64 * DT;
        for i in 1..self.state.actors.len() {
            self.step_actor(i);
        }
        self.step_ego();
        self.refresh_signals();
        self.fire_triggers();
        self.refresh_signals();
        self.run_monitors(prev_ego_speed);
    }

    fn complete(&mut self, actor: usize, event: Option<usize>) {
        if let Some(e) = event {
            self.controls[actor].events[e] = EventPhase::Complete;
        }
    }

    fn step_actor(&mut self, i: usize) {
        let t = self.state.time;
        let map = self.plan.map;
        let planned: &PlannedActor = &self.plan.actors[i];
        if !self.state.actors[i].active || planned.kind == ActorKind::Object {
            return;
        }
        let v0 = self.state.actors[i].speed;
        let mut finished = Vec::new();
        let control = &mut self.controls[i];
        let v1 = if let Some(r) = &control.ramp {
            let tau = t - r.start;
            if r.duration <= 0.0 || tau >= r.duration - 1e-9 {
                finished.push(r.event);
                let to = r.to;
                control.ramp = None;
                to
            } else {
                r.from + (r.to - r.from) * tau / r.duration
            }
        } else if control.autopilot {
            let a = ((self.cruise - v0) / DT).clamp(-AUTOPILOT_DECEL, AUTOPILOT_ACCEL);
            v0 + a * DT
        } else {
            v0
        }
        .max(0.0);

        let mut offset = self.state.actors[i].offset;
        if let Some(b) = &control.blend {
            let u = (t - b.start) / b.duration;
            offset = b.from + (b.to - b.from) * smoothstep(u);
            if u >= 1.0 - 1e-9 {
                finished.push(b.event);
                offset = b.to;
                control.blend = None;
            }
        }

        let actor = &mut self.state.actors[i];
        let mut s = actor.s + 0.5 * (v0 + v1) * DT;
        let mut lane = map.lane(&actor.lane_id).expect("actor lane exists");
        let route = &planned.route;
        loop {
            let on_last = control.route_pos + 1 >= route.len() && route.get(control.route_pos) == Some(&lane.lane_id);
            if on_last {
                if let Some(end) = &planned.route_end {
                    if end.lane_id == lane.lane_id && s >= end.s && end.s < lane.length() - 1e-6 {
                        actor.active = false;
                        break;
                    }
                }
            }
            if s <= lane.length() {
                break;
            }
            let next = route
                .get(control.route_pos + 1)
                .filter(|n| route.get(control.route_pos) == Some(&lane.lane_id) && lane.successors.contains(n))
                .cloned()
                .or_else(|| {
                    let mut succ = lane.successors.clone();
                    succ.sort();
                    succ.into_iter().next()
                });
            let Some(next) = next.and_then(|n| map.lane(&n)) else {
                actor.active = false;
                break;
            };
            s -= lane.length();
            if route.get(control.route_pos + 1) == Some(&next.lane_id) {
                control.route_pos += 1;
            }
            lane = next;
        }
        actor.speed = v1;
        if actor.active {
            let pose = lane.pose_at(s, offset);
            actor.x = pose.x;
            actor.y = pose.y;
            actor.heading = pose.heading;
            actor.lane_id = lane.lane_id.clone();
            actor.s = s;
            actor.offset = offset;
        }
        for e in finished {
            self.complete(i, e);
        }
    }

    fn step_ego(&mut self) {
        match self.policy {
            EgoPolicy::Scripted { trace } => {
                if !trace.is_empty() {
                    self.place_scripted_ego(self.state.time);
                }
            }
            EgoPolicy::LaneFollow { speed_fraction } => self.step_lane_follow(*speed_fraction),
        }
    }

    /// Whether the lane-follow ego must halt at `line_s` on `lane`.
    fn must_stop_at(&self, stop_line: &str, distance: f64, speed: f64) -> bool {
        let map = self.plan.map;
        let stop_sign = self.plan.traffic_sign.as_deref() == Some("stop_sign");
        match map.signal_for(stop_line) {
            Some(signal) if !stop_sign => match self
                .state
                .signals
                .get(&signal.id)
                .copied()
                .unwrap_or(SignalState::Green)
            {
                SignalState::Green => false,
                SignalState::Yellow => distance > speed * speed / (2.0 * FOLLOW_COMFORT_BRAKE),
                SignalState::Red => true,
            },
            _ => self.spec.enabled.contains(&MonitorId::StopSign) && !self.follow.cleared.contains(stop_line),
        }
    }

    fn step_lane_follow(&mut self, fraction: f64) {
        let map = self.plan.map;
        let ego_plan = self.plan.ego();
        let ego = self.state.actors[0].clone();
        let lane = map.lane(&ego.lane_id).expect("ego lane exists");
        let mut desired = fraction * self.plan.speed_limit;
        let ahead = map
            .stop_lines_on(&lane.lane_id)
            .filter(|sl| sl.s > ego.s)
            .min_by(|a, b| a.s.partial_cmp(&b.s).unwrap_or(std::cmp::Ordering::Equal));
        if let Some(sl) = ahead {
            let d = sl.s - FOLLOW_STOP_GAP - ego.s;
            if self.must_stop_at(&sl.id, d, ego.speed) {
                desired = desired.min((2.0 * FOLLOW_COMFORT_BRAKE * d.max(0.0)).sqrt());
                if d < 0.5 && ego.speed < STOPPED_SPEED {
                    desired = 0.0;
                    self.follow.stopped_for += DT;
                    let sign_governed =
                        map.signal_for(&sl.id).is_none() || self.plan.traffic_sign.as_deref() == Some("stop_sign");
                    if self.follow.stopped_for >= FOLLOW_STOP_WAIT && sign_governed {
                        self.follow.cleared.insert(sl.id.clone());
                    }
                }
            } else {
                self.follow.stopped_for = 0.0;
            }
        }
        let a = ((desired - ego.speed) / DT).clamp(-FOLLOW_BRAKE, FOLLOW_ACCEL);
        let v1 = (ego.speed + a * DT).max(0.0);
        let mut s = ego.s + 0.5 * (ego.speed + v1) * DT;
        let mut lane = lane;
        let route = &ego_plan.route;
        let mut v_out = v1;
        while s > lane.length() {
            let next = route.get(self.follow.route_pos + 1).and_then(|n| map.lane(n));
            match next {
                Some(n) => {
                    s -= lane.length();
                    self.follow.route_pos += 1;
                    self.follow.stopped_for = 0.0;
                    lane = n;
                }
                None => {
                    s = lane.length();
                    v_out = 0.0;
                }
            }
        }
        let pose = lane.pose_at(s, 0.0);
        let ego = &mut self.state.actors[0];
        ego.x = pose.x;
        ego.y = pose.y;
        ego.heading = pose.heading;
        ego.speed = v_out;
        ego.lane_id = lane.lane_id.clone();
        ego.s = s;
        ego.offset = 0.0;
    }

    fn event_complete(&self, name: &str) -> bool {
        self.plan.actors.iter().zip(&self.controls).any(|(a, c)| {
            a.events
                .iter()
                .zip(&c.events)
                .any(|(e, p)| e.name == name && *p == EventPhase::Complete)
        })
    }

    fn fire_triggers(&mut self) {
        let t = self.state.time;
        let mut starts = Vec::new();
        for (i, actor) in self.plan.actors.iter().enumerate() {
            if !self.state.actors[i].active {
                continue;
            }
            for (j, event) in actor.events.iter().enumerate() {
                if self.controls[i].events[j] != EventPhase::Standby {
                    continue;
                }
                let ready = match &event.trigger {
                    PlannedTrigger::SimulationTime(v) => t > *v - 1e-9,
                    PlannedTrigger::AfterEvent(name) => self.event_complete(name),
                    PlannedTrigger::DistanceToEgo { entity, distance } => {
                        let ego = &self.state.actors[0];
                        self.state
                            .actors
                            .iter()
                            .find(|a| &a.id == entity && a.active)
                            .is_some_and(|a| (a.x - ego.x).hypot(a.y - ego.y) < *distance)
                    }
                };
                if ready {
                    starts.push((i, j));
                }
            }
        }
        for (i, j) in starts {
            self.start_event(i, j);
        }
    }

    fn start_event(&mut self, i: usize, j: usize) {
        let t = self.state.time;
        let map = self.plan.map;
        let action = self.plan.actors[i].events[j].action.clone();
        self.controls[i].events[j] = EventPhase::Running;
        match action {
            PlannedAction::Speed { target, duration } => {
                if let Some(prev) = self.controls[i].ramp.take() {
                    self.complete(i, prev.event);
                }
                let control = &mut self.controls[i];
                control.autopilot = false;
                control.ramp = Some(Ramp {
                    from: self.state.actors[i].speed,
                    to: target,
                    start: t,
                    duration,
                    event: Some(j),
                });
            }
            PlannedAction::LaneChange { delta, duration } => {
                let actor = &mut self.state.actors[i];
                let lane = map.lane(&actor.lane_id).expect("actor lane exists");
                let target = if delta > 0 { &lane.left } else { &lane.right };
                match target.as_ref().and_then(|id| map.lane(id)) {
                    Some(target) if delta != 0 => {
                        let p = target.project(actor.x, actor.y);
                        actor.lane_id = target.lane_id.clone();
                        actor.s = p.s;
                        actor.offset = p.offset;
                        if let Some(prev) = self.controls[i].blend.take() {
                            self.complete(i, prev.event);
                        }
                        self.controls[i].blend = Some(Blend {
                            from: p.offset,
                            to: 0.0,
                            start: t,
                            duration,
                            event: Some(j),
                        });
                    }
                    _ => self.complete(i, Some(j)),
                }
            }
            PlannedAction::LaneOffset { target } => {
                let from = self.state.actors[i].offset;
                if (from - target).abs() < 1e-9 {
                    self.complete(i, Some(j));
                } else {
                    if let Some(prev) = self.controls[i].blend.take() {
                        self.complete(i, prev.event);
                    }
                    self.controls[i].blend = Some(Blend {
                        from,
                        to: target,
                        start: t,
                        duration: LANE_OFFSET_TIME,
                        event: Some(j),
                    });
                }
            }
            PlannedAction::Autopilot => {
                if let Some(prev) = self.controls[i].ramp.take() {
                    self.complete(i, prev.event);
                }
                self.controls[i].autopilot = true;
                self.complete(i, Some(j));
            }
        }
    }

    fn emit(&mut self, monitor: MonitorId, detail: String) {
        if self.spec.enabled.contains(&monitor) {
            self.events.push(ViolationEvent {
                monitor,
                time: (self.state.time * 1e6).round() / 1e6,
                actor: EGO.to_string(),
                detail,
            });
        }
    }

    fn ego_box(&self) -> Obb {
        let e = &self.state.actors[0];
        let p = self.plan.ego();
        Obb::new(e.x, e.y, e.heading, p.length, p.width)
    }

    fn check_collision(&mut self) {
        let ego = self.ego_box();
        let hit = self
            .state
            .actors
            .iter()
            .zip(&self.plan.actors)
            .skip(1)
            .find(|(a, p)| a.active && ego.overlaps(&Obb::new(a.x, a.y, a.heading, p.length, p.width)));
        if let Some((a, _)) = hit {
            let detail = format!("contact with {}", a.id);
            self.emit(MonitorId::Collision, detail);
            self.outcome = Some(Outcome::Collision);
        }
    }

    fn run_monitors(&mut self, prev_speed: f64) {
        let map = self.plan.map;
        let t = self.state.time;
        let ego = self.state.actors[0].clone();
        let half = map.lane_width / 2.0;
        let route = self.plan.ego().route.clone();

        // Lane tracking, lane invasion and solid-line crossings.
        let prev_lane = self.tracker.lane.clone();
        let track = self.tracker.update(map, &route, ego.x, ego.y, self.override_marking);
        if matches!(self.policy, EgoPolicy::Scripted { .. }) {
            let e = &mut self.state.actors[0];
            e.lane_id = self.tracker.lane.clone();
            e.s = self.tracker.s;
            e.offset = self.tracker.offset;
        }
        if let Some(marking) = track.switched_across {
            if marking.is_solid() {
                let detail = format!("{prev_lane} -> {}", self.tracker.lane);
                self.emit(MonitorId::SolidLine, detail);
            }
        }
        let lane = map.lane(&self.tracker.lane).expect("tracked lane exists");
        let invading = if self.tracker.offset.abs() > half {
            let (neighbor, marking) = if self.tracker.offset > 0.0 {
                (&lane.left, lane.left_marking)
            } else {
                (&lane.right, lane.right_marking)
            };
            neighbor.is_none() && marking != Marking::None
        } else {
            false
        };
        if invading && !self.invading {
            let side = if self.tracker.offset > 0.0 { "left" } else { "right" };
            self.emit(MonitorId::LaneInvasion, format!("{} {side} boundary", lane.lane_id));
        }
        self.invading = invading;

        // Off road.
        let nearest = map
            .nearest_lane(ego.x, ego.y)
            .map(|(_, p)| p.distance)
            .unwrap_or(f64::INFINITY);
        let off = nearest > map.lane_width + self.spec.off_road_margin;
        if off && !self.off_road {
            self.emit(MonitorId::OffRoad, format!("{nearest:.2} m from nearest centerline"));
        }
        self.off_road = off;

        // Wrong direction: every lane under the ego points against it.
        let under: Vec<f64> = map
            .lanes
            .iter()
            .filter_map(|l| {
                let p = l.project(ego.x, ego.y);
                (p.interior && p.offset.abs() <= half).then(|| l.heading_at(p.s))
            })
            .collect();
        let against =
            ego.speed > MOVING_SPEED && !under.is_empty() && under.iter().all(|h| (ego.heading - h).cos() < 0.0);
        if against {
            self.wrong_way_time += DT;
            if self.wrong_way_time >= self.spec.wrong_direction_time - 1e-9 && !self.wrong_way_fired {
                self.wrong_way_fired = true;
                self.emit(MonitorId::WrongDirection, format!("against {}", lane.lane_id));
            }
        } else {
            self.wrong_way_time = 0.0;
            self.wrong_way_fired = false;
        }

        // Speed limit.
        let speeding = ego.speed > self.plan.speed_limit * (1.0 + self.spec.speed_tolerance) + 1e-9;
        if speeding && !self.speeding {
            self.emit(MonitorId::SpeedLimit, format!("{:.2} m/s", ego.speed));
        }
        self.speeding = speeding;

        // Stop lines.
        if ego.speed < STOPPED_SPEED {
            let near_line = map
                .stop_lines_on(&self.tracker.lane)
                .find(|sl| (0.0..=STOP_WINDOW).contains(&(sl.s - self.tracker.s)));
            if let Some(sl) = near_line {
                self.stop_time += DT;
                if self.stop_time >= self.spec.stop_duration - 1e-9 {
                    self.stopped_at.insert(sl.id.clone());
                }
            }
        } else {
            self.stop_time = 0.0;
        }
        let stop_sign = self.plan.traffic_sign.as_deref() == Some("stop_sign");
        for id in track.crossed {
            match map.signal_for(&id) {
                Some(signal) if !stop_sign => {
                    if signal.state_at(t) == SignalState::Red {
                        self.emit(MonitorId::RedLight, format!("{id} on red ({})", signal.id));
                    }
                }
                _ => {
                    if ego.speed > ROLLING_SPEED && !self.stopped_at.contains(&id) {
                        self.emit(MonitorId::StopSign, format!("{id} at {:.2} m/s", ego.speed));
                    }
                }
            }
        }

        // Road rights: predicted conflict with a priority actor while the
        // ego keeps going.
        let yielding = ego.speed <= MOVING_SPEED || (ego.speed - prev_speed) / DT <= -YIELD_DECEL;
        let ego_w = self.plan.ego().width;
        let (evx, evy) = (ego.speed * ego.heading.cos(), ego.speed * ego.heading.sin());
        let steps = (self.spec.yield_horizon / DT).round() as usize;
        let mut conflicts = BTreeSet::new();
        for (a, p) in self.state.actors.iter().zip(&self.plan.actors).skip(1) {
            if !a.active || !p.kind.has_priority() {
                continue;
            }
            let (avx, avy) = (a.speed * a.heading.cos(), a.speed * a.heading.sin());
            let radius = (ego_w + p.width) / 2.0 + CONFLICT_CLEARANCE;
            let conflict = (0..=steps).any(|k| {
                let tau = k as f64 * DT;
                let dx = (ego.x + evx * tau) - (a.x + avx * tau);
                let dy = (ego.y + evy * tau) - (a.y + avy * tau);
                dx.hypot(dy) < radius
            });
            if conflict {
                conflicts.insert(a.id.clone());
            }
        }
        if !yielding {
            let fresh: Vec<String> = conflicts.difference(&self.conflicts).cloned().collect();
            for id in fresh {
                self.emit(MonitorId::RoadRights, format!("did not yield to {id}"));
            }
            self.conflicts = conflicts;
        } else {
            self.conflicts = self.conflicts.intersection(&conflicts).cloned().collect();
        }

        self.check_collision();
        if self.outcome.is_some() {
            return;
        }
        let ego_plan = self.plan.ego();
        if let Some(end) = &ego_plan.route_end {
            if let Some(goal) = map.pose(end) {
                if (goal.x - ego.x).hypot(goal.y - ego.y) <= GOAL_RADIUS {
                    self.outcome = Some(Outcome::GoalReached);
                    return;
                }
            }
        }
        if t >= self.spec.timeout_limit - 1e-9 {
            self.emit(MonitorId::Timeout, format!("limit {:.1} s", self.spec.timeout_limit));
            self.outcome = Some(Outcome::Timeout);
        }
    }

    pub fn into_report(self) -> EvaluationReport {
        let mut counts: BTreeMap<String, u32> = MonitorId::ALL.iter().map(|m| (m.code().to_string(), 0)).collect();
        for e in &self.events {
            *counts.entry(e.monitor.code().to_string()).or_default() += 1;
        }
        EvaluationReport {
            map_id: self.plan.map.map_id.clone(),
            ego_policy: self.policy.name().to_string(),
            monitors: self.spec.enabled.iter().copied().collect(),
            timeout_limit: self.spec.timeout_limit,
            duration: (self.state.time * 1e6).round() / 1e6,
            frames: self.state.frame,
            outcome: self.outcome.unwrap_or(Outcome::Timeout),
            counts,
            events: self.events,
        }
    }
}

pub(crate) fn simulate(plan: &ScenarioPlan<'_>, spec: &MonitorSpec, policy: &EgoPolicy) -> EvaluationReport {
    let mut sim = Simulation::new(plan, spec, policy);
    while !sim.is_finished() {
        sim.step();
    }
    sim.into_report()
}
