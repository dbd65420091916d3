//! Mini-maps: lane polylines with successor and adjacency links, stop lines
//! and fixed-cycle signals.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marking {
    Solid,
    DoubleSolid,
    Broken,
    None,
}

impl Marking {
    /// Lane changes across this marking are forbidden.
    pub fn is_solid(self) -> bool {
        matches!(self, Marking::Solid | Marking::DoubleSolid)
    }

    /// Interprets a repository road-marker value.
    pub fn from_road_marker(value: &str) -> Option<Marking> {
        match value {
            "solid_line" => Some(Marking::Solid),
            "double_solid_line" => Some(Marking::DoubleSolid),
            "broken_line" => Some(Marking::Broken),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Result of projecting a point onto a lane centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the foot point, clamped to the lane.
    pub s: f64,
    /// Signed lateral offset, positive to the left of travel.
    pub offset: f64,
    /// Euclidean distance to the foot point.
    pub distance: f64,
    /// True when the foot point lies strictly inside the lane, not at an end cap.
    pub interior: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LaneWire {
    lane_id: String,
    #[serde(default)]
    tags: Vec<String>,
    points: Vec<[f64; 2]>,
    #[serde(default)]
    successors: Vec<String>,
    left: Option<String>,
    right: Option<String>,
    left_marking: Marking,
    right_marking: Marking,
}

#[derive(Debug, Clone)]
pub struct Lane {
    pub lane_id: String,
    pub tags: BTreeSet<String>,
    pub points: Vec<Point>,
    cumulative: Vec<f64>,
    pub successors: Vec<String>,
    pub predecessors: Vec<String>,
    pub left: Option<String>,
    pub right: Option<String>,
    pub left_marking: Marking,
    pub right_marking: Marking,
}

impl Lane {
    fn from_wire(w: LaneWire) -> Self {
        let points: Vec<Point> = w.points.iter().map(|p| Point { x: p[0], y: p[1] }).collect();
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                let q = points[i - 1];
                acc += (p.x - q.x).hypot(p.y - q.y);
            }
            cumulative.push(acc);
        }
        Lane {
            lane_id: w.lane_id,
            tags: w.tags.into_iter().collect(),
            points,
            cumulative,
            successors: w.successors,
            predecessors: Vec::new(),
            left: w.left,
            right: w.right,
            left_marking: w.left_marking,
            right_marking: w.right_marking,
        }
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    fn segment_at(&self, s: f64) -> usize {
        let n = self.points.len();
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Heading of the segment `i`.
    pub fn segment_heading(&self, i: usize) -> f64 {
        let a = self.points[i];
        let b = self.points[i + 1];
        (b.y - a.y).atan2(b.x - a.x)
    }

    /// Pose on the centerline at arc length `s`, clamped to the lane. A
    /// lateral `offset` shifts the point to the left of travel.
    pub fn pose_at(&self, s: f64, offset: f64) -> Pose {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let a = self.points[i];
        let b = self.points[i + 1];
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        let t = if seg > 0.0 { (s - self.cumulative[i]) / seg } else { 0.0 };
        let heading = self.segment_heading(i);
        Pose {
            x: a.x + (b.x - a.x) * t - heading.sin() * offset,
            y: a.y + (b.y - a.y) * t + heading.cos() * offset,
            heading,
        }
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.pose_at(s, 0.0).heading
    }

    pub fn project(&self, x: f64, y: f64) -> Projection {
        let mut best: Option<(f64, f64, f64)> = None;
        for i in 0..self.points.len() - 1 {
            let a = self.points[i];
            let b = self.points[i + 1];
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((x - a.x) * dx + (y - a.y) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (fx, fy) = (a.x + dx * t, a.y + dy * t);
            let dist = (x - fx).hypot(y - fy);
            let s = self.cumulative[i] + t * len2.sqrt();
            let cross = dx * (y - a.y) - dy * (x - a.x);
            let offset = if len2 > 0.0 { cross / len2.sqrt() } else { 0.0 };
            if best.map_or(true, |(d, _, _)| dist < d - 1e-12) {
                best = Some((dist, s, offset));
            }
        }
        let (distance, s, offset) = best.expect("lanes have at least two points");
        let len = self.length();
        Projection {
            s,
            offset,
            distance,
            interior: s > 1e-6 && s < len - 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopLine {
    pub id: String,
    pub lane_id: String,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalState {
    Green,
    Yellow,
    Red,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub state: SignalState,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub id: String,
    pub stop_lines: Vec<String>,
    pub phases: Vec<Phase>,
    #[serde(default)]
    pub offset: f64,
}

impl Signal {
    pub fn cycle(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    pub fn state_at(&self, t: f64) -> SignalState {
        let cycle = self.cycle();
        let mut local = (t + self.offset).rem_euclid(cycle);
        for phase in &self.phases {
            if local < phase.duration {
                return phase.state;
            }
            local -= phase.duration;
        }
        self.phases.last().map(|p| p.state).unwrap_or(SignalState::Green)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MapWire {
    map_id: String,
    topology_tags: Vec<String>,
    lane_width: f64,
    speed_limit: f64,
    lanes: Vec<LaneWire>,
    #[serde(default)]
    stop_lines: Vec<StopLine>,
    #[serde(default)]
    signals: Vec<Signal>,
}

/// A waypoint of the lane graph: a lane and an arc length on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointRef {
    pub lane_id: String,
    pub s: f64,
}

#[derive(Debug, Clone)]
pub struct MiniMap {
    pub map_id: String,
    pub topology_tags: BTreeSet<String>,
    pub lane_width: f64,
    /// m/s
    pub speed_limit: f64,
    pub lanes: Vec<Lane>,
    index: BTreeMap<String, usize>,
    pub stop_lines: Vec<StopLine>,
    pub signals: Vec<Signal>,
}

impl MiniMap {
    pub fn from_json(json: &str) -> Result<Self, CorpusError> {
        let wire: MapWire = serde_json::from_str(json).map_err(|e| CorpusError::Map {
            map_id: "<unparsed>".into(),
            reason: e.to_string(),
        })?;
        let bad = |reason: String| CorpusError::Map {
            map_id: wire.map_id.clone(),
            reason,
        };
        if !(wire.lane_width > 0.0) || !(wire.speed_limit > 0.0) {
            return Err(bad("lane width and speed limit must be positive".into()));
        }
        let mut lanes: Vec<Lane> = Vec::with_capacity(wire.lanes.len());
        let mut index = BTreeMap::new();
        for lw in wire.lanes.iter().cloned() {
            if lw.points.len() < 2 {
                return Err(bad(format!("lane `{}` needs at least two points", lw.lane_id)));
            }
            if index.insert(lw.lane_id.clone(), lanes.len()).is_some() {
                return Err(bad(format!("duplicate lane `{}`", lw.lane_id)));
            }
            lanes.push(Lane::from_wire(lw));
        }
        if lanes.is_empty() {
            return Err(bad("map has no lanes".into()));
        }
        for i in 0..lanes.len() {
            if lanes[i].length() <= 0.0 {
                return Err(bad(format!("lane `{}` has zero length", lanes[i].lane_id)));
            }
            for succ in lanes[i].successors.clone() {
                let Some(&j) = index.get(&succ) else {
                    return Err(bad(format!(
                        "lane `{}` lists unknown successor `{succ}`",
                        lanes[i].lane_id
                    )));
                };
                let id = lanes[i].lane_id.clone();
                lanes[j].predecessors.push(id);
            }
        }
        for lane in &lanes {
            for (side, neighbor, marking) in [
                ("left", &lane.left, lane.left_marking),
                ("right", &lane.right, lane.right_marking),
            ] {
                let Some(n) = neighbor else { continue };
                let Some(&j) = index.get(n) else {
                    return Err(bad(format!("lane `{}` {side} neighbor `{n}` is unknown", lane.lane_id)));
                };
                let other = &lanes[j];
                let (back, back_marking) = if side == "left" {
                    (&other.right, other.right_marking)
                } else {
                    (&other.left, other.left_marking)
                };
                if back.as_deref() != Some(lane.lane_id.as_str()) {
                    return Err(bad(format!(
                        "adjacency `{}` {side} `{n}` is not mirrored",
                        lane.lane_id
                    )));
                }
                if back_marking != marking {
                    return Err(bad(format!(
                        "lanes `{}` and `{n}` disagree on their shared marking",
                        lane.lane_id
                    )));
                }
            }
        }
        for sl in &wire.stop_lines {
            let Some(&j) = index.get(&sl.lane_id) else {
                return Err(bad(format!("stop line `{}` on unknown lane", sl.id)));
            };
            if sl.s < 0.0 || sl.s > lanes[j].length() {
                return Err(bad(format!("stop line `{}` lies outside its lane", sl.id)));
            }
        }
        for sig in &wire.signals {
            if sig.phases.is_empty() || sig.phases.iter().any(|p| !(p.duration > 0.0)) {
                return Err(bad(format!("signal `{}` needs positive phase durations", sig.id)));
            }
            for sl in &sig.stop_lines {
                if !wire.stop_lines.iter().any(|x| &x.id == sl) {
                    return Err(bad(format!("signal `{}` controls unknown stop line `{sl}`", sig.id)));
                }
            }
        }
        Ok(MiniMap {
            map_id: wire.map_id,
            topology_tags: wire.topology_tags.into_iter().collect(),
            lane_width: wire.lane_width,
            speed_limit: wire.speed_limit,
            lanes,
            index,
            stop_lines: wire.stop_lines,
            signals: wire.signals,
        })
    }

    pub fn lane(&self, lane_id: &str) -> Option<&Lane> {
        self.index.get(lane_id).map(|&i| &self.lanes[i])
    }

    pub fn has_lane(&self, lane_id: &str) -> bool {
        self.index.contains_key(lane_id)
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.topology_tags.contains(tag)
    }

    /// Lanes nothing flows into; every lane when the graph is cyclic.
    pub fn source_lanes(&self) -> Vec<&Lane> {
        let sources: Vec<&Lane> = self.lanes.iter().filter(|l| l.predecessors.is_empty()).collect();
        if sources.is_empty() {
            self.lanes.iter().collect()
        } else {
            sources
        }
    }

    /// Lanes that lead nowhere; every lane when the graph is cyclic.
    pub fn sink_lanes(&self) -> Vec<&Lane> {
        let sinks: Vec<&Lane> = self.lanes.iter().filter(|l| l.successors.is_empty()).collect();
        if sinks.is_empty() {
            self.lanes.iter().collect()
        } else {
            sinks
        }
    }

    pub fn stop_lines_on(&self, lane_id: &str) -> impl Iterator<Item = &StopLine> {
        let lane_id = lane_id.to_string();
        self.stop_lines.iter().filter(move |s| s.lane_id == lane_id)
    }

    pub fn signal_for(&self, stop_line_id: &str) -> Option<&Signal> {
        self.signals
            .iter()
            .find(|s| s.stop_lines.iter().any(|x| x == stop_line_id))
    }

    pub fn pose(&self, wp: &WaypointRef) -> Option<Pose> {
        self.lane(&wp.lane_id).map(|l| l.pose_at(wp.s, 0.0))
    }

    /// Nearest lane by centerline distance, ties broken by declaration order.
    pub fn nearest_lane(&self, x: f64, y: f64) -> Option<(&Lane, Projection)> {
        self.lanes.iter().map(|l| (l, l.project(x, y))).min_by(|a, b| {
            a.1.distance
                .partial_cmp(&b.1.distance)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(std::f64::consts::TAU);
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}
