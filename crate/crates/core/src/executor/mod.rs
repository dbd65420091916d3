//! Kinematic replay of an emitted scenario on its mini-map, with
//! frame-by-frame rule monitors.

pub mod fixtures;
pub mod geometry;
mod plan;
mod sim;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DslCorpus;
use crate::metrics::DomainError;
use crate::xosc::XoscDocument;

pub use geometry::Obb;
pub use plan::{ActorKind, PlannedAction, PlannedActor, PlannedEvent, PlannedTrigger, ScenarioPlan};
pub use sim::{ActorState, Simulation, WorldState};

/// Fixed simulation step, seconds.
pub const DT: f64 = 0.1;

/// Fraction of the speed limit used as the average speed a route must be
/// driven at before the scenario times out.
pub const TIMEOUT_SPEED_FRACTION: f64 = 0.10;

/// Seconds allowed for a route: its length over a tenth of the speed limit.
pub fn timeout_limit(route_length: f64, speed_limit: f64) -> Result<f64, DomainError> {
    if !(route_length > 0.0) || !route_length.is_finite() {
        return Err(DomainError::new(format!(
            "route length must be positive, got {route_length}"
        )));
    }
    if !(speed_limit > 0.0) || !speed_limit.is_finite() {
        return Err(DomainError::new(format!(
            "speed limit must be positive, got {speed_limit}"
        )));
    }
    Ok(route_length / (TIMEOUT_SPEED_FRACTION * speed_limit))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MonitorId {
    Collision,
    Timeout,
    OffRoad,
    WrongDirection,
    RoadRights,
    LaneInvasion,
    SolidLine,
    SpeedLimit,
    RedLight,
    StopSign,
}

impl MonitorId {
    pub const ALL: [MonitorId; 10] = [
        MonitorId::RedLight,
        MonitorId::StopSign,
        MonitorId::SpeedLimit,
        MonitorId::LaneInvasion,
        MonitorId::SolidLine,
        MonitorId::WrongDirection,
        MonitorId::RoadRights,
        MonitorId::OffRoad,
        MonitorId::Collision,
        MonitorId::Timeout,
    ];

    /// Short metric id used in reports.
    pub fn code(self) -> &'static str {
        match self {
            MonitorId::Collision => "C",
            MonitorId::Timeout => "TO",
            MonitorId::OffRoad => "OR",
            MonitorId::WrongDirection => "WD",
            MonitorId::RoadRights => "VRR",
            MonitorId::LaneInvasion => "LI",
            MonitorId::SolidLine => "CSL",
            MonitorId::SpeedLimit => "RSL",
            MonitorId::RedLight => "RRL",
            MonitorId::StopSign => "RSS",
        }
    }

    /// Name of the stop-trigger condition that enables this monitor.
    pub fn condition_name(self) -> &'static str {
        match self {
            MonitorId::Collision => "criteria_CollisionTest",
            MonitorId::Timeout => "criteria_Timeout",
            MonitorId::OffRoad => "criteria_OffRoadTest",
            MonitorId::WrongDirection => "criteria_WrongLaneTest",
            MonitorId::RoadRights => "criteria_YieldToPriorityTest",
            MonitorId::LaneInvasion => "criteria_KeepLaneTest",
            MonitorId::SolidLine => "criteria_CrossingSolidLineTest",
            MonitorId::SpeedLimit => "criteria_MaxVelocityTest",
            MonitorId::RedLight => "criteria_RunningRedLightTest",
            MonitorId::StopSign => "criteria_RunningStopTest",
        }
    }

    pub fn from_condition_name(name: &str) -> Option<MonitorId> {
        MonitorId::ALL.into_iter().find(|m| m.condition_name() == name)
    }
}

impl fmt::Display for MonitorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for MonitorId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MonitorId::ALL
            .into_iter()
            .find(|m| m.code().eq_ignore_ascii_case(s) || m.condition_name() == s)
            .ok_or_else(|| format!("unknown monitor `{s}`"))
    }
}

/// Which monitors run and their thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSpec {
    pub enabled: BTreeSet<MonitorId>,
    /// Seconds.
    pub timeout_limit: f64,
    /// Fraction above the speed limit tolerated before RSL fires.
    pub speed_tolerance: f64,
    /// Metres beyond one lane width from the nearest centerline.
    pub off_road_margin: f64,
    /// Seconds of standstill required before a stop line.
    pub stop_duration: f64,
    /// Seconds of travel against the lane before WD fires.
    pub wrong_direction_time: f64,
    /// Seconds of look-ahead for priority-actor conflicts.
    pub yield_horizon: f64,
}

impl MonitorSpec {
    pub fn all(timeout_limit: f64) -> Self {
        MonitorSpec {
            enabled: MonitorId::ALL.into_iter().collect(),
            timeout_limit,
            speed_tolerance: 0.05,
            off_road_margin: 0.5,
            stop_duration: 1.0,
            wrong_direction_time: 1.0,
            yield_horizon: 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.timeout_limit > 0.0) || !self.timeout_limit.is_finite() {
            return Err(DomainError::new("timeout limit must be positive"));
        }
        for (name, v) in [
            ("speed tolerance", self.speed_tolerance),
            ("off-road margin", self.off_road_margin),
            ("stop duration", self.stop_duration),
            ("wrong-direction time", self.wrong_direction_time),
            ("yield horizon", self.yield_horizon),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(DomainError::new(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// One ego sample of a scripted trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

/// The stand-in for a system under test driving the ego.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum EgoPolicy {
    /// Replays a time-stamped trace, linearly interpolated. After the last
    /// sample the ego holds its pose at rest.
    Scripted { trace: Vec<TraceSample> },
    /// Follows the ego route at a fraction of the speed limit, stopping for
    /// red signals and stop signs.
    LaneFollow { speed_fraction: f64 },
}

impl EgoPolicy {
    pub fn lane_follow() -> Self {
        EgoPolicy::LaneFollow { speed_fraction: 0.9 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EgoPolicy::Scripted { .. } => "scripted",
            EgoPolicy::LaneFollow { .. } => "lane_follow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationEvent {
    pub monitor: MonitorId,
    pub time: f64,
    pub actor: String,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    GoalReached,
    Collision,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub map_id: String,
    pub ego_policy: String,
    pub monitors: Vec<MonitorId>,
    pub timeout_limit: f64,
    pub duration: f64,
    pub frames: u64,
    pub outcome: Outcome,
    /// Event count per metric id; every id is present.
    pub counts: BTreeMap<String, u32>,
    pub events: Vec<ViolationEvent>,
}

impl EvaluationReport {
    pub fn count(&self, monitor: MonitorId) -> u32 {
        self.counts.get(monitor.code()).copied().unwrap_or(0)
    }

    pub fn violations(&self) -> usize {
        self.events.len()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("scenario references map `{map_id}`, which the corpus does not provide")]
    MapMismatch { map_id: String },
    #[error("malformed scenario at {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Replays `plan` under `spec` with the given ego policy.
pub fn run(plan: &ScenarioPlan<'_>, spec: &MonitorSpec, policy: &EgoPolicy) -> Result<EvaluationReport, ExecError> {
    spec.validate()?;
    Ok(sim::simulate(plan, spec, policy))
}

/// Plans and replays an emitted document with the monitors its stop
/// trigger declares.
pub fn run_document(doc: &XoscDocument, corpus: &DslCorpus, policy: &EgoPolicy) -> Result<EvaluationReport, ExecError> {
    let plan = ScenarioPlan::from_xosc(doc, corpus)?;
    let spec = plan.monitor_spec()?;
    run(&plan, &spec, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timeout_examples() {
        assert!((timeout_limit(500.0, 13.889).unwrap() - 360.0).abs() < 0.1);
        assert_eq!(timeout_limit(100.0, 10.0).unwrap(), 100.0);
        assert!(timeout_limit(0.0, 10.0).is_err());
        assert!(timeout_limit(10.0, -1.0).is_err());
    }

    #[test]
    fn monitor_names_round_trip() {
        for m in MonitorId::ALL {
            assert_eq!(MonitorId::from_condition_name(m.condition_name()), Some(m));
            assert_eq!(m.code().parse::<MonitorId>().unwrap(), m);
        }
    }
}
