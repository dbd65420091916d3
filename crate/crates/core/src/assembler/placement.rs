use thiserror::Error;

use crate::corpus::{Lane, MiniMap, WaypointRef};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("gap must be positive, got {0}")]
    InvalidGap(f64),
    #[error("unknown lane `{0}`")]
    UnknownLane(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("position s={s:.1} falls off lane `{lane_id}` (length {length:.1})")]
    OffMap { lane_id: String, s: f64, length: f64 },
    #[error("no lane stands `{relation}` of lane `{lane_id}`")]
    NoAdjacentLane { relation: String, lane_id: String },
}

fn direction(lane: &Lane, s: f64) -> (f64, f64) {
    let h = lane.heading_at(s);
    (h.cos(), h.sin())
}

fn within(lane: &Lane, s: f64) -> Result<f64, PlacementError> {
    if s < 0.0 || s > lane.length() {
        Err(PlacementError::OffMap {
            lane_id: lane.lane_id.clone(),
            s,
            length: lane.length(),
        })
    } else {
        Ok(s)
    }
}

/// A source lane approaching the same junction as `ego_lane`, chosen by the
/// heading test, closest end point first. The result sits as far from its
/// lane end as the ego sits from its own.
fn approaching(
    map: &MiniMap,
    ego_lane: &Lane,
    ego_s: f64,
    accept: impl Fn(f64) -> bool,
    relation: &str,
) -> Result<WaypointRef, PlacementError> {
    let (ex, ey) = direction(ego_lane, ego_lane.length());
    let end = ego_lane.pose_at(ego_lane.length(), 0.0);
    let mut best: Option<(&Lane, f64)> = None;
    for lane in map.source_lanes() {
        if lane.lane_id == ego_lane.lane_id {
            continue;
        }
        let (lx, ly) = direction(lane, lane.length());
        if !accept(ex * lx + ey * ly) {
            continue;
        }
        let p = lane.pose_at(lane.length(), 0.0);
        let d = (p.x - end.x).hypot(p.y - end.y);
        if best.map_or(true, |(_, bd)| d < bd - 1e-9) {
            best = Some((lane, d));
        }
    }
    let (lane, _) = best.ok_or_else(|| PlacementError::NoAdjacentLane {
        relation: relation.to_string(),
        lane_id: ego_lane.lane_id.clone(),
    })?;
    let to_end = ego_lane.length() - ego_s;
    let s = (lane.length() - to_end).max(0.0);
    Ok(WaypointRef {
        lane_id: lane.lane_id.clone(),
        s,
    })
}

/// Places an actor relative to the ego spawn point.
///
/// `front`/`behind` move `gap` metres along the ego lane; `left`/`right`
/// take the adjacent lane at the nearest arc length; `opposite` and
/// `crossing` pick the closest approach lane whose heading opposes or
/// crosses the ego's.
pub fn position_relative(
    map: &MiniMap,
    ego: &WaypointRef,
    relation: &str,
    gap: f64,
) -> Result<WaypointRef, PlacementError> {
    if !(gap > 0.0) {
        return Err(PlacementError::InvalidGap(gap));
    }
    let lane = map
        .lane(&ego.lane_id)
        .ok_or_else(|| PlacementError::UnknownLane(ego.lane_id.clone()))?;
    match relation {
        "front" => Ok(WaypointRef {
            lane_id: lane.lane_id.clone(),
            s: within(lane, ego.s + gap)?,
        }),
        "behind" => Ok(WaypointRef {
            lane_id: lane.lane_id.clone(),
            s: within(lane, ego.s - gap)?,
        }),
        "left" | "right" => {
            let neighbor = if relation == "left" { &lane.left } else { &lane.right };
            let id = neighbor.as_ref().ok_or_else(|| PlacementError::NoAdjacentLane {
                relation: relation.to_string(),
                lane_id: lane.lane_id.clone(),
            })?;
            let other = map.lane(id).ok_or_else(|| PlacementError::UnknownLane(id.clone()))?;
            let p = lane.pose_at(ego.s, 0.0);
            Ok(WaypointRef {
                lane_id: other.lane_id.clone(),
                s: other.project(p.x, p.y).s,
            })
        }
        "opposite" => approaching(map, lane, ego.s, |dot| dot < -0.7, relation),
        "crossing" => approaching(map, lane, ego.s, |dot| dot.abs() < 0.3, relation),
        other => Err(PlacementError::UnknownRelation(other.to_string())),
    }
}

/// Shifts a waypoint along its lane, failing when it leaves the lane.
pub fn shift(map: &MiniMap, wp: &WaypointRef, ds: f64) -> Result<WaypointRef, PlacementError> {
    let lane = map
        .lane(&wp.lane_id)
        .ok_or_else(|| PlacementError::UnknownLane(wp.lane_id.clone()))?;
    Ok(WaypointRef {
        lane_id: wp.lane_id.clone(),
        s: within(lane, wp.s + ds)?,
    })
}
