//! Reads an emitted `.xosc` tree back into an executable plan.

use std::collections::BTreeSet;

use crate::corpus::{map_id_from_path, DslCorpus, MiniMap, WaypointRef};
use crate::xosc::{XmlElement, XoscDocument};

use super::{timeout_limit, ExecError, MonitorId, MonitorSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum ActorKind {
    Vehicle { category: String },
    Pedestrian,
    Object,
}

impl ActorKind {
    /// Pedestrians and cyclists, which a vehicle must yield to.
    pub fn has_priority(&self) -> bool {
        match self {
            ActorKind::Pedestrian => true,
            ActorKind::Vehicle { category } => category == "bicycle",
            ActorKind::Object => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlannedAction {
    /// Linear ramp to `target` over `duration` seconds; a step when zero.
    Speed {
        target: f64,
        duration: f64,
    },
    /// `delta` > 0 moves to the left neighbor.
    LaneChange {
        delta: i32,
        duration: f64,
    },
    LaneOffset {
        target: f64,
    },
    Autopilot,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlannedTrigger {
    SimulationTime(f64),
    AfterEvent(String),
    DistanceToEgo { entity: String, distance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedEvent {
    pub name: String,
    pub action: PlannedAction,
    pub trigger: PlannedTrigger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedActor {
    pub id: String,
    pub kind: ActorKind,
    pub length: f64,
    pub width: f64,
    pub spawn: WaypointRef,
    pub speed: f64,
    /// Lane sequence of the assigned route, first lane first.
    pub route: Vec<String>,
    pub route_end: Option<WaypointRef>,
    pub events: Vec<PlannedEvent>,
}

#[derive(Debug, Clone)]
pub struct ScenarioPlan<'m> {
    pub map: &'m MiniMap,
    pub road_marker: Option<String>,
    pub traffic_sign: Option<String>,
    pub speed_limit: f64,
    /// The ego comes first.
    pub actors: Vec<PlannedActor>,
    /// Monitors named in the stop trigger, with their threshold values.
    pub monitors: Vec<(MonitorId, f64)>,
}

fn malformed(path: &str, reason: impl Into<String>) -> ExecError {
    ExecError::Malformed {
        path: path.to_string(),
        reason: reason.into(),
    }
}

fn attr<'a>(el: &'a XmlElement, key: &str, path: &str) -> Result<&'a str, ExecError> {
    el.get_attr(key)
        .ok_or_else(|| malformed(path, format!("<{}> lacks `{key}`", el.name)))
}

fn num_attr(el: &XmlElement, key: &str, path: &str) -> Result<f64, ExecError> {
    let raw = attr(el, key, path)?;
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| malformed(path, format!("`{key}`=`{raw}` is not a number")))
}

fn child<'a>(el: &'a XmlElement, name: &str, path: &str) -> Result<&'a XmlElement, ExecError> {
    el.find(name)
        .ok_or_else(|| malformed(path, format!("<{}> lacks <{name}>", el.name)))
}

impl<'m> ScenarioPlan<'m> {
    pub fn from_xosc(doc: &XoscDocument, corpus: &'m DslCorpus) -> Result<Self, ExecError> {
        let root = &doc.root;
        if root.name != "OpenSCENARIO" {
            return Err(malformed("/", format!("root is <{}>", root.name)));
        }
        let logic = root
            .path("RoadNetwork/LogicFile")
            .ok_or_else(|| malformed("RoadNetwork", "no LogicFile"))?;
        let file = attr(logic, "filepath", "RoadNetwork/LogicFile")?;
        let map_id = map_id_from_path(file).ok_or_else(|| malformed("RoadNetwork/LogicFile", "empty filepath"))?;
        let map = corpus
            .maps
            .get(&map_id)
            .ok_or_else(|| ExecError::MapMismatch { map_id: map_id.clone() })?;

        let mut road_marker = None;
        let mut traffic_sign = None;
        let mut speed_limit = map.speed_limit;
        if let Some(params) = root.find("ParameterDeclarations") {
            for p in params.find_all("ParameterDeclaration") {
                let path = "ParameterDeclarations/ParameterDeclaration";
                let value = attr(p, "value", path)?;
                match attr(p, "name", path)? {
                    "RoadMarker" => road_marker = Some(value.to_string()),
                    "TrafficSign" => traffic_sign = Some(value.to_string()),
                    "SpeedLimit" => speed_limit = num_attr(p, "value", path)?,
                    _ => {}
                }
            }
        }
        if !(speed_limit > 0.0) {
            return Err(malformed("ParameterDeclarations", "SpeedLimit must be positive"));
        }

        let entities = child(root, "Entities", "/")?;
        let mut actors = Vec::new();
        for obj in entities.find_all("ScenarioObject") {
            actors.push(Self::entity(obj)?);
        }
        let storyboard = child(root, "Storyboard", "/")?;
        let init = storyboard
            .path("Init/Actions")
            .ok_or_else(|| malformed("Storyboard", "no Init/Actions"))?;
        let mut initialized = BTreeSet::new();
        for private in init.find_all("Private") {
            let id = attr(private, "entityRef", "Init/Private")?;
            let actor = actors
                .iter_mut()
                .find(|a| a.id == id)
                .ok_or_else(|| malformed("Init/Private", format!("unknown entity `{id}`")))?;
            Self::init_actor(actor, private, map)?;
            initialized.insert(id.to_string());
        }
        if let Some(missing) = actors.iter().find(|a| !initialized.contains(&a.id)) {
            return Err(malformed(
                "Init",
                format!("entity `{}` has no initial position", missing.id),
            ));
        }

        for story in storyboard.find_all("Story") {
            for act in story.find_all("Act") {
                for group in act.find_all("ManeuverGroup") {
                    let path = "Story/Act/ManeuverGroup";
                    let actor_ref = group
                        .path("Actors/EntityRef")
                        .ok_or_else(|| malformed(path, "no actor"))?;
                    let id = attr(actor_ref, "entityRef", path)?;
                    let mut events = Vec::new();
                    for maneuver in group.find_all("Maneuver") {
                        for event in maneuver.find_all("Event") {
                            events.push(Self::event(event)?);
                        }
                    }
                    let actor = actors
                        .iter_mut()
                        .find(|a| a.id == id)
                        .ok_or_else(|| malformed(path, format!("unknown entity `{id}`")))?;
                    actor.events.extend(events);
                }
            }
        }

        let ego_index = actors
            .iter()
            .position(|a| a.id == super::sim::EGO)
            .ok_or_else(|| malformed("Entities", "no `ego` entity"))?;
        let ego = actors.remove(ego_index);
        actors.insert(0, ego);

        let mut monitors = Vec::new();
        if let Some(stop) = storyboard.find("StopTrigger") {
            for group in stop.find_all("ConditionGroup") {
                for cond in group.find_all("Condition") {
                    let name = attr(cond, "name", "StopTrigger/Condition")?;
                    let Some(id) = MonitorId::from_condition_name(name) else {
                        continue;
                    };
                    let path = "StopTrigger/Condition";
                    let value_el = cond
                        .descendant("SimulationTimeCondition")
                        .or_else(|| cond.descendant("ParameterCondition"))
                        .ok_or_else(|| malformed(path, format!("`{name}` has no value condition")))?;
                    monitors.push((id, num_attr(value_el, "value", path)?));
                }
            }
        }
        Ok(ScenarioPlan {
            map,
            road_marker,
            traffic_sign,
            speed_limit,
            actors,
            monitors,
        })
    }

    fn entity(obj: &XmlElement) -> Result<PlannedActor, ExecError> {
        let path = "Entities/ScenarioObject";
        let id = attr(obj, "name", path)?.to_string();
        let (kind, body) = if let Some(v) = obj.find("Vehicle") {
            (
                ActorKind::Vehicle {
                    category: attr(v, "vehicleCategory", path)?.to_string(),
                },
                v,
            )
        } else if let Some(p) = obj.find("Pedestrian") {
            (ActorKind::Pedestrian, p)
        } else if let Some(m) = obj.find("MiscObject") {
            (ActorKind::Object, m)
        } else {
            return Err(malformed(path, format!("`{id}` has no object body")));
        };
        let dims = body
            .path("BoundingBox/Dimensions")
            .ok_or_else(|| malformed(path, format!("`{id}` has no bounding box")))?;
        let length = num_attr(dims, "length", path)?;
        let width = num_attr(dims, "width", path)?;
        if !(length > 0.0 && width > 0.0) {
            return Err(malformed(path, format!("`{id}` has a degenerate bounding box")));
        }
        Ok(PlannedActor {
            id,
            kind,
            length,
            width,
            spawn: WaypointRef {
                lane_id: String::new(),
                s: 0.0,
            },
            speed: 0.0,
            route: Vec::new(),
            route_end: None,
            events: Vec::new(),
        })
    }

    fn lane_position(el: &XmlElement, map: &MiniMap, path: &str) -> Result<WaypointRef, ExecError> {
        let lp = el
            .descendant("LanePosition")
            .ok_or_else(|| malformed(path, "no LanePosition"))?;
        let road = attr(lp, "roadId", path)?;
        if road != map.map_id {
            return Err(ExecError::MapMismatch {
                map_id: road.to_string(),
            });
        }
        let lane_id = attr(lp, "laneId", path)?;
        let lane = map.lane(lane_id).ok_or_else(|| ExecError::MapMismatch {
            map_id: format!("{}#{lane_id}", map.map_id),
        })?;
        let s = num_attr(lp, "s", path)?;
        // Emitted positions carry three decimals.
        if s < -1e-3 || s > lane.length() + 1e-3 {
            return Err(malformed(path, format!("s={s} lies outside lane `{lane_id}`")));
        }
        Ok(WaypointRef {
            lane_id: lane_id.to_string(),
            s: s.clamp(0.0, lane.length()),
        })
    }

    fn init_actor(actor: &mut PlannedActor, private: &XmlElement, map: &MiniMap) -> Result<(), ExecError> {
        let path = format!("Init/Private[{}]", actor.id);
        let mut placed = false;
        for action in private.find_all("PrivateAction") {
            if let Some(tp) = action.find("TeleportAction") {
                actor.spawn = Self::lane_position(tp, map, &path)?;
                placed = true;
            } else if let Some(target) = action.descendant("AbsoluteTargetSpeed") {
                let v = num_attr(target, "value", &path)?;
                if v < 0.0 {
                    return Err(malformed(&path, "negative initial speed"));
                }
                actor.speed = v;
            } else if let Some(route) = action.descendant("Route") {
                let mut lanes: Vec<String> = Vec::new();
                let mut last = None;
                for wp in route.find_all("Waypoint") {
                    let w = Self::lane_position(wp, map, &path)?;
                    if lanes.last() != Some(&w.lane_id) {
                        lanes.push(w.lane_id.clone());
                    }
                    last = Some(w);
                }
                actor.route = lanes;
                actor.route_end = last;
            }
        }
        if !placed {
            return Err(malformed(&path, "no TeleportAction"));
        }
        if actor.route.is_empty() {
            actor.route.push(actor.spawn.lane_id.clone());
        }
        Ok(())
    }

    fn event(event: &XmlElement) -> Result<PlannedEvent, ExecError> {
        let path = "Maneuver/Event";
        let name = attr(event, "name", path)?.to_string();
        let action_el = child(event, "Action", path)?;
        let action = if let Some(speed) = action_el.descendant("SpeedAction") {
            let dynamics = child(speed, "SpeedActionDynamics", path)?;
            let target = speed
                .descendant("AbsoluteTargetSpeed")
                .ok_or_else(|| malformed(path, "speed action without target"))?;
            let duration = if dynamics.get_attr("dynamicsShape") == Some("step") {
                0.0
            } else {
                num_attr(dynamics, "value", path)?
            };
            PlannedAction::Speed {
                target: num_attr(target, "value", path)?.max(0.0),
                duration: duration.max(0.0),
            }
        } else if let Some(lc) = action_el.descendant("LaneChangeAction") {
            let dynamics = child(lc, "LaneChangeActionDynamics", path)?;
            let target = lc
                .descendant("RelativeTargetLane")
                .ok_or_else(|| malformed(path, "lane change without relative target"))?;
            PlannedAction::LaneChange {
                delta: num_attr(target, "value", path)?.round() as i32,
                duration: num_attr(dynamics, "value", path)?.max(0.1),
            }
        } else if let Some(lo) = action_el.descendant("LaneOffsetAction") {
            let target = lo
                .descendant("AbsoluteTargetLaneOffset")
                .ok_or_else(|| malformed(path, "lane offset without target"))?;
            PlannedAction::LaneOffset {
                target: num_attr(target, "value", path)?,
            }
        } else if action_el.descendant("ActivateControllerAction").is_some() {
            PlannedAction::Autopilot
        } else {
            return Err(malformed(path, format!("event `{name}` has no supported action")));
        };
        let cond = event
            .path("StartTrigger/ConditionGroup/Condition")
            .ok_or_else(|| malformed(path, format!("event `{name}` has no start condition")))?;
        let trigger = if let Some(c) = cond.descendant("SimulationTimeCondition") {
            PlannedTrigger::SimulationTime(num_attr(c, "value", path)?)
        } else if let Some(c) = cond.descendant("StoryboardElementStateCondition") {
            PlannedTrigger::AfterEvent(attr(c, "storyboardElementRef", path)?.to_string())
        } else if let Some(c) = cond.descendant("RelativeDistanceCondition") {
            let entity = cond
                .path("ByEntityCondition/TriggeringEntities/EntityRef")
                .ok_or_else(|| malformed(path, "distance condition without triggering entity"))?;
            PlannedTrigger::DistanceToEgo {
                entity: attr(entity, "entityRef", path)?.to_string(),
                distance: num_attr(c, "value", path)?,
            }
        } else {
            return Err(malformed(path, format!("event `{name}` has an unsupported condition")));
        };
        Ok(PlannedEvent { name, action, trigger })
    }

    pub fn ego(&self) -> &PlannedActor {
        &self.actors[0]
    }

    /// Length of the ego route from its spawn to its end.
    pub fn ego_route_length(&self) -> f64 {
        let ego = self.ego();
        let mut total = 0.0;
        for (i, id) in ego.route.iter().enumerate() {
            let Some(lane) = self.map.lane(id) else { continue };
            let start = if i == 0 && *id == ego.spawn.lane_id {
                ego.spawn.s
            } else {
                0.0
            };
            let end = match &ego.route_end {
                Some(e) if i + 1 == ego.route.len() && e.lane_id == *id => e.s,
                _ => lane.length(),
            };
            total += (end - start).max(0.0);
        }
        total
    }

    /// Monitors declared by the stop trigger. Without a timeout condition
    /// the limit follows from the ego route length.
    pub fn monitor_spec(&self) -> Result<MonitorSpec, ExecError> {
        let fallback = timeout_limit(self.ego_route_length().max(1.0), self.speed_limit)?;
        let mut spec = MonitorSpec::all(fallback);
        spec.enabled.clear();
        for (id, value) in &self.monitors {
            spec.enabled.insert(*id);
            match id {
                MonitorId::Timeout => spec.timeout_limit = *value,
                MonitorId::SpeedLimit => spec.speed_tolerance = *value,
                MonitorId::OffRoad => spec.off_road_margin = *value,
                MonitorId::StopSign => spec.stop_duration = *value,
                MonitorId::WrongDirection => spec.wrong_direction_time = *value,
                MonitorId::RoadRights => spec.yield_horizon = *value,
                _ => {}
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}
