//! Priority-ranked assembly: static elements are matched tier by tier
//! against the corpus, then participant behaviors are decomposed into
//! action chains on top of the chosen map.

mod decompose;
mod placement;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::routes::{route_from_path, shortest_path};
use crate::corpus::{
    route_random_search, Bindings, CorpusError, DslCorpus, FragmentKind, Lane, MiniMap, RouteCandidate, WaypointRef,
};
use crate::executor::{timeout_limit, MonitorId};
use crate::pipeline::ModelBackend;
use crate::repository::{RepositoryConfig, TierName, NONE};
use crate::representation::{
    has_contradiction, validate, ConsistencyFinding, RuleSet, ScenarioRepresentation, SlotId, TrafficParticipant,
};
use crate::text::{derive_seed, short_hash};
use crate::xosc::{XmlElement, XoscDocument};

pub use decompose::{decompose, ActionName, DecompositionTable};
pub use placement::{position_relative, shift, PlacementError};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("representation has contradictions: {}", .findings.iter().map(|f| f.rule_id.as_str()).collect::<Vec<_>>().join(", "))]
    Contradiction { findings: Vec<ConsistencyFinding> },
    #[error("no map provides `{element}` for {slot}")]
    NoMatchingMap { slot: String, element: String },
    #[error("map `{map_id}` has no route for `{element}` ({slot})")]
    NoRoute {
        slot: String,
        element: String,
        map_id: String,
    },
    #[error("behavior `{behavior}` has no decomposition")]
    UnknownBehavior { behavior: String },
    #[error("decomposition of `{behavior}` is invalid: {reason}")]
    InvalidDecomposition { behavior: String, reason: String },
    #[error("cannot place `{element}` ({slot}): {source}")]
    Placement {
        slot: String,
        element: String,
        #[source]
        source: PlacementError,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Trigger {
    OnStart,
    AfterPrevious,
    OnDistanceToEgo(f64),
}

/// One step of an actor's action chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardAction {
    pub event_name: String,
    pub name: ActionName,
    pub params: Bindings,
    pub trigger: Trigger,
    /// The instantiated `<Action>` fragment.
    pub element: XmlElement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionChain {
    pub actor_id: String,
    pub actions: Vec<StandardAction>,
    pub autopilot_appended: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EntityRole {
    Ego,
    Participant,
    Obstacle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteAssignment {
    pub actor_id: String,
    pub route_id: String,
    pub lanes: Vec<String>,
    pub start: WaypointRef,
    pub end: WaypointRef,
    pub length: f64,
    pub labels: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: String,
    pub role: EntityRole,
    /// The instantiated `<ScenarioObject>` fragment.
    pub object: XmlElement,
    pub spawn: WaypointRef,
    pub speed: f64,
    pub route: Option<RouteAssignment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub description: String,
    pub source_hash: String,
    pub date: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub parameter_type: &'static str,
    pub value: String,
}

/// The assembled scenario, ready for projection to XML.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDocument {
    pub header: Header,
    pub parameters: Vec<Parameter>,
    pub map_id: String,
    pub road_network: XmlElement,
    pub time_of_day: XmlElement,
    pub weather: XmlElement,
    pub entities: Vec<Entity>,
    pub chains: Vec<ActionChain>,
    pub monitors: Vec<MonitorId>,
    /// The instantiated monitor `<Condition>` fragments.
    pub stop_conditions: Vec<XmlElement>,
    pub timeout: f64,
}

impl TargetDocument {
    pub fn to_xosc(&self) -> XoscDocument {
        crate::xosc::project(self)
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn ego(&self) -> &Entity {
        self.entities
            .iter()
            .find(|e| e.role == EntityRole::Ego)
            .expect("documents always carry an ego")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssemblyReport {
    pub seed: u64,
    pub map_id: String,
    /// Tiers in the order they were matched.
    pub tier_order: Vec<TierName>,
    /// Applicable slot to the fragments, maps or routes chosen for it.
    /// Participant slots are keyed `TP.<field>[i]`.
    pub chosen: BTreeMap<String, Vec<String>>,
    /// Applicable slots that could not be honored.
    pub unresolved: Vec<String>,
    pub routes: Vec<RouteAssignment>,
    pub findings: Vec<ConsistencyFinding>,
}

impl AssemblyReport {
    fn choose(&mut self, slot: impl Into<String>, what: impl Into<String>) {
        self.chosen.entry(slot.into()).or_default().push(what.into());
    }

    fn unresolve(&mut self, slot: impl Into<String>) {
        let slot = slot.into();
        self.chosen.remove(&slot);
        if !self.unresolved.contains(&slot) {
            self.unresolved.push(slot);
        }
    }

    fn is_unresolved(&self, slot: &str) -> bool {
        self.unresolved.iter().any(|s| s == slot)
    }
}

/// Slots of `rep` that carry a value, with participant slots indexed.
pub fn applicable_slots(rep: &ScenarioRepresentation) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for slot in SlotId::ALL.into_iter().filter(|s| !s.is_participant()) {
        if rep.get(slot).is_some_and(|v| v != NONE) {
            out.insert(slot.name().to_string());
        }
    }
    for (i, p) in rep.traffic_participants.iter().enumerate() {
        for slot in SlotId::PARTICIPANT {
            if p.get(slot).is_some_and(|v| v != NONE) {
                out.insert(format!("{}[{i}]", slot.name()));
            }
        }
    }
    out
}

/// Tunable geometry and kinematics defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyDefaults {
    pub route_samples: usize,
    pub ego_spawn_s: f64,
    pub participant_gap: f64,
    pub copy_spacing: f64,
    pub obstacle_s: f64,
    /// Participant cruise speed as a fraction of the speed limit.
    pub speed_factor: f64,
    /// Speed change of one accelerate or decelerate action, m/s.
    pub speed_step: f64,
    pub speed_duration: f64,
    pub lane_change_duration: f64,
    pub trigger_distance: f64,
    pub header_date: String,
}

impl Default for AssemblyDefaults {
    fn default() -> Self {
        AssemblyDefaults {
            route_samples: 64,
            ego_spawn_s: 30.0,
            participant_gap: 20.0,
            copy_spacing: 10.0,
            obstacle_s: 70.0,
            speed_factor: 0.8,
            speed_step: 5.0,
            speed_duration: 3.0,
            lane_change_duration: 2.0,
            trigger_distance: 30.0,
            header_date: "2024-01-01T00:00:00".into(),
        }
    }
}

pub struct Assembler<'a> {
    pub corpus: &'a DslCorpus,
    pub repo: &'a RepositoryConfig,
    pub rules: &'a RuleSet,
    pub table: &'a DecompositionTable,
    pub backend: Option<&'a dyn ModelBackend>,
    pub defaults: AssemblyDefaults,
}

/// Assembly with the bundled rules and decomposition table and no model
/// fallback.
pub fn assemble(
    rep: &ScenarioRepresentation,
    corpus: &DslCorpus,
    repo: &RepositoryConfig,
    seed: u64,
) -> Result<(TargetDocument, AssemblyReport), AssemblyError> {
    let rules = RuleSet::bundled();
    let table = DecompositionTable::bundled();
    Assembler::new(corpus, repo, &rules, &table).assemble(rep, seed)
}

fn rng(seed: u64, key: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, key))
}

fn pick<'t, T>(items: &'t [T], seed: u64, key: &str) -> Option<&'t T> {
    items.choose(&mut rng(seed, key))
}

/// Working state threaded through the tier handlers.
struct Build<'m> {
    map: &'m MiniMap,
    library: Vec<RouteCandidate>,
    report: AssemblyReport,
    params: Vec<Parameter>,
    monitors: BTreeSet<MonitorId>,
    /// Ego start lane demanded by a placed temporary change.
    ego_lane_required: Option<String>,
    obstacle: Option<Entity>,
}

fn vehicle_dimensions(category: &str) -> (f64, f64, f64) {
    match category {
        "van" => (5.0, 2.0, 2.0),
        "truck" => (8.0, 2.5, 3.2),
        "bus" => (12.0, 2.55, 3.2),
        "motorbike" => (2.2, 0.8, 1.4),
        "bicycle" => (1.8, 0.6, 1.6),
        _ => (4.5, 1.9, 1.5),
    }
}

fn text(v: &str) -> crate::corpus::ParamValue {
    crate::corpus::ParamValue::Text(v.to_string())
}

fn num(v: f64) -> crate::corpus::ParamValue {
    crate::corpus::ParamValue::Number(v)
}

impl<'a> Assembler<'a> {
    pub fn new(
        corpus: &'a DslCorpus,
        repo: &'a RepositoryConfig,
        rules: &'a RuleSet,
        table: &'a DecompositionTable,
    ) -> Self {
        Assembler {
            corpus,
            repo,
            rules,
            table,
            backend: None,
            defaults: AssemblyDefaults::default(),
        }
    }

    pub fn with_backend(mut self, backend: &'a dyn ModelBackend) -> Self {
        self.backend = Some(backend);
        self
    }

    /// Builds a target document for `rep`. Equal inputs and seed give an
    /// identical document.
    pub fn assemble(
        &self,
        rep: &ScenarioRepresentation,
        seed: u64,
    ) -> Result<(TargetDocument, AssemblyReport), AssemblyError> {
        let findings = validate(rep, self.repo, self.rules);
        if has_contradiction(&findings) {
            return Err(AssemblyError::Contradiction { findings });
        }

        let mut tiers: Vec<TierName> = TierName::ALL.to_vec();
        tiers.sort_by_key(|t| self.repo.tier_priority(*t));
        let static_tiers: Vec<TierName> = tiers
            .iter()
            .copied()
            .filter(|t| !matches!(t, TierName::EgoVehicle | TierName::TrafficParticipants))
            .collect();
        let mut tier_order = static_tiers.clone();
        tier_order.extend(
            tiers
                .iter()
                .copied()
                .filter(|t| matches!(t, TierName::EgoVehicle | TierName::TrafficParticipants)),
        );

        let mut report = AssemblyReport {
            seed,
            map_id: String::new(),
            tier_order,
            chosen: BTreeMap::new(),
            unresolved: Vec::new(),
            routes: Vec::new(),
            findings,
        };

        let (time_of_day, weather) = self.match_climate(rep, &mut report)?;
        let (map, road_network) = self.match_topology(rep, seed, &mut report)?;
        let library = route_random_search(map, self.defaults.route_samples, derive_seed(seed, "routes")).candidates;

        let mut build = Build {
            map,
            library,
            report,
            params: vec![Parameter {
                name: "SpeedLimit".into(),
                parameter_type: "double",
                value: crate::text::fmt_num(map.speed_limit),
            }],
            monitors: [
                MonitorId::Collision,
                MonitorId::Timeout,
                MonitorId::OffRoad,
                MonitorId::WrongDirection,
                MonitorId::RoadRights,
                MonitorId::LaneInvasion,
                MonitorId::SolidLine,
                MonitorId::SpeedLimit,
            ]
            .into_iter()
            .collect(),
            ego_lane_required: None,
            obstacle: None,
        };
        for tier in static_tiers {
            match tier {
                TierName::TransportationFacilities => self.match_facilities(rep, &mut build),
                TierName::TemporaryChanges => self.match_temporary(rep, seed, &mut build)?,
                _ => {}
            }
        }

        let ego = self.place_ego(rep, seed, &mut build)?;
        let mut entities = vec![ego];
        entities.extend(build.obstacle.take());
        let mut chains = Vec::new();
        for (i, p) in rep.traffic_participants.iter().enumerate() {
            let ego_spawn = entities[0].spawn.clone();
            for k in 0..p.count.max(1) {
                let id = if p.count > 1 {
                    format!("npc_{i}_{k}")
                } else {
                    format!("npc_{i}")
                };
                let (entity, chain) = self.place_participant(i, k, &id, p, &ego_spawn, seed, &mut build)?;
                entities.push(entity);
                chains.push(chain);
            }
        }

        let ego = &entities[0];
        let ego_route = ego.route.as_ref().expect("ego always has a route");
        let remaining = (ego_route.length - ego.spawn.s).max(1.0);
        let timeout = timeout_limit(remaining, map.speed_limit).expect("map speed limits are positive");
        let mut stop_conditions = Vec::new();
        for monitor in &build.monitors {
            let frag = self
                .corpus
                .lookup(monitor.code(), Some(FragmentKind::Monitor))
                .into_iter()
                .next()
                .ok_or_else(|| CorpusError::Closure {
                    slot: "monitors".into(),
                    element: monitor.code().into(),
                })?;
            let mut b = Bindings::new();
            if *monitor == MonitorId::Timeout {
                b.insert("timeout".into(), num((timeout * 10.0).ceil() / 10.0));
            }
            stop_conditions.push(frag.instantiate_element(&b)?);
        }

        let mut report = build.report;
        report.map_id = map.map_id.clone();
        for e in &entities {
            if let Some(r) = &e.route {
                report.routes.push(r.clone());
            }
        }
        let doc = TargetDocument {
            header: Header {
                description: rep.source_text.clone(),
                source_hash: short_hash(rep.source_text.as_bytes()),
                date: self.defaults.header_date.clone(),
            },
            parameters: build.params,
            map_id: map.map_id.clone(),
            road_network,
            time_of_day,
            weather,
            entities,
            chains,
            monitors: build.monitors.into_iter().collect(),
            stop_conditions,
            timeout: (timeout * 10.0).ceil() / 10.0,
        };
        Ok((doc, report))
    }

    fn match_climate(
        &self,
        rep: &ScenarioRepresentation,
        report: &mut AssemblyReport,
    ) -> Result<(XmlElement, XmlElement), AssemblyError> {
        let weather_value = rep.climate.weather_type.as_str();
        let density = rep.climate.density.as_str();
        let candidates = self.corpus.lookup(weather_value, Some(FragmentKind::Weather));
        let frag = match candidates.first() {
            Some(f) => {
                report.choose("C.type", &f.fragment_id);
                *f
            }
            None => {
                if weather_value != NONE {
                    report.unresolve("C.type");
                }
                self.corpus
                    .lookup("sunny", Some(FragmentKind::Weather))
                    .into_iter()
                    .next()
                    .ok_or_else(|| CorpusError::Closure {
                        slot: "C.type".into(),
                        element: "sunny".into(),
                    })?
            }
        };
        let mut b = Bindings::new();
        if density != NONE {
            let binding = match (weather_value, density) {
                ("rainy" | "snowy", d) => Some((
                    "precipitation_intensity",
                    match d {
                        "strong" => 0.9,
                        "medium" => 0.5,
                        _ => 0.2,
                    },
                )),
                ("foggy", d) => Some((
                    "fog_range",
                    match d {
                        "strong" => 30.0,
                        "medium" => 100.0,
                        _ => 300.0,
                    },
                )),
                ("cloudy", d) => Some((
                    "sun_intensity",
                    match d {
                        "strong" => 5000.0,
                        "medium" => 20000.0,
                        _ => 50000.0,
                    },
                )),
                _ => None,
            };
            match binding {
                Some((param, v)) if frag.provides(density) => {
                    b.insert(param.into(), num(v));
                    report.choose("C.density", format!("{}:{param}={v}", frag.fragment_id));
                }
                _ => report.unresolve("C.density"),
            }
        }
        let weather = frag.instantiate_element(&b)?;

        let time = rep.climate.time_of_day.as_str();
        let time_frag = self
            .corpus
            .lookup(time, Some(FragmentKind::Weather))
            .into_iter()
            .next()
            .or_else(|| {
                self.corpus
                    .lookup("daytime", Some(FragmentKind::Weather))
                    .into_iter()
                    .next()
            })
            .ok_or_else(|| CorpusError::Closure {
                slot: "C.time".into(),
                element: time.into(),
            })?;
        let clock = match time {
            "nighttime" => "23:00:00",
            "morning" => "08:00:00",
            "dusk" => "19:00:00",
            _ => "12:00:00",
        };
        let mut tb = Bindings::new();
        tb.insert("date_time".into(), text(&format!("2024-06-01T{clock}")));
        if time != NONE {
            if time_frag.provides(time) {
                report.choose("C.time", format!("{}@{clock}", time_frag.fragment_id));
            } else {
                report.unresolve("C.time");
            }
        }
        Ok((time_frag.instantiate_element(&tb)?, weather))
    }

    fn match_topology(
        &self,
        rep: &ScenarioRepresentation,
        seed: u64,
        report: &mut AssemblyReport,
    ) -> Result<(&'a MiniMap, XmlElement), AssemblyError> {
        let topology = rep.road_topology.topology.as_str();
        let lanes = rep.road_topology.lanes.as_str();
        let by_topology: Vec<&MiniMap> = self.corpus.maps.values().filter(|m| m.has_tag(topology)).collect();
        if by_topology.is_empty() {
            return Err(AssemblyError::NoMatchingMap {
                slot: "RT.topology".into(),
                element: topology.into(),
            });
        }
        let by_lanes: Vec<&MiniMap> = by_topology.iter().copied().filter(|m| m.has_tag(lanes)).collect();
        let pool = if lanes == NONE || by_lanes.is_empty() {
            if lanes != NONE {
                report.unresolve("RT.lanes");
            }
            by_topology
        } else {
            by_lanes
        };
        let map = *pick(&pool, seed, "RT").expect("pool is non-empty");
        let frag = self
            .corpus
            .map_fragment(&map.map_id)
            .ok_or_else(|| AssemblyError::NoMatchingMap {
                slot: "RT.topology".into(),
                element: topology.into(),
            })?;
        report.choose("RT.topology", &frag.fragment_id);
        report.choose("RT.topology", &map.map_id);
        if lanes != NONE && !report.is_unresolved("RT.lanes") {
            report.choose("RT.lanes", &map.map_id);
        }
        Ok((map, frag.instantiate_element(&Bindings::new())?))
    }

    fn match_facilities(&self, rep: &ScenarioRepresentation, build: &mut Build<'_>) {
        let marker = rep.transportation_facilities.road_marker.as_str();
        let sign = rep.transportation_facilities.traffic_sign.as_str();
        build.params.push(Parameter {
            name: "RoadMarker".into(),
            parameter_type: "string",
            value: marker.into(),
        });
        if marker != NONE {
            match self.corpus.lookup(marker, Some(FragmentKind::Monitor)).first() {
                Some(f) => build.report.choose("TF.road_marker", &f.fragment_id),
                None => build.report.unresolve("TF.road_marker"),
            }
        }
        let supported = match sign {
            "traffic_light" => !build.map.signals.is_empty(),
            "stop_sign" => !build.map.stop_lines.is_empty(),
            _ => true,
        };
        let effective = if supported { sign } else { NONE };
        build.params.push(Parameter {
            name: "TrafficSign".into(),
            parameter_type: "string",
            value: effective.into(),
        });
        if sign == NONE {
            return;
        }
        let frag = self.corpus.lookup(sign, Some(FragmentKind::Monitor)).into_iter().next();
        match (supported, frag) {
            (true, Some(f)) => {
                build.report.choose("TF.traffic_sign", &f.fragment_id);
                match sign {
                    "traffic_light" => {
                        build.monitors.insert(MonitorId::RedLight);
                    }
                    "stop_sign" => {
                        build.monitors.insert(MonitorId::StopSign);
                    }
                    _ => {}
                }
            }
            _ => build.report.unresolve("TF.traffic_sign"),
        }
    }

    fn match_temporary(
        &self,
        rep: &ScenarioRepresentation,
        seed: u64,
        build: &mut Build<'_>,
    ) -> Result<(), AssemblyError> {
        let kind = rep.temporary_changes.change_type.as_str();
        if kind == NONE {
            return Ok(());
        }
        let relation = rep.temporary_changes.position_relation.as_str();
        let (frag, known) = match self.corpus.lookup(kind, Some(FragmentKind::SpawnActor)).first() {
            Some(f) => (*f, true),
            None => (
                self.corpus
                    .fragment("spawn_obstacle")
                    .ok_or_else(|| CorpusError::Closure {
                        slot: "TC.type".into(),
                        element: kind.into(),
                    })?,
                false,
            ),
        };
        let map = build.map;
        let sources = map.source_lanes();
        let long_enough = |l: &&Lane| l.length() >= self.defaults.obstacle_s + 10.0;
        let candidates: Vec<&Lane> = match relation {
            "left" => sources
                .iter()
                .copied()
                .filter(|l| l.right.is_some())
                .filter(long_enough)
                .collect(),
            "right" => sources
                .iter()
                .copied()
                .filter(|l| l.left.is_some())
                .filter(long_enough)
                .collect(),
            _ => sources.iter().copied().filter(long_enough).collect(),
        };
        let (lane, honored) = match pick(&candidates, seed, "TC") {
            Some(l) => (*l, true),
            None => {
                let fallback: Vec<&Lane> = sources.iter().copied().filter(long_enough).collect();
                match pick(&fallback, seed, "TC") {
                    Some(l) => (*l, false),
                    None => {
                        build.report.unresolve("TC.type");
                        if relation != NONE {
                            build.report.unresolve("TC.position_relation");
                        }
                        return Ok(());
                    }
                }
            }
        };
        let s = self.defaults.obstacle_s.min(0.7 * lane.length());
        let mut b = Bindings::new();
        b.insert("actor_id".into(), text("obstacle_0"));
        b.insert("object_type".into(), text(kind));
        let object = frag.instantiate_element(&b)?;
        if known {
            build.report.choose("TC.type", &frag.fragment_id);
        } else {
            build.report.unresolve("TC.type");
        }
        if relation != NONE {
            if honored {
                build
                    .report
                    .choose("TC.position_relation", format!("{}@{s:.1}", lane.lane_id));
            } else {
                build.report.unresolve("TC.position_relation");
            }
        }
        build.ego_lane_required = Some(match (relation, honored) {
            ("left", true) => lane.right.clone().expect("filtered"),
            ("right", true) => lane.left.clone().expect("filtered"),
            _ => lane.lane_id.clone(),
        });
        build.obstacle = Some(Entity {
            id: "obstacle_0".into(),
            role: EntityRole::Obstacle,
            object,
            spawn: WaypointRef {
                lane_id: lane.lane_id.clone(),
                s,
            },
            speed: 0.0,
            route: None,
        });
        Ok(())
    }

    fn spawn_fragment_for(&self, kind: &str) -> (&'a crate::corpus::Fragment, Option<String>, bool) {
        let found = self
            .corpus
            .lookup(kind, Some(FragmentKind::SpawnActor))
            .into_iter()
            .find(|f| f.param("category").is_some() || f.param("model").is_some());
        match found {
            Some(f) => {
                let category = f.param("category").map(|_| match kind {
                    "motorcycle" => "motorbike".to_string(),
                    other => other.to_string(),
                });
                (f, category, true)
            }
            None => (
                self.corpus.fragment("spawn_vehicle").expect("bundled vehicle fragment"),
                Some("car".into()),
                false,
            ),
        }
    }

    fn route_label(behavior: &str) -> Option<&'static str> {
        match behavior {
            "go_forward" | "change_lane" => Some("go_forward"),
            "turn_left" => Some("turn_left"),
            "turn_right" => Some("turn_right"),
            _ => None,
        }
    }

    fn place_ego(
        &self,
        rep: &ScenarioRepresentation,
        seed: u64,
        build: &mut Build<'_>,
    ) -> Result<Entity, AssemblyError> {
        let ev = &rep.ego_vehicle;
        let category = match ev.vehicle_type.as_str() {
            c @ ("car" | "truck" | "van" | "bus") => c,
            _ => "car",
        };
        let (length, width, height) = vehicle_dimensions(category);
        let frag = self
            .corpus
            .fragment("spawn_vehicle")
            .ok_or_else(|| CorpusError::Closure {
                slot: "EV.type".into(),
                element: category.into(),
            })?;
        let mut b = Bindings::new();
        b.insert("actor_id".into(), text("ego"));
        b.insert("category".into(), text(category));
        b.insert("model".into(), text(&format!("vehicle.{category}")));
        b.insert("length".into(), num(length));
        b.insert("width".into(), num(width));
        b.insert("height".into(), num(height));
        let object = frag.instantiate_element(&b)?;
        if ev.vehicle_type != NONE {
            if ev.vehicle_type == category {
                build
                    .report
                    .choose("EV.type", format!("{}:{category}", frag.fragment_id));
            } else {
                build.report.unresolve("EV.type");
            }
        }

        let behavior = ev.global_behavior.as_str();
        let map = build.map;
        let mut pool: Vec<&RouteCandidate> = match Self::route_label(behavior) {
            Some(label) => build.library.iter().filter(|r| r.has_label(label)).collect(),
            None => build.library.iter().collect(),
        };
        if behavior == "change_lane" {
            let capable: Vec<&RouteCandidate> =
                pool.iter().copied().filter(|r| r.has_label("cut_in_capable")).collect();
            if capable.is_empty() {
                build.report.unresolve("EV.global_behavior");
            } else {
                pool = capable;
            }
        }
        if pool.is_empty() {
            return Err(AssemblyError::NoRoute {
                slot: "EV.global_behavior".into(),
                element: behavior.into(),
                map_id: map.map_id.clone(),
            });
        }
        if let Some(required) = &build.ego_lane_required {
            let constrained: Vec<&RouteCandidate> =
                pool.iter().copied().filter(|r| &r.start.lane_id == required).collect();
            if constrained.is_empty() {
                build.report.unresolve("TC.position_relation");
            } else {
                pool = constrained;
            }
        }
        let position = ev.position.as_str();
        if position != NONE {
            let fits = |r: &&RouteCandidate| {
                let lane = map.lane(&r.start.lane_id).expect("route lane");
                match position {
                    "right_lane" | "roadside" => lane.right.is_none(),
                    "left_lane" => lane.left.is_none(),
                    "middle_lane" => lane.left.is_some() && lane.right.is_some(),
                    _ => false,
                }
            };
            let positioned: Vec<&RouteCandidate> = pool.iter().copied().filter(fits).collect();
            if positioned.is_empty() {
                build.report.unresolve("EV.position");
            } else {
                pool = positioned;
            }
        }
        pool.sort_by(|a, b| a.route_id.cmp(&b.route_id));
        let route = (*pick(&pool, seed, "EV").expect("pool is non-empty")).clone();
        let first = map.lane(&route.start.lane_id).expect("route lane");
        let mut spawn_s = self.defaults.ego_spawn_s.min(0.5 * first.length());
        if let Some(obstacle) = &build.obstacle {
            if obstacle.spawn.lane_id == first.lane_id {
                spawn_s = spawn_s.min((obstacle.spawn.s - 25.0).max(0.0));
            }
        }
        if position != NONE && !build.report.is_unresolved("EV.position") {
            build.report.choose("EV.position", &first.lane_id);
        }
        if behavior != NONE && !build.report.is_unresolved("EV.global_behavior") {
            build.report.choose("EV.global_behavior", &route.route_id);
        }
        let assignment = RouteAssignment {
            actor_id: "ego".into(),
            route_id: route.route_id.clone(),
            lanes: route.lanes.clone(),
            start: WaypointRef {
                lane_id: first.lane_id.clone(),
                s: spawn_s,
            },
            end: route.end.clone(),
            length: route.length,
            labels: route.labels.clone(),
        };
        Ok(Entity {
            id: "ego".into(),
            role: EntityRole::Ego,
            object,
            spawn: WaypointRef {
                lane_id: first.lane_id.clone(),
                s: spawn_s,
            },
            speed: 0.0,
            route: Some(assignment),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn place_participant(
        &self,
        index: usize,
        copy: u32,
        id: &str,
        p: &TrafficParticipant,
        ego_spawn: &WaypointRef,
        seed: u64,
        build: &mut Build<'_>,
    ) -> Result<(Entity, ActionChain), AssemblyError> {
        let map = build.map;
        let slot = |name: &str| format!("{name}[{index}]");
        let kind = p.participant_type.as_str();

        let (frag, category, known) = self.spawn_fragment_for(kind);
        let mut b = Bindings::new();
        b.insert("actor_id".into(), text(id));
        if let Some(category) = &category {
            let (length, width, height) = vehicle_dimensions(category);
            b.insert("category".into(), text(category));
            b.insert("model".into(), text(&format!("vehicle.{category}")));
            b.insert("length".into(), num(length));
            b.insert("width".into(), num(width));
            b.insert("height".into(), num(height));
        }
        let object = frag.instantiate_element(&b)?;
        if copy == 0 {
            if known {
                build
                    .report
                    .choose(slot("TP.type"), format!("{id}:{}", frag.fragment_id));
            } else {
                build.report.unresolve(slot("TP.type"));
            }
        }

        let relation = p.position_relation.as_str();
        let placement_err = |source| AssemblyError::Placement {
            slot: slot("TP.position_relation"),
            element: relation.to_string(),
            source,
        };
        let base = position_relative(map, ego_spawn, relation, self.defaults.participant_gap).map_err(placement_err)?;
        let offset = copy as f64 * self.defaults.copy_spacing;
        let spawn = match relation {
            "behind" | "opposite" | "crossing" => shift(map, &base, -offset),
            _ => shift(map, &base, offset),
        }
        .map_err(placement_err)?;
        if copy == 0 {
            build.report.choose(
                slot("TP.position_relation"),
                format!("{id}@{}:{:.1}", spawn.lane_id, spawn.s),
            );
        }

        // Route from the spawn lane.
        let global = p.global_behavior.as_str();
        let from_lane: Vec<RouteCandidate> = {
            let mut v: Vec<RouteCandidate> = build
                .library
                .iter()
                .filter(|r| r.start.lane_id == spawn.lane_id)
                .cloned()
                .collect();
            if v.is_empty() {
                v = map
                    .sink_lanes()
                    .iter()
                    .filter_map(|sink| shortest_path(map, &spawn.lane_id, &sink.lane_id))
                    .map(|path| route_from_path(map, path))
                    .collect();
            }
            v.sort_by(|a, b| a.route_id.cmp(&b.route_id));
            v
        };
        let wanted = Self::route_label(global);
        let matching: Vec<&RouteCandidate> = match wanted {
            Some(label) => from_lane.iter().filter(|r| r.has_label(label)).collect(),
            None => from_lane.iter().collect(),
        };
        let key = format!("TP{index}.{copy}");
        let route = match pick(&matching, seed, &key) {
            Some(r) => {
                if copy == 0 && global != NONE {
                    build
                        .report
                        .choose(slot("TP.global_behavior"), format!("{id}:{}", r.route_id));
                }
                Some((*r).clone())
            }
            None => {
                if global != NONE {
                    build.report.unresolve(slot("TP.global_behavior"));
                }
                let any: Vec<&RouteCandidate> = from_lane.iter().collect();
                pick(&any, seed, &key).map(|r| (*r).clone())
            }
        };
        let route = route.unwrap_or_else(|| route_from_path(map, vec![spawn.lane_id.clone()]));

        let base_speed = match (kind, global) {
            (_, "stationary") => 0.0,
            ("pedestrian", _) => 1.4,
            ("bicycle", _) => 5.0,
            _ => self.defaults.speed_factor * map.speed_limit,
        };

        let chain = self.build_chain(index, id, p, &spawn, base_speed, build)?;
        let assignment = RouteAssignment {
            actor_id: id.to_string(),
            route_id: route.route_id.clone(),
            lanes: route.lanes.clone(),
            start: spawn.clone(),
            end: route.end.clone(),
            length: route.length,
            labels: route.labels.clone(),
        };
        Ok((
            Entity {
                id: id.to_string(),
                role: EntityRole::Participant,
                object,
                spawn,
                speed: base_speed,
                route: Some(assignment),
            },
            chain,
        ))
    }

    fn build_chain(
        &self,
        index: usize,
        id: &str,
        p: &TrafficParticipant,
        spawn: &WaypointRef,
        base_speed: f64,
        build: &mut Build<'_>,
    ) -> Result<ActionChain, AssemblyError> {
        let map = build.map;
        let mut names = Vec::new();
        for (slot, behavior) in [
            ("TP.longitudinal_oracle", p.longitudinal_oracle.as_str()),
            ("TP.lateral_oracle", p.lateral_oracle.as_str()),
        ] {
            if behavior == NONE {
                continue;
            }
            let actions = decompose(behavior, self.table, self.backend)?;
            build.report.choose(
                format!("{slot}[{index}]"),
                format!(
                    "{id}:{}",
                    actions.iter().map(|a| a.as_str()).collect::<Vec<_>>().join("+")
                ),
            );
            names.extend(actions);
        }
        let mut autopilot = true;
        if p.global_behavior != NONE {
            let actions = decompose(&p.global_behavior, self.table, self.backend)?;
            if actions.contains(&ActionName::Stop) || !actions.contains(&ActionName::Autopilot) {
                autopilot = false;
                names.extend(actions.into_iter().filter(|a| *a != ActionName::Autopilot));
            }
        }
        if autopilot {
            names.push(ActionName::Autopilot);
        }

        let distance_trigger =
            matches!(p.lateral_oracle.as_str(), "cut_in" | "overtake") || p.longitudinal_oracle == "yield";
        let mut lane = map.lane(&spawn.lane_id).expect("placed lane");
        let mut speed = base_speed;
        let mut actions = Vec::with_capacity(names.len());
        for (j, name) in names.into_iter().enumerate() {
            let resolved = match name {
                ActionName::ChangeLane => {
                    if lane.left.is_some() {
                        ActionName::ChangeLaneLeft
                    } else {
                        ActionName::ChangeLaneRight
                    }
                }
                other => other,
            };
            let event_name = format!("{id}_e{j}_{}", resolved.as_str());
            let mut params = Bindings::new();
            params.insert("action_name".into(), text(&event_name));
            match resolved {
                ActionName::Accelerate => {
                    speed += self.defaults.speed_step;
                    params.insert("target_speed".into(), num(speed));
                    params.insert("duration".into(), num(self.defaults.speed_duration));
                }
                ActionName::Decelerate => {
                    speed = (speed - self.defaults.speed_step).max(0.0);
                    params.insert("target_speed".into(), num(speed));
                    params.insert("duration".into(), num(self.defaults.speed_duration));
                }
                ActionName::Cruise => {
                    speed = base_speed;
                    params.insert("target_speed".into(), num(speed));
                    params.insert("duration".into(), num(self.defaults.speed_duration));
                }
                ActionName::Stop | ActionName::Yield => {
                    let duration = (speed / 3.0).clamp(1.0, 60.0);
                    speed = 0.0;
                    params.insert("duration".into(), num((duration * 10.0).round() / 10.0));
                }
                ActionName::ChangeLaneLeft | ActionName::ChangeLaneRight => {
                    params.insert("actor_id".into(), text(id));
                    params.insert("duration".into(), num(self.defaults.lane_change_duration));
                    let next = if resolved == ActionName::ChangeLaneLeft {
                        &lane.left
                    } else {
                        &lane.right
                    };
                    if let Some(next) = next.as_ref().and_then(|n| map.lane(n)) {
                        lane = next;
                    }
                }
                ActionName::KeepLane | ActionName::Autopilot | ActionName::ChangeLane => {}
            }
            let fragment = self
                .corpus
                .lookup(resolved.as_str(), None)
                .into_iter()
                .find(|f| matches!(f.kind, FragmentKind::Event | FragmentKind::Autopilot))
                .ok_or_else(|| AssemblyError::UnknownBehavior {
                    behavior: resolved.as_str().into(),
                })?;
            let element = fragment.instantiate_element(&params)?;
            let trigger = match (j, distance_trigger) {
                (0, true) => Trigger::OnDistanceToEgo(self.defaults.trigger_distance),
                (0, false) => Trigger::OnStart,
                _ => Trigger::AfterPrevious,
            };
            actions.push(StandardAction {
                event_name,
                name: resolved,
                params,
                trigger,
                element,
            });
        }
        Ok(ActionChain {
            actor_id: id.to_string(),
            actions,
            autopilot_appended: autopilot,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::tests::left_turn;

    fn run(rep: &ScenarioRepresentation, seed: u64) -> Result<(TargetDocument, AssemblyReport), AssemblyError> {
        assemble(rep, &DslCorpus::bundled(), &RepositoryConfig::bundled(), seed)
    }

    #[test]
    fn left_turn_assembles() {
        let mut rep = left_turn();
        rep.ego_vehicle.position = "left_lane".into();
        let (doc, report) = run(&rep, 1).unwrap();
        assert_eq!(doc.map_id, "intersection_4way");
        let ego = doc.ego();
        assert!(ego.route.as_ref().unwrap().labels.contains("turn_left"));
        assert_eq!(doc.chains.len(), 1);
        let chain = &doc.chains[0];
        let names: Vec<ActionName> = chain.actions.iter().map(|a| a.name).collect();
        assert_eq!(
            names,
            vec![
                ActionName::Decelerate,
                ActionName::Stop,
                ActionName::Cruise,
                ActionName::KeepLane,
                ActionName::Autopilot
            ]
        );
        assert!(chain.autopilot_appended);
        assert!(report.unresolved.is_empty(), "{:?}", report.unresolved);
        let npc = doc.entity("npc_0").unwrap();
        let opposite = match &ego.spawn.lane_id[..1] {
            "s" => "n",
            "n" => "s",
            "e" => "w",
            _ => "e",
        };
        assert_eq!(npc.spawn.lane_id, format!("{opposite}_in_inner"));
    }

    #[test]
    fn resolved_and_unresolved_partition_applicable_slots() {
        let rep = left_turn();
        let (_, report) = run(&rep, 3).unwrap();
        let resolved: BTreeSet<String> = report.chosen.keys().cloned().collect();
        let unresolved: BTreeSet<String> = report.unresolved.iter().cloned().collect();
        assert!(resolved.is_disjoint(&unresolved));
        let union: BTreeSet<String> = resolved.union(&unresolved).cloned().collect();
        assert_eq!(union, applicable_slots(&rep));
    }

    #[test]
    fn deterministic_for_equal_seed() {
        let rep = left_turn();
        let (a, _) = run(&rep, 5).unwrap();
        let (b, _) = run(&rep, 5).unwrap();
        assert_eq!(a.to_xosc().to_bytes(), b.to_xosc().to_bytes());
    }

    #[test]
    fn contradiction_is_refused() {
        let mut rep = left_turn();
        rep.transportation_facilities.road_marker = "broken_line".into();
        assert!(matches!(run(&rep, 0), Err(AssemblyError::Contradiction { .. })));
    }

    #[test]
    fn participant_on_missing_neighbor_fails_placement() {
        let mut rep = left_turn();
        rep.road_topology.topology = "t_junction".into();
        rep.road_topology.lanes = "single_lane".into();
        rep.traffic_participants[0].position_relation = "left".into();
        assert!(matches!(run(&rep, 0), Err(AssemblyError::Placement { .. })));
    }

    #[test]
    fn cut_in_on_straight_road() {
        let mut rep = left_turn();
        rep.road_topology.topology = "straight_road".into();
        rep.road_topology.lanes = "two_lanes".into();
        rep.ego_vehicle.global_behavior = "go_forward".into();
        rep.ego_vehicle.position = "right_lane".into();
        let p = &mut rep.traffic_participants[0];
        p.position_relation = "left".into();
        p.longitudinal_oracle = "none".into();
        p.lateral_oracle = "cut_in".into();
        let (doc, _) = run(&rep, 2).unwrap();
        assert_eq!(doc.ego().spawn.lane_id, "r1");
        let chain = &doc.chains[0];
        assert_eq!(chain.actions[0].trigger, Trigger::OnDistanceToEgo(30.0));
        assert_eq!(chain.actions[1].name, ActionName::ChangeLaneRight);
    }

    #[test]
    fn counts_spawn_copies() {
        let mut rep = left_turn();
        rep.traffic_participants[0].count = 3;
        let (doc, _) = run(&rep, 0).unwrap();
        let npcs: Vec<&Entity> = doc
            .entities
            .iter()
            .filter(|e| e.role == EntityRole::Participant)
            .collect();
        assert_eq!(npcs.len(), 3);
        assert!(npcs[0].spawn.s > npcs[1].spawn.s);
    }

    #[test]
    fn obstacle_in_front_pins_ego_lane() {
        let mut rep = left_turn();
        rep.road_topology.topology = "highway".into();
        rep.road_topology.lanes = "three_lanes".into();
        rep.ego_vehicle.global_behavior = "go_forward".into();
        rep.ego_vehicle.position = "middle_lane".into();
        rep.temporary_changes.change_type = "cone_barrel".into();
        rep.temporary_changes.position_relation = "right".into();
        rep.traffic_participants.clear();
        let corpus = DslCorpus::bundled();
        let map = &corpus.maps["highway_3lane"];
        for seed in 0..5 {
            let (doc, report) = run(&rep, seed).unwrap();
            let obstacle = doc.entity("obstacle_0").unwrap();
            let lane = map.lane(&obstacle.spawn.lane_id).unwrap();
            assert_eq!(Some(&doc.ego().spawn.lane_id), lane.left.as_ref());
            assert!(
                doc.ego().spawn.s + 25.0 <= obstacle.spawn.s + 1e-9
                    || doc.ego().spawn.lane_id != obstacle.spawn.lane_id
            );
            // The temporary change outranks the ego position.
            if doc.ego().spawn.lane_id == "h2" {
                assert!(report.unresolved.is_empty(), "{:?}", report.unresolved);
            } else {
                assert_eq!(report.unresolved, vec!["EV.position".to_string()]);
            }
        }
    }
}
