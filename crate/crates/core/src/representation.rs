//! The structured scenario representation, its JSON codec, and the
//! cross-slot consistency rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::repository::{RepositoryConfig, NONE};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Climate {
    pub weather_type: String,
    pub density: String,
    pub time_of_day: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoadTopology {
    pub topology: String,
    pub lanes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransportationFacilities {
    pub road_marker: String,
    pub traffic_sign: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemporaryChanges {
    pub change_type: String,
    pub position_relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EgoVehicle {
    pub vehicle_type: String,
    pub position: String,
    pub global_behavior: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrafficParticipant {
    pub participant_type: String,
    pub position_relation: String,
    pub longitudinal_oracle: String,
    pub lateral_oracle: String,
    pub global_behavior: String,
    pub count: u32,
}

impl TrafficParticipant {
    pub fn get(&self, slot: SlotId) -> Option<&str> {
        Some(match slot {
            SlotId::TpType => &self.participant_type,
            SlotId::TpPositionRelation => &self.position_relation,
            SlotId::TpLongitudinal => &self.longitudinal_oracle,
            SlotId::TpLateral => &self.lateral_oracle,
            SlotId::TpGlobalBehavior => &self.global_behavior,
            _ => return None,
        })
    }

    pub fn get_mut(&mut self, slot: SlotId) -> Option<&mut String> {
        Some(match slot {
            SlotId::TpType => &mut self.participant_type,
            SlotId::TpPositionRelation => &mut self.position_relation,
            SlotId::TpLongitudinal => &mut self.longitudinal_oracle,
            SlotId::TpLateral => &mut self.lateral_oracle,
            SlotId::TpGlobalBehavior => &mut self.global_behavior,
            _ => return None,
        })
    }

    /// Key used to align participants across candidates.
    pub fn sort_key(&self) -> (String, String) {
        (self.participant_type.clone(), self.position_relation.clone())
    }
}

/// A parsed scenario: one value per scalar slot plus a participant list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioRepresentation {
    pub climate: Climate,
    pub road_topology: RoadTopology,
    pub transportation_facilities: TransportationFacilities,
    pub temporary_changes: TemporaryChanges,
    pub ego_vehicle: EgoVehicle,
    pub traffic_participants: Vec<TrafficParticipant>,
    pub source_text: String,
}

/// The 17 element slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SlotId {
    RtTopology,
    RtLanes,
    TfRoadMarker,
    TfTrafficSign,
    TcType,
    TcPositionRelation,
    TpType,
    TpPositionRelation,
    TpLongitudinal,
    TpLateral,
    TpGlobalBehavior,
    CType,
    CDensity,
    CTime,
    EvType,
    EvPosition,
    EvGlobalBehavior,
}

impl SlotId {
    pub const ALL: [SlotId; 17] = [
        SlotId::RtTopology,
        SlotId::RtLanes,
        SlotId::TfRoadMarker,
        SlotId::TfTrafficSign,
        SlotId::TcType,
        SlotId::TcPositionRelation,
        SlotId::TpType,
        SlotId::TpPositionRelation,
        SlotId::TpLongitudinal,
        SlotId::TpLateral,
        SlotId::TpGlobalBehavior,
        SlotId::CType,
        SlotId::CDensity,
        SlotId::CTime,
        SlotId::EvType,
        SlotId::EvPosition,
        SlotId::EvGlobalBehavior,
    ];

    pub const PARTICIPANT: [SlotId; 5] = [
        SlotId::TpType,
        SlotId::TpPositionRelation,
        SlotId::TpLongitudinal,
        SlotId::TpLateral,
        SlotId::TpGlobalBehavior,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SlotId::RtTopology => "RT.topology",
            SlotId::RtLanes => "RT.lanes",
            SlotId::TfRoadMarker => "TF.road_marker",
            SlotId::TfTrafficSign => "TF.traffic_sign",
            SlotId::TcType => "TC.type",
            SlotId::TcPositionRelation => "TC.position_relation",
            SlotId::TpType => "TP.type",
            SlotId::TpPositionRelation => "TP.position_relation",
            SlotId::TpLongitudinal => "TP.longitudinal_oracle",
            SlotId::TpLateral => "TP.lateral_oracle",
            SlotId::TpGlobalBehavior => "TP.global_behavior",
            SlotId::CType => "C.type",
            SlotId::CDensity => "C.density",
            SlotId::CTime => "C.time",
            SlotId::EvType => "EV.type",
            SlotId::EvPosition => "EV.position",
            SlotId::EvGlobalBehavior => "EV.global_behavior",
        }
    }

    pub fn is_participant(self) -> bool {
        Self::PARTICIPANT.contains(&self)
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SlotId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SlotId::ALL
            .into_iter()
            .find(|slot| slot.name() == s)
            .ok_or_else(|| format!("unknown slot `{s}`"))
    }
}

impl ScenarioRepresentation {
    /// A representation with every slot set to `none` and no participants.
    pub fn empty(source_text: impl Into<String>) -> Self {
        let n = || NONE.to_string();
        ScenarioRepresentation {
            climate: Climate {
                weather_type: n(),
                density: n(),
                time_of_day: n(),
            },
            road_topology: RoadTopology {
                topology: n(),
                lanes: n(),
            },
            transportation_facilities: TransportationFacilities {
                road_marker: n(),
                traffic_sign: n(),
            },
            temporary_changes: TemporaryChanges {
                change_type: n(),
                position_relation: n(),
            },
            ego_vehicle: EgoVehicle {
                vehicle_type: n(),
                position: n(),
                global_behavior: n(),
            },
            traffic_participants: Vec::new(),
            source_text: source_text.into(),
        }
    }

    /// Value of a scalar slot; `None` for participant slots.
    pub fn get(&self, slot: SlotId) -> Option<&str> {
        Some(match slot {
            SlotId::RtTopology => &self.road_topology.topology,
            SlotId::RtLanes => &self.road_topology.lanes,
            SlotId::TfRoadMarker => &self.transportation_facilities.road_marker,
            SlotId::TfTrafficSign => &self.transportation_facilities.traffic_sign,
            SlotId::TcType => &self.temporary_changes.change_type,
            SlotId::TcPositionRelation => &self.temporary_changes.position_relation,
            SlotId::CType => &self.climate.weather_type,
            SlotId::CDensity => &self.climate.density,
            SlotId::CTime => &self.climate.time_of_day,
            SlotId::EvType => &self.ego_vehicle.vehicle_type,
            SlotId::EvPosition => &self.ego_vehicle.position,
            SlotId::EvGlobalBehavior => &self.ego_vehicle.global_behavior,
            _ => return None,
        })
    }

    pub fn get_mut(&mut self, slot: SlotId) -> Option<&mut String> {
        Some(match slot {
            SlotId::RtTopology => &mut self.road_topology.topology,
            SlotId::RtLanes => &mut self.road_topology.lanes,
            SlotId::TfRoadMarker => &mut self.transportation_facilities.road_marker,
            SlotId::TfTrafficSign => &mut self.transportation_facilities.traffic_sign,
            SlotId::TcType => &mut self.temporary_changes.change_type,
            SlotId::TcPositionRelation => &mut self.temporary_changes.position_relation,
            SlotId::CType => &mut self.climate.weather_type,
            SlotId::CDensity => &mut self.climate.density,
            SlotId::CTime => &mut self.climate.time_of_day,
            SlotId::EvType => &mut self.ego_vehicle.vehicle_type,
            SlotId::EvPosition => &mut self.ego_vehicle.position,
            SlotId::EvGlobalBehavior => &mut self.ego_vehicle.global_behavior,
            _ => return None,
        })
    }

    /// Every value the slot holds: one for scalar slots, one per participant
    /// otherwise.
    pub fn values(&self, slot: SlotId) -> Vec<&str> {
        if slot.is_participant() {
            self.traffic_participants.iter().filter_map(|p| p.get(slot)).collect()
        } else {
            self.get(slot).into_iter().collect()
        }
    }
}

#[derive(Debug, Error)]
pub enum RepresentationError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation: {}", .problems.join("; "))]
    Schema { problems: Vec<String> },
}

/// Pretty JSON with a trailing newline, fields in declaration order.
pub fn serialize(rep: &ScenarioRepresentation) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(rep).expect("representation always serializes");
    bytes.push(b'\n');
    bytes
}

#[derive(Clone, Copy)]
enum Shape {
    Str,
    Count,
    Object(&'static [(&'static str, Shape, bool)]),
    Array(&'static Shape),
}

const CLIMATE: &[(&str, Shape, bool)] = &[
    ("weather_type", Shape::Str, true),
    ("density", Shape::Str, true),
    ("time_of_day", Shape::Str, true),
];
const ROAD: &[(&str, Shape, bool)] = &[("topology", Shape::Str, true), ("lanes", Shape::Str, true)];
const FACILITIES: &[(&str, Shape, bool)] = &[("road_marker", Shape::Str, true), ("traffic_sign", Shape::Str, true)];
const CHANGES: &[(&str, Shape, bool)] = &[
    ("change_type", Shape::Str, true),
    ("position_relation", Shape::Str, true),
];
const EGO: &[(&str, Shape, bool)] = &[
    ("vehicle_type", Shape::Str, true),
    ("position", Shape::Str, true),
    ("global_behavior", Shape::Str, true),
];
const PARTICIPANT: &[(&str, Shape, bool)] = &[
    ("participant_type", Shape::Str, true),
    ("position_relation", Shape::Str, true),
    ("longitudinal_oracle", Shape::Str, true),
    ("lateral_oracle", Shape::Str, true),
    ("global_behavior", Shape::Str, true),
    ("count", Shape::Count, false),
];
const PARTICIPANT_SHAPE: Shape = Shape::Object(PARTICIPANT);
const ROOT: &[(&str, Shape, bool)] = &[
    ("climate", Shape::Object(CLIMATE), true),
    ("road_topology", Shape::Object(ROAD), true),
    ("transportation_facilities", Shape::Object(FACILITIES), true),
    ("temporary_changes", Shape::Object(CHANGES), true),
    ("ego_vehicle", Shape::Object(EGO), true),
    ("traffic_participants", Shape::Array(&PARTICIPANT_SHAPE), true),
    ("source_text", Shape::Str, true),
];

fn check_shape(value: &Value, shape: Shape, path: &str, problems: &mut Vec<String>) {
    match shape {
        Shape::Str => {
            if !value.is_string() {
                problems.push(format!("{path}: expected a string"));
            }
        }
        Shape::Count => match value.as_u64() {
            Some(n) if n >= 1 && n <= u32::MAX as u64 => {}
            _ => problems.push(format!("{path}: expected a positive integer")),
        },
        Shape::Array(item) => match value.as_array() {
            Some(items) => {
                for (i, v) in items.iter().enumerate() {
                    check_shape(v, *item, &format!("{path}[{i}]"), problems);
                }
            }
            None => problems.push(format!("{path}: expected an array")),
        },
        Shape::Object(fields) => {
            let Some(map) = value.as_object() else {
                problems.push(format!("{path}: expected an object"));
                return;
            };
            for (name, field_shape, required) in fields {
                let child = join(path, name);
                match map.get(*name) {
                    Some(v) => check_shape(v, *field_shape, &child, problems),
                    None if *required => problems.push(format!("{child}: missing key")),
                    None => {}
                }
            }
            for key in map.keys() {
                if !fields.iter().any(|(name, _, _)| name == key) {
                    problems.push(format!("{}: unknown key", join(path, key)));
                }
            }
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

#[derive(Deserialize)]
struct ParticipantWire {
    participant_type: String,
    position_relation: String,
    longitudinal_oracle: String,
    lateral_oracle: String,
    global_behavior: String,
    #[serde(default = "one")]
    count: u32,
}

fn one() -> u32 {
    1
}

/// Strict decoder: every key required (except participant `count`, which
/// defaults to 1), unknown keys rejected.
pub fn deserialize(bytes: &[u8]) -> Result<ScenarioRepresentation, RepresentationError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| RepresentationError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut problems = Vec::new();
    check_shape(&value, Shape::Object(ROOT), "", &mut problems);
    if !problems.is_empty() {
        return Err(RepresentationError::Schema { problems });
    }
    let obj = value.as_object().expect("checked above");
    let section = |key: &str| obj[key].clone();
    let schema = |e: serde_json::Error| RepresentationError::Schema {
        problems: vec![e.to_string()],
    };
    let participants: Vec<ParticipantWire> = serde_json::from_value(section("traffic_participants")).map_err(schema)?;
    Ok(ScenarioRepresentation {
        climate: serde_json::from_value(section("climate")).map_err(schema)?,
        road_topology: serde_json::from_value(section("road_topology")).map_err(schema)?,
        transportation_facilities: serde_json::from_value(section("transportation_facilities")).map_err(schema)?,
        temporary_changes: serde_json::from_value(section("temporary_changes")).map_err(schema)?,
        ego_vehicle: serde_json::from_value(section("ego_vehicle")).map_err(schema)?,
        traffic_participants: participants
            .into_iter()
            .map(|p| TrafficParticipant {
                participant_type: p.participant_type,
                position_relation: p.position_relation,
                longitudinal_oracle: p.longitudinal_oracle,
                lateral_oracle: p.lateral_oracle,
                global_behavior: p.global_behavior,
                count: p.count,
            })
            .collect(),
        source_text: obj["source_text"].as_str().unwrap_or_default().to_string(),
    })
}

// ---------------------------------------------------------------------------
// Consistency rules
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Warning,
    Contradiction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyFinding {
    pub rule_id: String,
    pub severity: Severity,
    pub slots_involved: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    All(Vec<Predicate>),
    Any(Vec<Predicate>),
    Not(Box<Predicate>),
    SlotIn { slot: String, values: Vec<String> },
    AnyParticipant(Box<Predicate>),
    NovelInClosedSlot,
}

impl Predicate {
    fn slots(&self, out: &mut Vec<String>) {
        match self {
            Predicate::All(ps) | Predicate::Any(ps) => ps.iter().for_each(|p| p.slots(out)),
            Predicate::Not(p) | Predicate::AnyParticipant(p) => p.slots(out),
            Predicate::SlotIn { slot, .. } => {
                if !out.contains(slot) {
                    out.push(slot.clone())
                }
            }
            Predicate::NovelInClosedSlot => {}
        }
    }

    fn eval(&self, rep: &ScenarioRepresentation, participant: Option<usize>) -> bool {
        match self {
            Predicate::All(ps) => ps.iter().all(|p| p.eval(rep, participant)),
            Predicate::Any(ps) => ps.iter().any(|p| p.eval(rep, participant)),
            Predicate::Not(p) => !p.eval(rep, participant),
            Predicate::AnyParticipant(p) => (0..rep.traffic_participants.len()).any(|i| p.eval(rep, Some(i))),
            Predicate::SlotIn { slot, values } => {
                let Ok(id) = slot.parse::<SlotId>() else {
                    return false;
                };
                let held: Vec<&str> = match (id.is_participant(), participant) {
                    (true, Some(i)) => rep.traffic_participants[i].get(id).into_iter().collect(),
                    _ => rep.values(id),
                };
                held.iter().any(|v| values.iter().any(|w| w == v))
            }
            // Evaluated separately because it reports per offending slot.
            Predicate::NovelInClosedSlot => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub rule_id: String,
    pub severity: Severity,
    pub message: String,
    pub when: Predicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("malformed rule set: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("rule `{rule_id}`: {reason}")]
    Invalid { rule_id: String, reason: String },
}

impl RuleSet {
    pub fn from_json(json: &str) -> Result<Self, RuleError> {
        let set: RuleSet = serde_json::from_str(json)?;
        let mut ids = std::collections::BTreeSet::new();
        for rule in &set.rules {
            if !ids.insert(rule.rule_id.as_str()) {
                return Err(RuleError::Invalid {
                    rule_id: rule.rule_id.clone(),
                    reason: "duplicate rule id".into(),
                });
            }
            let mut slots = Vec::new();
            rule.when.slots(&mut slots);
            for slot in slots {
                if slot.parse::<SlotId>().is_err() {
                    return Err(RuleError::Invalid {
                        rule_id: rule.rule_id.clone(),
                        reason: format!("unknown slot `{slot}`"),
                    });
                }
            }
        }
        Ok(set)
    }

    pub fn bundled() -> Self {
        Self::from_json(crate::bundled::RULES_JSON).expect("bundled rules are valid")
    }
}

/// Runs every rule over `rep`.
///
/// Findings are ordered by the highest-priority slot they involve, then by
/// rule order.
pub fn validate(rep: &ScenarioRepresentation, config: &RepositoryConfig, rules: &RuleSet) -> Vec<ConsistencyFinding> {
    let mut keyed: Vec<((usize, usize), ConsistencyFinding)> = Vec::new();
    let ranks: Vec<String> = config
        .slots_in_priority_order()
        .iter()
        .map(|s| s.slot_name.clone())
        .collect();
    let rank = |slot: &str| ranks.iter().position(|s| s == slot).unwrap_or(usize::MAX);

    for (rule_idx, rule) in rules.rules.iter().enumerate() {
        if rule.when == Predicate::NovelInClosedSlot {
            for slot_id in SlotId::ALL {
                let Some(slot) = config.slot(slot_id.name()) else {
                    continue;
                };
                if slot.allows_novel {
                    continue;
                }
                for value in rep.values(slot_id) {
                    if !slot.contains(value) {
                        keyed.push((
                            (rank(&slot.slot_name), rule_idx),
                            ConsistencyFinding {
                                rule_id: rule.rule_id.clone(),
                                severity: rule.severity,
                                slots_involved: vec![slot.slot_name.clone()],
                                message: format!("{} ({}: `{value}`)", rule.message, slot.slot_name),
                            },
                        ));
                    }
                }
            }
            continue;
        }
        if rule.when.eval(rep, None) {
            let mut slots = Vec::new();
            rule.when.slots(&mut slots);
            let key = slots.iter().map(|s| rank(s)).min().unwrap_or(usize::MAX);
            keyed.push((
                (key, rule_idx),
                ConsistencyFinding {
                    rule_id: rule.rule_id.clone(),
                    severity: rule.severity,
                    slots_involved: slots,
                    message: rule.message.clone(),
                },
            ));
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    keyed.into_iter().map(|(_, f)| f).collect()
}

pub fn has_contradiction(findings: &[ConsistencyFinding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Contradiction)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn left_turn() -> ScenarioRepresentation {
        let mut rep = ScenarioRepresentation::empty("Unprotected left turn for traffic vehicle");
        rep.climate.weather_type = "sunny".into();
        rep.climate.density = NONE.into();
        rep.climate.time_of_day = "daytime".into();
        rep.road_topology.topology = "intersection".into();
        rep.road_topology.lanes = "two_lanes".into();
        rep.ego_vehicle.vehicle_type = "car".into();
        rep.ego_vehicle.position = "right_lane".into();
        rep.ego_vehicle.global_behavior = "turn_left".into();
        rep.traffic_participants.push(TrafficParticipant {
            participant_type: "car".into(),
            position_relation: "opposite".into(),
            longitudinal_oracle: "yield".into(),
            lateral_oracle: "keep_lane".into(),
            global_behavior: "go_forward".into(),
            count: 1,
        });
        rep
    }

    #[test]
    fn round_trip_is_identity() {
        let rep = left_turn();
        let bytes = serialize(&rep);
        assert_eq!(deserialize(&bytes).unwrap(), rep);
        assert!(bytes.ends_with(b"}\n"));
    }

    #[test]
    fn key_order_is_fixed() {
        let text = String::from_utf8(serialize(&left_turn())).unwrap();
        let pos = |k: &str| text.find(&format!("\"{k}\"")).unwrap();
        assert!(pos("climate") < pos("road_topology"));
        assert!(pos("road_topology") < pos("transportation_facilities"));
        assert!(pos("traffic_participants") < pos("source_text"));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = deserialize(b"{\n  \"climate\": ,\n}").unwrap_err();
        match err {
            RepresentationError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors_name_paths() {
        let mut value: Value = serde_json::from_slice(&serialize(&left_turn())).unwrap();
        value["climate"].as_object_mut().unwrap().remove("density");
        value["ego_vehicle"]["colour"] = Value::from("red");
        value["traffic_participants"][0]["count"] = Value::from(0);
        let err = deserialize(value.to_string().as_bytes()).unwrap_err();
        let RepresentationError::Schema { problems } = err else {
            panic!("expected schema error")
        };
        assert!(problems.iter().any(|p| p.starts_with("climate.density: missing")));
        assert!(problems.iter().any(|p| p.starts_with("ego_vehicle.colour: unknown")));
        assert!(problems.iter().any(|p| p.contains("traffic_participants[0].count")));
    }

    #[test]
    fn count_defaults_to_one() {
        let mut value: Value = serde_json::from_slice(&serialize(&left_turn())).unwrap();
        value["traffic_participants"][0]
            .as_object_mut()
            .unwrap()
            .remove("count");
        let rep = deserialize(value.to_string().as_bytes()).unwrap();
        assert_eq!(rep.traffic_participants[0].count, 1);
    }

    #[test]
    fn broken_line_at_intersection_contradicts() {
        let config = RepositoryConfig::bundled();
        let rules = RuleSet::bundled();
        let mut rep = left_turn();
        rep.transportation_facilities.road_marker = "broken_line".into();
        let findings = validate(&rep, &config, &rules);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "R1");
        assert_eq!(findings[0].severity, Severity::Contradiction);
    }

    #[test]
    fn lane_change_over_solid_line_warns() {
        let config = RepositoryConfig::bundled();
        let rules = RuleSet::bundled();
        let mut rep = left_turn();
        rep.road_topology.topology = "straight_road".into();
        rep.transportation_facilities.road_marker = "solid_line".into();
        rep.traffic_participants[0].lateral_oracle = "change_lane".into();
        let findings = validate(&rep, &config, &rules);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].rule_id, "R2");
        assert_eq!(findings[0].severity, Severity::Warning);
    }

    #[test]
    fn novel_in_closed_slot_contradicts_but_open_slot_is_fine() {
        let config = RepositoryConfig::bundled();
        let rules = RuleSet::bundled();
        let mut rep = left_turn();
        rep.traffic_participants[0].participant_type = "tractor".into();
        assert!(validate(&rep, &config, &rules).is_empty());
        rep.road_topology.topology = "spaceport".into();
        let findings = validate(&rep, &config, &rules);
        assert!(has_contradiction(&findings));
        assert_eq!(findings[0].slots_involved, vec!["RT.topology".to_string()]);
    }

    #[test]
    fn findings_follow_slot_priority() {
        let config = RepositoryConfig::bundled();
        let rules = RuleSet::bundled();
        let mut rep = left_turn();
        rep.ego_vehicle.position = "rooftop".into();
        rep.climate.weather_type = "hail".into();
        let findings = validate(&rep, &config, &rules);
        assert_eq!(findings.len(), 2);
        assert_eq!(findings[0].slots_involved[0], "C.type");
        assert_eq!(findings[1].slots_involved[0], "EV.position");
    }

    #[test]
    fn rules_with_unknown_slots_are_rejected() {
        let json = r#"[{"rule_id":"X","severity":"Warning","message":"m",
            "when":{"slot_in":{"slot":"RT.nope","values":["a"]}}}]"#;
        assert!(RuleSet::from_json(json).is_err());
    }
}
