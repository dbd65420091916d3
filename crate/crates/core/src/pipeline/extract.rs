use serde_json::{Map, Value};
use thiserror::Error;

use crate::repository::{CanonResult, RepositoryConfig, NONE};
use crate::representation::{ScenarioRepresentation, SlotId, TrafficParticipant};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("response contains no JSON object")]
    NoJson,
    #[error("`{value}` is not allowed in closed slot {slot}")]
    Rejected { slot: String, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub representation: ScenarioRepresentation,
    /// Slots that were absent and filled with `none`.
    pub filled: Vec<String>,
}

/// JSON section and field holding a slot.
pub fn json_location(slot: SlotId) -> (&'static str, &'static str) {
    match slot {
        SlotId::RtTopology => ("road_topology", "topology"),
        SlotId::RtLanes => ("road_topology", "lanes"),
        SlotId::TfRoadMarker => ("transportation_facilities", "road_marker"),
        SlotId::TfTrafficSign => ("transportation_facilities", "traffic_sign"),
        SlotId::TcType => ("temporary_changes", "change_type"),
        SlotId::TcPositionRelation => ("temporary_changes", "position_relation"),
        SlotId::TpType => ("traffic_participants", "participant_type"),
        SlotId::TpPositionRelation => ("traffic_participants", "position_relation"),
        SlotId::TpLongitudinal => ("traffic_participants", "longitudinal_oracle"),
        SlotId::TpLateral => ("traffic_participants", "lateral_oracle"),
        SlotId::TpGlobalBehavior => ("traffic_participants", "global_behavior"),
        SlotId::CType => ("climate", "weather_type"),
        SlotId::CDensity => ("climate", "density"),
        SlotId::CTime => ("climate", "time_of_day"),
        SlotId::EvType => ("ego_vehicle", "vehicle_type"),
        SlotId::EvPosition => ("ego_vehicle", "position"),
        SlotId::EvGlobalBehavior => ("ego_vehicle", "global_behavior"),
    }
}

/// Index just past the brace that closes the object opening at `start`.
fn matching_brace(s: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, ch) in s[start..].char_indices() {
        if in_string {
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Finds the first parseable outermost JSON object, looking inside fenced
/// code blocks first.
fn find_object(raw: &str) -> Option<Map<String, Value>> {
    let mut regions: Vec<&str> = Vec::new();
    let mut parts = raw.split("```");
    parts.next();
    while let Some(block) = parts.next() {
        regions.push(block.strip_prefix("json").unwrap_or(block));
        parts.next();
    }
    regions.push(raw);
    for region in regions {
        let mut from = 0;
        while let Some(off) = region[from..].find('{') {
            let start = from + off;
            if let Some(end) = matching_brace(region, start) {
                if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&region[start..end]) {
                    return Some(map);
                }
            }
            from = start + 1;
        }
    }
    None
}

fn scalar_text(v: Option<&Value>) -> Option<String> {
    let text = match v? {
        Value::String(s) => s.trim().to_string(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => return scalar_text(items.first()),
        Value::Null | Value::Object(_) => return None,
    };
    (!text.is_empty()).then_some(text)
}

fn resolve(
    repo: &RepositoryConfig,
    slot: SlotId,
    raw: Option<String>,
    label: String,
    filled: &mut Vec<String>,
) -> Result<String, ExtractError> {
    let Some(raw) = raw else {
        filled.push(label);
        return Ok(NONE.to_string());
    };
    match repo.canonicalize_in(slot.name(), &raw) {
        CanonResult::Canonical(v) => Ok(v),
        CanonResult::Novel(v) => Ok(v),
        CanonResult::Rejected => Err(ExtractError::Rejected {
            slot: slot.name().to_string(),
            value: raw,
        }),
    }
}

/// Reads a representation out of free model output.
///
/// Missing slots become `none` and are listed in [`Extracted::filled`];
/// values are canonicalized, and a value a closed slot cannot accept is an
/// error.
pub fn extract_representation(raw: &str, repo: &RepositoryConfig) -> Result<Extracted, ExtractError> {
    let root = find_object(raw).ok_or(ExtractError::NoJson)?;
    let mut rep = ScenarioRepresentation::empty(root.get("source_text").and_then(Value::as_str).unwrap_or_default());
    let mut filled = Vec::new();

    for slot in SlotId::ALL.into_iter().filter(|s| !s.is_participant()) {
        let (section, field) = json_location(slot);
        let value = scalar_text(root.get(section).and_then(|s| s.get(field)));
        let resolved = resolve(repo, slot, value, slot.name().to_string(), &mut filled)?;
        *rep.get_mut(slot).expect("scalar slot") = resolved;
    }

    let items = root
        .get("traffic_participants")
        .and_then(Value::as_array)
        .cloned()
        .unwrap_or_default();
    for (i, item) in items.iter().enumerate() {
        let Some(obj) = item.as_object() else { continue };
        let mut p = TrafficParticipant {
            participant_type: String::new(),
            position_relation: String::new(),
            longitudinal_oracle: String::new(),
            lateral_oracle: String::new(),
            global_behavior: String::new(),
            count: 1,
        };
        for slot in SlotId::PARTICIPANT {
            let (_, field) = json_location(slot);
            let label = format!("{}[{i}]", slot.name());
            let resolved = resolve(repo, slot, scalar_text(obj.get(field)), label, &mut filled)?;
            *p.get_mut(slot).expect("participant slot") = resolved;
        }
        p.count = match obj.get("count") {
            Some(Value::Number(n)) => n.as_u64().filter(|c| *c >= 1).unwrap_or(1) as u32,
            Some(Value::String(s)) => s.trim().parse().ok().filter(|c| *c >= 1).unwrap_or(1),
            _ => 1,
        };
        rep.traffic_participants.push(p);
    }

    Ok(Extracted {
        representation: rep,
        filled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::{serialize, tests::left_turn};

    fn repo() -> RepositoryConfig {
        RepositoryConfig::bundled()
    }

    #[test]
    fn reads_fenced_json_with_chatter() {
        let body = String::from_utf8(serialize(&left_turn())).unwrap();
        let raw = format!("Sure! Here is the record:\n```json\n{body}```\nLet me know.");
        let out = extract_representation(&raw, &repo()).unwrap();
        assert_eq!(out.representation, left_turn());
        assert!(out.filled.is_empty());
    }

    #[test]
    fn reads_bare_object_and_canonicalizes() {
        let raw = r#"Answer: {"road_topology": {"topology": "T-junction", "lanes": "single lane"},
            "ego_vehicle": {"vehicle_type": "Car", "position": "right lane", "global_behavior": "straight forward"},
            "traffic_participants": [{"participant_type": "tractor", "position_relation": "oncoming",
              "longitudinal_oracle": "slow down", "lateral_oracle": "keep lane", "global_behavior": "go straight", "count": "2"}]}
            trailing {"#;
        let out = extract_representation(raw, &repo()).unwrap();
        let rep = out.representation;
        assert_eq!(rep.road_topology.topology, "t_junction");
        assert_eq!(rep.ego_vehicle.global_behavior, "go_forward");
        let p = &rep.traffic_participants[0];
        assert_eq!(p.participant_type, "tractor");
        assert_eq!(p.position_relation, "opposite");
        assert_eq!(p.longitudinal_oracle, "decelerate");
        assert_eq!(p.count, 2);
        assert!(out.filled.contains(&"C.type".to_string()));
        assert_eq!(rep.climate.weather_type, NONE);
    }

    #[test]
    fn closed_slot_rejection_names_slot() {
        let raw = r#"{"road_topology": {"topology": "spaceport", "lanes": "two lanes"}}"#;
        match extract_representation(raw, &repo()) {
            Err(ExtractError::Rejected { slot, value }) => {
                assert_eq!(slot, "RT.topology");
                assert_eq!(value, "spaceport");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_json_is_an_error() {
        assert_eq!(
            extract_representation("I cannot help with that.", &repo()),
            Err(ExtractError::NoJson)
        );
        assert_eq!(extract_representation("{ not json", &repo()), Err(ExtractError::NoJson));
    }

    #[test]
    fn braces_inside_strings_are_ignored() {
        let raw = r#"{"source_text": "a } tricky { text", "road_topology": {"topology": "roundabout"}}"#;
        let out = extract_representation(raw, &repo()).unwrap();
        assert_eq!(out.representation.road_topology.topology, "roundabout");
        assert_eq!(out.representation.source_text, "a } tricky { text");
    }
}
