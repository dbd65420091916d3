use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::pipeline::{CompletionRequest, ModelBackend};
use crate::text::normalize_term;

use super::AssemblyError;

/// Actions with a fragment in the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionName {
    Accelerate,
    Decelerate,
    Cruise,
    Stop,
    Yield,
    KeepLane,
    /// Resolved to left or right against the lane graph during assembly.
    ChangeLane,
    ChangeLaneLeft,
    ChangeLaneRight,
    Autopilot,
}

impl ActionName {
    pub const ALL: [ActionName; 10] = [
        ActionName::Accelerate,
        ActionName::Decelerate,
        ActionName::Cruise,
        ActionName::Stop,
        ActionName::Yield,
        ActionName::KeepLane,
        ActionName::ChangeLane,
        ActionName::ChangeLaneLeft,
        ActionName::ChangeLaneRight,
        ActionName::Autopilot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionName::Accelerate => "accelerate",
            ActionName::Decelerate => "decelerate",
            ActionName::Cruise => "cruise",
            ActionName::Stop => "stop",
            ActionName::Yield => "yield",
            ActionName::KeepLane => "keep_lane",
            ActionName::ChangeLane => "change_lane",
            ActionName::ChangeLaneLeft => "change_lane_left",
            ActionName::ChangeLaneRight => "change_lane_right",
            ActionName::Autopilot => "autopilot",
        }
    }
}

impl fmt::Display for ActionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = normalize_term(s);
        ActionName::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| format!("`{s}` is not a standard action"))
    }
}

/// Behavior name to ordered standard actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecompositionTable(pub BTreeMap<String, Vec<ActionName>>);

impl DecompositionTable {
    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn bundled() -> Self {
        Self::from_json(crate::bundled::DECOMPOSITION_JSON).expect("bundled decomposition table is valid")
    }

    pub fn get(&self, behavior: &str) -> Option<&[ActionName]> {
        self.0.get(&normalize_term(behavior)).map(Vec::as_slice)
    }
}

fn decomposition_prompt(behavior: &str) -> String {
    let names: Vec<&str> = ActionName::ALL.iter().map(|a| a.as_str()).collect();
    format!(
        "Break the traffic-participant behavior `{behavior}` into an ordered sequence of \
standard driving actions. Allowed action names: {}. Answer with a JSON array of action \
names only.\n",
        names.join(", ")
    )
}

fn parse_actions(behavior: &str, raw: &str) -> Result<Vec<ActionName>, AssemblyError> {
    let invalid = |reason: String| AssemblyError::InvalidDecomposition {
        behavior: behavior.to_string(),
        reason,
    };
    let start = raw
        .find('[')
        .ok_or_else(|| invalid("no JSON array in response".into()))?;
    let end = raw
        .rfind(']')
        .filter(|e| *e > start)
        .ok_or_else(|| invalid("unterminated array".into()))?;
    let items: Vec<Value> = serde_json::from_str(&raw[start..=end]).map_err(|e| invalid(e.to_string()))?;
    if items.is_empty() {
        return Err(invalid("empty action list".into()));
    }
    items
        .iter()
        .map(|v| {
            v.as_str()
                .ok_or_else(|| invalid(format!("{v} is not a string")))
                .and_then(|s| s.parse::<ActionName>().map_err(invalid))
        })
        .collect()
}

/// Table lookup first; unknown behaviors go to the model when one is given.
pub fn decompose(
    behavior: &str,
    table: &DecompositionTable,
    backend: Option<&dyn ModelBackend>,
) -> Result<Vec<ActionName>, AssemblyError> {
    if let Some(actions) = table.get(behavior) {
        return Ok(actions.to_vec());
    }
    let Some(backend) = backend else {
        return Err(AssemblyError::UnknownBehavior {
            behavior: behavior.to_string(),
        });
    };
    let prompt = decomposition_prompt(behavior);
    let raw = backend
        .complete(&CompletionRequest {
            stage: "Decompose",
            text: behavior,
            prompt: &prompt,
            temperature: 0.0,
            seed: Some(0),
            call_index: 0,
        })
        .map_err(|e| AssemblyError::InvalidDecomposition {
            behavior: behavior.to_string(),
            reason: e.to_string(),
        })?;
    parse_actions(behavior, &raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::ScriptedBackend;

    #[test]
    fn table_entries() {
        let t = DecompositionTable::bundled();
        use ActionName::*;
        assert_eq!(
            decompose("overtake", &t, None).unwrap(),
            vec![ChangeLane, Accelerate, ChangeLane, Cruise]
        );
        assert_eq!(
            decompose("cut_in", &t, None).unwrap(),
            vec![Accelerate, ChangeLaneRight, Cruise, Decelerate]
        );
        assert_eq!(decompose("Cut-in", &t, None).unwrap()[0], Accelerate);
        assert_eq!(decompose("go_forward", &t, None).unwrap(), vec![Autopilot]);
    }

    #[test]
    fn unknown_behavior_without_model() {
        let t = DecompositionTable::bundled();
        assert!(matches!(
            decompose("moonwalk", &t, None),
            Err(AssemblyError::UnknownBehavior { .. })
        ));
    }

    #[test]
    fn model_fallback_validates_names() {
        let t = DecompositionTable::bundled();
        let mut b = ScriptedBackend::new();
        b.insert(
            "Decompose",
            "zigzag",
            vec![r#"Sure: ["change_lane_left", "change_lane_right"]"#.into()],
        );
        b.insert("Decompose", "teleport", vec![r#"["warp"]"#.into()]);
        assert_eq!(
            decompose("zigzag", &t, Some(&b)).unwrap(),
            vec![ActionName::ChangeLaneLeft, ActionName::ChangeLaneRight]
        );
        assert!(matches!(
            decompose("teleport", &t, Some(&b)),
            Err(AssemblyError::InvalidDecomposition { .. })
        ));
    }
}
