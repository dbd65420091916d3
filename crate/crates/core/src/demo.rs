//! The bundled demo corpus: description texts, their ground-truth records
//! and a scripted response table that replays a model on them.

use serde::Deserialize;
use serde_json::Value;

use crate::bundled;
use crate::pipeline::ScriptedBackend;
use crate::representation::{deserialize, ScenarioRepresentation};

#[derive(Debug, Clone, PartialEq)]
pub struct DemoCase {
    pub id: String,
    /// `nhtsa`, `cncap` or `custom`.
    pub style: String,
    pub text: String,
    pub truth: ScenarioRepresentation,
}

#[derive(Deserialize)]
struct RawCase {
    id: String,
    style: String,
    text: String,
    truth: Value,
}

/// All demo cases in file order.
pub fn cases() -> Vec<DemoCase> {
    let raw: Vec<RawCase> = serde_json::from_str(bundled::DEMO_CASES_JSON).expect("bundled demo cases parse");
    raw.into_iter()
        .map(|c| DemoCase {
            truth: deserialize(c.truth.to_string().as_bytes()).expect("bundled ground truth is well formed"),
            id: c.id,
            style: c.style,
            text: c.text,
        })
        .collect()
}

pub fn case(id: &str) -> Option<DemoCase> {
    cases().into_iter().find(|c| c.id == id)
}

pub fn scripted_backend() -> ScriptedBackend {
    ScriptedBackend::from_json(bundled::DEMO_SCRIPT_JSON).expect("bundled script table parses")
}
