use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::text::fingerprint;

/// One model call.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    /// Label of the calling stage: `BP`, `FS`, `CoT`, `SAC` or `Decompose`.
    pub stage: &'a str,
    /// The description (or behavior) the prompt is about.
    pub text: &'a str,
    pub prompt: &'a str,
    pub temperature: f64,
    pub seed: Option<u64>,
    /// Position of this call among repeated calls for the same stage and
    /// text, e.g. the path index under self-consistency.
    pub call_index: usize,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("no scripted response for `{0}`")]
    NoScript(String),
}

/// A language model behind a prompt-in, text-out interface.
pub trait ModelBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError>;
}

/// Replays recorded responses keyed by stage and text fingerprint.
///
/// The table maps `"<stage>:<fingerprint>"` to a list of responses; call
/// `i` receives entry `i`, or the last entry once the list runs out.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedBackend {
    table: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed script table: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn key(stage: &str, text: &str) -> String {
        format!("{stage}:{}", fingerprint(text))
    }

    pub fn from_json(json: &str) -> Result<Self, ScriptError> {
        Ok(ScriptedBackend {
            table: serde_json::from_str(json)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let json = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.table).expect("string map serializes")
    }

    pub fn insert(&mut self, stage: &str, text: &str, responses: Vec<String>) {
        self.table.insert(Self::key(stage, text), responses);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl ModelBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let key = Self::key(request.stage, request.text);
        let responses = self
            .table
            .get(&key)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| BackendError::NoScript(key.clone()))?;
        let i = request.call_index.min(responses.len() - 1);
        Ok(responses[i].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req<'a>(stage: &'a str, text: &'a str, i: usize) -> CompletionRequest<'a> {
        CompletionRequest {
            stage,
            text,
            prompt: "p",
            temperature: 0.2,
            seed: None,
            call_index: i,
        }
    }

    #[test]
    fn replays_by_index_and_clamps() {
        let mut b = ScriptedBackend::new();
        b.insert("BP", "Some Text", vec!["a".into(), "b".into()]);
        assert_eq!(b.complete(&req("BP", "some   text", 0)).unwrap(), "a");
        assert_eq!(b.complete(&req("BP", "some text", 1)).unwrap(), "b");
        assert_eq!(b.complete(&req("BP", "some text", 9)).unwrap(), "b");
        assert!(matches!(
            b.complete(&req("FS", "some text", 0)),
            Err(BackendError::NoScript(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let mut b = ScriptedBackend::new();
        b.insert("SAC", "x", vec!["{}".into()]);
        let back = ScriptedBackend::from_json(&b.to_json()).unwrap();
        assert_eq!(back, b);
    }
}
