use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::repository::RepositoryConfig;
use crate::representation::{has_contradiction, validate, ConsistencyFinding, RuleSet, ScenarioRepresentation};
use crate::text::fingerprint;

use super::backend::{CompletionRequest, ModelBackend};
use super::extract::{extract_representation, Extracted};
use super::prompt::{build_prompt, stage_section, Prior};
use super::vote::{vote_with_tallies, VoteCount};
use super::{PipelineConfig, PipelineError, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallTrace {
    pub path: usize,
    pub temperature: f64,
    pub seed: u64,
    pub prompt: String,
    pub response: Option<String>,
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filled_slots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: Stage,
    /// What this stage contributed to the prompt.
    pub section: String,
    /// Model calls issued on behalf of this stage. Draft stages below the
    /// highest configured one contribute text but issue no call of their own.
    pub calls: Vec<CallTrace>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseTrace {
    pub text: String,
    pub fingerprint: String,
    pub stages: Vec<StageTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub votes: Option<BTreeMap<String, Vec<VoteCount>>>,
    pub filled_slots: Vec<String>,
    pub findings: Vec<ConsistencyFinding>,
}

impl ParseTrace {
    /// Pretty JSON. Without timing the output is reproducible byte for byte.
    pub fn to_json(&self, include_timing: bool) -> String {
        let mut value = serde_json::to_value(self).expect("trace serializes");
        if !include_timing {
            if let Some(Value::Array(stages)) = value.get_mut("stages") {
                for s in stages {
                    if let Some(obj) = s.as_object_mut() {
                        obj.remove("elapsed_ms");
                    }
                }
            }
        }
        serde_json::to_string_pretty(&value).expect("trace serializes") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub representation: ScenarioRepresentation,
    pub trace: ParseTrace,
}

#[derive(Debug)]
pub struct ParseFailed {
    pub error: PipelineError,
    pub trace: ParseTrace,
    /// Present when a representation was produced but failed validation.
    pub representation: Option<ScenarioRepresentation>,
}

impl fmt::Display for ParseFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.error, f)
    }
}

impl std::error::Error for ParseFailed {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

struct PathRun {
    draft: CallTrace,
    draft_ms: f64,
    sac: Option<CallTrace>,
    sac_ms: f64,
    outcome: Result<Extracted, PipelineError>,
}

fn call(
    backend: &dyn ModelBackend,
    stage: Stage,
    text: &str,
    prompt: String,
    temperature: f64,
    seed: u64,
    path: usize,
) -> (CallTrace, Result<String, PipelineError>, f64) {
    let started = Instant::now();
    let result = backend.complete(&CompletionRequest {
        stage: stage.label(),
        text,
        prompt: &prompt,
        temperature,
        seed: Some(seed),
        call_index: path,
    });
    let ms = started.elapsed().as_secs_f64() * 1000.0;
    let trace = CallTrace {
        path,
        temperature,
        seed,
        prompt,
        response: result.as_ref().ok().cloned(),
        error: result.as_ref().err().map(|e| e.to_string()),
        filled_slots: Vec::new(),
    };
    (
        trace,
        result.map_err(|source| PipelineError::Backend { stage, source }),
        ms,
    )
}

fn run_path(
    path: usize,
    text: &str,
    config: &PipelineConfig,
    backend: &dyn ModelBackend,
    repo: &RepositoryConfig,
    draft_prompt: &str,
    temperature: f64,
) -> PathRun {
    let seed = config.seed.wrapping_add(path as u64);
    let draft_stage = config.draft_stage();
    let (mut draft, response, draft_ms) = call(
        backend,
        draft_stage,
        text,
        draft_prompt.to_string(),
        temperature,
        seed,
        path,
    );
    let response = match response {
        Ok(r) => r,
        Err(e) => {
            return PathRun {
                draft,
                draft_ms,
                sac: None,
                sac_ms: 0.0,
                outcome: Err(e),
            }
        }
    };
    let drafted = extract_representation(&response, repo).map_err(|e| PipelineError::from_extract(draft_stage, e));
    if let Ok(x) = &drafted {
        draft.filled_slots = x.filled.clone();
    }
    if !config.has(Stage::SAC) {
        return PathRun {
            draft,
            draft_ms,
            sac: None,
            sac_ms: 0.0,
            outcome: drafted,
        };
    }

    let prior = match &drafted {
        Ok(x) => Prior::Representation(x.representation.clone()),
        Err(_) => Prior::Raw(response),
    };
    let sac_prompt = match build_prompt(Stage::SAC, text, config, repo, Some(&prior)) {
        Ok(p) => p,
        Err(e) => {
            return PathRun {
                draft,
                draft_ms,
                sac: None,
                sac_ms: 0.0,
                outcome: Err(e),
            }
        }
    };
    let (mut sac, sac_response, sac_ms) = call(backend, Stage::SAC, text, sac_prompt, temperature, seed, path);
    let outcome = sac_response
        .and_then(|r| extract_representation(&r, repo).map_err(|e| PipelineError::from_extract(Stage::SAC, e)));
    if let Ok(x) = &outcome {
        sac.filled_slots = x.filled.clone();
    }
    PathRun {
        draft,
        draft_ms,
        sac: Some(sac),
        sac_ms,
        outcome,
    }
}

/// Runs the configured stages on `text` and validates the result.
///
/// A single path runs at the low temperature. With self-consistency, the
/// draft and alignment calls are repeated on `sc_paths` independent paths
/// at the high temperature and the extracted candidates are voted per slot;
/// paths whose output cannot be extracted are dropped from the vote.
pub fn parse(
    text: &str,
    config: &PipelineConfig,
    backend: &dyn ModelBackend,
    repo: &RepositoryConfig,
    rules: &RuleSet,
) -> Result<Parsed, ParseFailed> {
    let mut trace = ParseTrace {
        text: text.to_string(),
        fingerprint: fingerprint(text),
        stages: Vec::new(),
        votes: None,
        filled_slots: Vec::new(),
        findings: Vec::new(),
    };
    let fail = |error, trace, representation| ParseFailed {
        error,
        trace,
        representation,
    };
    if let Err(e) = config.validate() {
        return Err(fail(e, trace, None));
    }
    let draft_stage = config.draft_stage();
    let draft_prompt = match build_prompt(draft_stage, text, config, repo, None) {
        Ok(p) => p,
        Err(e) => return Err(fail(e, trace, None)),
    };
    let sc = config.has(Stage::SC);
    let paths = if sc { config.sc_paths } else { 1 };
    let temperature = if sc {
        config.temperature.self_consistency
    } else {
        config.temperature.single
    };

    let runs: Vec<PathRun> = (0..paths)
        .into_par_iter()
        .map(|i| run_path(i, text, config, backend, repo, &draft_prompt, temperature))
        .collect();

    for &stage in &config.stages {
        let section = stage_section(stage, config, repo);
        let (calls, elapsed_ms) = match stage {
            s if s == draft_stage => (
                runs.iter().map(|r| r.draft.clone()).collect(),
                runs.iter().map(|r| r.draft_ms).sum(),
            ),
            Stage::SAC => (
                runs.iter().filter_map(|r| r.sac.clone()).collect(),
                runs.iter().map(|r| r.sac_ms).sum(),
            ),
            _ => (Vec::new(), 0.0),
        };
        trace.stages.push(StageTrace {
            stage,
            section,
            calls,
            elapsed_ms,
        });
    }

    // Backend failures abort instead of silently shrinking the vote.
    let mut runs = runs;
    if let Some(pos) = runs
        .iter()
        .position(|r| matches!(r.outcome, Err(PipelineError::Backend { .. })))
    {
        let err = runs.swap_remove(pos).outcome.err().expect("matched Err");
        return Err(fail(err, trace, None));
    }

    let vote_started = Instant::now();
    let mut representation = if sc {
        let mut first_error = None;
        let mut candidates = Vec::new();
        for run in runs {
            match run.outcome {
                Ok(x) => {
                    for slot in x.filled {
                        if !trace.filled_slots.contains(&slot) {
                            trace.filled_slots.push(slot);
                        }
                    }
                    candidates.push(x.representation);
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        if candidates.is_empty() {
            let err = first_error.expect("no candidates implies an error");
            return Err(fail(err, trace, None));
        }
        let (rep, tallies) = vote_with_tallies(&candidates);
        trace.votes = Some(tallies);
        rep
    } else {
        match runs.pop().expect("one path").outcome {
            Ok(x) => {
                trace.filled_slots = x.filled;
                x.representation
            }
            Err(e) => return Err(fail(e, trace, None)),
        }
    };
    if let Some(sc_trace) = trace.stages.iter_mut().find(|s| s.stage == Stage::SC) {
        sc_trace.elapsed_ms = vote_started.elapsed().as_secs_f64() * 1000.0;
    }
    representation.source_text = text.to_string();

    let findings = validate(&representation, repo, rules);
    trace.findings = findings.clone();
    if has_contradiction(&findings) {
        return Err(fail(
            PipelineError::ParseFailure { findings },
            trace,
            Some(representation),
        ));
    }
    Ok(Parsed { representation, trace })
}
