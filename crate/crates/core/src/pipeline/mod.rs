//! Text-to-representation pipeline: staged prompting over a model backend,
//! tolerant extraction, and per-slot self-consistency voting.

mod backend;
mod extract;
mod prompt;
#[cfg(feature = "remote")]
pub mod remote;
mod run;
mod vote;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::representation::{ConsistencyFinding, ScenarioRepresentation};

pub use backend::{BackendError, CompletionRequest, ModelBackend, ScriptError, ScriptedBackend};
pub use extract::{extract_representation, json_location, ExtractError, Extracted};
pub use prompt::{build_prompt, Prior};
pub use run::{parse, CallTrace, ParseFailed, ParseTrace, Parsed, StageTrace};
pub use vote::{self_consistency_vote, vote_with_tallies, VoteCount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    BP,
    FS,
    CoT,
    SAC,
    SC,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::BP, Stage::FS, Stage::CoT, Stage::SAC, Stage::SC];

    pub fn label(self) -> &'static str {
        match self {
            Stage::BP => "BP",
            Stage::FS => "FS",
            Stage::CoT => "CoT",
            Stage::SAC => "SAC",
            Stage::SC => "SC",
        }
    }

    /// Stages folded into the single draft prompt.
    pub fn is_draft(self) -> bool {
        matches!(self, Stage::BP | Stage::FS | Stage::CoT)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Cumulative stage prefixes used in ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ablation {
    #[serde(rename = "BP")]
    Bp,
    #[serde(rename = "BP-FS")]
    BpFs,
    #[serde(rename = "BP-FS-CoT")]
    BpFsCot,
    #[serde(rename = "BP-FS-CoT-SAC")]
    BpFsCotSac,
    #[serde(rename = "full")]
    Full,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::Bp,
        Ablation::BpFs,
        Ablation::BpFsCot,
        Ablation::BpFsCotSac,
        Ablation::Full,
    ];

    pub fn stages(self) -> &'static [Stage] {
        let n = match self {
            Ablation::Bp => 1,
            Ablation::BpFs => 2,
            Ablation::BpFsCot => 3,
            Ablation::BpFsCotSac => 4,
            Ablation::Full => 5,
        };
        &Stage::ALL[..n]
    }

    pub fn label(self) -> &'static str {
        match self {
            Ablation::Bp => "BP",
            Ablation::BpFs => "BP-FS",
            Ablation::BpFsCot => "BP-FS-CoT",
            Ablation::BpFsCotSac => "BP-FS-CoT-SAC",
            Ablation::Full => "full",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Ablation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown ablation `{s}`; expected one of BP, BP-FS, BP-FS-CoT, BP-FS-CoT-SAC, full"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Temperatures {
    pub single: f64,
    pub self_consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub text: String,
    pub representation: ScenarioRepresentation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub stages: Vec<Stage>,
    pub sc_paths: usize,
    pub temperature: Temperatures,
    /// Base seed; path `i` uses `seed + i`.
    #[serde(default)]
    pub seed: u64,
    pub role_prompt: String,
    pub cot_scaffold: String,
    pub sac_scaffold: String,
    #[serde(default)]
    pub few_shot_examples: Vec<FewShotExample>,
}

impl PipelineConfig {
    pub fn from_json(json: &str) -> Result<Self, PipelineError> {
        let config: PipelineConfig = serde_json::from_str(json).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn bundled() -> Self {
        Self::from_json(crate::bundled::PIPELINE_JSON).expect("bundled pipeline config is valid")
    }

    /// Same prompts with the stage list cut to an ablation prefix.
    pub fn with_ablation(&self, ablation: Ablation) -> Self {
        PipelineConfig {
            stages: ablation.stages().to_vec(),
            ..self.clone()
        }
    }

    /// Stages must be a prefix of BP, FS, CoT, SAC, SC; self-consistency
    /// needs at least three paths.
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.stages.is_empty() || self.stages != Stage::ALL[..self.stages.len()] {
            return Err(PipelineError::Config(format!(
                "stages {:?} are not a prefix of BP, FS, CoT, SAC, SC",
                self.stages
            )));
        }
        if self.sc_paths < 1 {
            return Err(PipelineError::Config("sc_paths must be at least 1".into()));
        }
        if self.stages.contains(&Stage::SC) && self.sc_paths < 3 {
            return Err(PipelineError::Config("self-consistency needs at least 3 paths".into()));
        }
        if self.stages.contains(&Stage::FS) && self.few_shot_examples.is_empty() {
            return Err(PipelineError::Config("FS stage needs few-shot examples".into()));
        }
        for t in [self.temperature.single, self.temperature.self_consistency] {
            if !(0.0..=2.0).contains(&t) {
                return Err(PipelineError::Config(format!("temperature {t} outside [0, 2]")));
            }
        }
        Ok(())
    }

    pub fn has(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    /// Highest draft stage present (BP, FS or CoT).
    pub fn draft_stage(&self) -> Stage {
        self.stages
            .iter()
            .copied()
            .filter(|s| s.is_draft())
            .last()
            .unwrap_or(Stage::BP)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("pipeline configuration: {0}")]
    Config(String),
    #[error("backend failed during {stage}: {source}")]
    Backend {
        stage: Stage,
        #[source]
        source: BackendError,
    },
    #[error("no usable representation from {stage}: {reason}")]
    Extraction { stage: Stage, reason: String },
    #[error("{stage} produced `{value}` for closed slot {slot}")]
    RejectedElement { stage: Stage, slot: String, value: String },
    #[error("representation is inconsistent: {}", .findings.iter().map(|f| format!("{} {}", f.rule_id, f.message)).collect::<Vec<_>>().join("; "))]
    ParseFailure { findings: Vec<ConsistencyFinding> },
}

impl PipelineError {
    fn from_extract(stage: Stage, e: ExtractError) -> Self {
        match e {
            ExtractError::Rejected { slot, value } => PipelineError::RejectedElement { stage, slot, value },
            other => PipelineError::Extraction {
                stage,
                reason: other.to_string(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_is_full_pipeline() {
        let c = PipelineConfig::bundled();
        assert_eq!(c.stages, Stage::ALL.to_vec());
        assert_eq!(c.sc_paths, 10);
        assert_eq!(c.draft_stage(), Stage::CoT);
        assert_eq!(c.few_shot_examples.len(), 2);
    }

    #[test]
    fn stage_lists_must_be_prefixes() {
        let mut c = PipelineConfig::bundled();
        c.stages = vec![Stage::BP, Stage::CoT];
        assert!(c.validate().is_err());
        c.stages = vec![Stage::FS];
        assert!(c.validate().is_err());
        c.stages = vec![];
        assert!(c.validate().is_err());
    }

    #[test]
    fn self_consistency_needs_three_paths() {
        let mut c = PipelineConfig::bundled();
        c.sc_paths = 2;
        assert!(c.validate().is_err());
        c.stages = Ablation::BpFsCotSac.stages().to_vec();
        assert!(c.validate().is_ok());
    }

    #[test]
    fn ablation_labels_round_trip() {
        for a in Ablation::ALL {
            assert_eq!(a.label().parse::<Ablation>().unwrap(), a);
        }
        assert!("BP-CoT".parse::<Ablation>().is_err());
        assert_eq!("FULL".parse::<Ablation>().unwrap(), Ablation::Full);
    }
}
