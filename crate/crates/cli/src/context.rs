//! Shared flags and the configuration they load.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};

use xoscgen_core::assembler::{Assembler, DecompositionTable};
use xoscgen_core::pipeline::remote::RemoteBackend;
use xoscgen_core::pipeline::Ablation;
use xoscgen_core::{demo, DslCorpus, ModelBackend, PipelineConfig, RepositoryConfig, RuleSet, ScriptedBackend};

use crate::exit::{ClassExt, ErrorClass};

/// Overrides for the bundled configuration files.
#[derive(Debug, Clone, Default, Args)]
pub struct SourceArgs {
    /// Element repository JSON (tiers, slots, synonyms).
    #[arg(long, global = true)]
    pub repo: Option<PathBuf>,
    /// Corpus directory holding `fragments/index.json` and `maps/`.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Consistency rule set JSON.
    #[arg(long, global = true)]
    pub rules: Option<PathBuf>,
    /// Behavior decomposition table JSON.
    #[arg(long, global = true)]
    pub decomposition: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    Scripted,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Model backend; `remote` reads its key from XOSCGEN_API_KEY.
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Model name sent to the remote backend.
    #[arg(long)]
    pub model: Option<String>,
    /// Scripted response table; defaults to the bundled demo table.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Stage prefix to run: BP, BP-FS, BP-FS-CoT, BP-FS-CoT-SAC or full.
    #[arg(long)]
    pub ablation: Option<Ablation>,
    /// Pipeline configuration JSON (prompts, temperatures, paths).
    #[arg(long)]
    pub pipeline_config: Option<PathBuf>,
}

pub const DEFAULT_MODEL: &str = "gpt-4";

/// Immutable state shared by every scenario of a run.
pub struct Env {
    pub repo: RepositoryConfig,
    pub corpus: DslCorpus,
    pub rules: RuleSet,
    pub table: DecompositionTable,
}

fn read_config(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .class(ErrorClass::Config)
}

impl Env {
    pub fn load(args: &SourceArgs) -> anyhow::Result<Env> {
        let repo = match &args.repo {
            Some(p) => RepositoryConfig::load(p).class(ErrorClass::Config)?,
            None => RepositoryConfig::bundled(),
        };
        let corpus = match &args.corpus {
            Some(dir) => DslCorpus::load_dir(dir).class(ErrorClass::Config)?,
            None => DslCorpus::bundled(),
        };
        let rules = match &args.rules {
            Some(p) => RuleSet::from_json(&read_config(p)?).class(ErrorClass::Config)?,
            None => RuleSet::bundled(),
        };
        let table = match &args.decomposition {
            Some(p) => DecompositionTable::from_json(&read_config(p)?)
                .with_context(|| format!("malformed decomposition table {}", p.display()))
                .class(ErrorClass::Config)?,
            None => DecompositionTable::bundled(),
        };
        Ok(Env {
            repo,
            corpus,
            rules,
            table,
        })
    }

    pub fn assembler<'a>(&'a self, backend: &'a dyn ModelBackend) -> Assembler<'a> {
        Assembler::new(&self.corpus, &self.repo, &self.rules, &self.table).with_backend(backend)
    }
}

/// The pipeline configuration cut to the requested ablation.
pub fn pipeline_config(path: Option<&Path>, ablation: Option<Ablation>) -> anyhow::Result<PipelineConfig> {
    let config = match path {
        Some(p) => PipelineConfig::load(p).class(ErrorClass::Config)?,
        None => PipelineConfig::bundled(),
    };
    Ok(match ablation {
        Some(a) => config.with_ablation(a),
        None => config,
    })
}

pub fn backend(kind: BackendKind, model: &str, script: Option<&Path>) -> anyhow::Result<Box<dyn ModelBackend>> {
    Ok(match kind {
        BackendKind::Remote => Box::new(RemoteBackend::from_env(model).class(ErrorClass::Config)?),
        BackendKind::Scripted => Box::new(match script {
            Some(p) => ScriptedBackend::load(p).class(ErrorClass::Config)?,
            None => demo::scripted_backend(),
        }),
    })
}
