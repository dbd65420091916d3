//! Text to representation, document and trace.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::Serialize;

use xoscgen_core::pipeline::{parse, PipelineError};
use xoscgen_core::representation::serialize;
use xoscgen_core::xosc::{verify, FindingSeverity};
use xoscgen_core::{AssemblyReport, ModelBackend, PipelineConfig, ScenarioRepresentation};

use crate::context::{self, BackendKind, Env, ModelArgs, SourceArgs, DEFAULT_MODEL};
use crate::exit::{classified, ClassExt, ErrorClass};

pub const REP_FILE: &str = "scenario.rep.json";
pub const XOSC_FILE: &str = "scenario.xosc";
pub const TRACE_FILE: &str = "trace.json";

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Description text.
    #[arg(long, conflicts_with = "text_file", required_unless_present = "text_file")]
    pub text: Option<String>,
    /// File holding the description text.
    #[arg(long)]
    pub text_file: Option<PathBuf>,
    /// Assembly seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Keep per-stage wall-clock times in the trace.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// What a successful generation wrote.
#[derive(Debug, Clone, Serialize)]
pub struct Generated {
    pub representation: PathBuf,
    pub xosc: PathBuf,
    pub trace: PathBuf,
    pub map_id: String,
    pub unresolved: Vec<String>,
    pub warnings: usize,
}

/// The result of one generation, kept whether or not it succeeded.
pub struct Attempt {
    /// The parsed record, when parsing succeeded.
    pub representation: Option<ScenarioRepresentation>,
    pub outcome: anyhow::Result<Generated>,
}

fn pipeline_class(e: &PipelineError) -> ErrorClass {
    match e {
        PipelineError::Config(_) | PipelineError::Backend { .. } => ErrorClass::Config,
        PipelineError::Extraction { .. }
        | PipelineError::RejectedElement { .. }
        | PipelineError::ParseFailure { .. } => ErrorClass::ParseFailure,
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

/// Parses, assembles, emits and verifies one text into `out`. The trace is
/// written even when parsing fails.
pub fn generate_into(
    env: &Env,
    config: &PipelineConfig,
    backend: &dyn ModelBackend,
    text: &str,
    seed: u64,
    out: &Path,
    timing: bool,
) -> Attempt {
    let mut representation = None;
    let outcome = (|| {
        fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        let trace_path = out.join(TRACE_FILE);
        let parsed = match parse(text, config, backend, &env.repo, &env.rules) {
            Ok(p) => p,
            Err(failed) => {
                write(&trace_path, failed.trace.to_json(timing))?;
                let class = pipeline_class(&failed.error);
                return Err(classified(class, failed.error));
            }
        };
        write(&trace_path, parsed.trace.to_json(timing))?;
        let rep = parsed.representation;
        let rep_path = out.join(REP_FILE);
        write(&rep_path, serialize(&rep))?;
        representation = Some(rep.clone());

        let (doc, report) = env
            .assembler(backend)
            .assemble(&rep, seed)
            .class(ErrorClass::AssemblyError)?;
        let xosc = doc.to_xosc();
        let findings = verify(&xosc);
        let errors: Vec<String> = findings
            .iter()
            .filter(|f| f.severity == FindingSeverity::Error)
            .map(|f| format!("{}: {}", f.path, f.message))
            .collect();
        if !errors.is_empty() {
            return Err(classified(
                ErrorClass::EmitError,
                anyhow::anyhow!("emitted document fails verification: {}", errors.join("; ")),
            ));
        }
        let xosc_path = out.join(XOSC_FILE);
        write(&xosc_path, xosc.to_bytes())?;
        Ok(summary(rep_path, xosc_path, trace_path, &report, findings.len()))
    })();
    Attempt {
        representation,
        outcome,
    }
}

fn summary(
    representation: PathBuf,
    xosc: PathBuf,
    trace: PathBuf,
    report: &AssemblyReport,
    warnings: usize,
) -> Generated {
    Generated {
        representation,
        xosc,
        trace,
        map_id: report.map_id.clone(),
        unresolved: report.unresolved.clone(),
        warnings,
    }
}

pub fn read_text(text: Option<&str>, file: Option<&Path>) -> anyhow::Result<String> {
    match (text, file) {
        (Some(t), _) => Ok(t.to_string()),
        (None, Some(p)) => fs::read_to_string(p)
            .with_context(|| format!("cannot read {}", p.display()))
            .class(ErrorClass::ReadError),
        (None, None) => Err(classified(
            ErrorClass::Config,
            anyhow::anyhow!("no description text given"),
        )),
    }
}

pub fn cmd_generate(args: &GenerateArgs, sources: &SourceArgs) -> anyhow::Result<()> {
    let text = read_text(args.text.as_deref(), args.text_file.as_deref())?;
    let env = Env::load(sources)?;
    let m = &args.model;
    let config = context::pipeline_config(m.pipeline_config.as_deref(), m.ablation)?;
    let backend = context::backend(
        m.backend.unwrap_or(BackendKind::Remote),
        m.model.as_deref().unwrap_or(DEFAULT_MODEL),
        m.script.as_deref(),
    )?;
    let generated = generate_into(
        &env,
        &config,
        backend.as_ref(),
        &text,
        args.seed,
        &args.out,
        args.timing,
    )
    .outcome?;
    crate::print_line(&serde_json::to_string_pretty(&generated)?);
    Ok(())
}
