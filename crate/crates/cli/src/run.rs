//! Replays an emitted scenario under an ego policy and writes its report.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::Deserialize;

use xoscgen_core::executor::{ExecError, Simulation, TraceSample};
use xoscgen_core::{EgoPolicy, EvaluationReport, ScenarioPlan, XoscDocument};

use crate::context::{Env, SourceArgs};
use crate::exit::{classified, ClassExt, ErrorClass};

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario document to replay.
    pub xosc: PathBuf,
    /// Ego trace to replay (JSON list of {t, x, y, heading, speed}). Without
    /// it the ego follows its route.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Route-following speed as a fraction of the speed limit.
    #[arg(long, default_value_t = 0.9, conflicts_with = "trace")]
    pub speed_fraction: f64,
    /// Report path; defaults to the document path with `.report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the ego trajectory, in the `--trace` format.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TraceFile {
    Bare(Vec<TraceSample>),
    Wrapped { trace: Vec<TraceSample> },
}

pub fn load_trace(path: &Path) -> anyhow::Result<Vec<TraceSample>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .class(ErrorClass::ReadError)?;
    let parsed: TraceFile = serde_json::from_str(&text)
        .with_context(|| format!("malformed trace {}", path.display()))
        .class(ErrorClass::ReadError)?;
    let trace = match parsed {
        TraceFile::Bare(t) | TraceFile::Wrapped { trace: t } => t,
    };
    if trace.is_empty() {
        return Err(classified(
            ErrorClass::ReadError,
            anyhow::anyhow!("trace {} is empty", path.display()),
        ));
    }
    Ok(trace)
}

pub fn load_document(path: &Path) -> anyhow::Result<XoscDocument> {
    let bytes = fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .class(ErrorClass::ReadError)?;
    XoscDocument::load(&bytes)
        .with_context(|| format!("cannot load {}", path.display()))
        .class(ErrorClass::ReadError)
}

pub fn exec_class(e: &ExecError) -> ErrorClass {
    match e {
        ExecError::MapMismatch { .. } => ErrorClass::MapMismatch,
        ExecError::Malformed { .. } => ErrorClass::ReadError,
        ExecError::Domain(_) => ErrorClass::Generic,
    }
}

/// Steps the scenario to completion, optionally keeping the ego samples.
pub fn execute(
    doc: &XoscDocument,
    env: &Env,
    policy: &EgoPolicy,
    record: bool,
) -> anyhow::Result<(EvaluationReport, Vec<TraceSample>)> {
    let lift = |e: ExecError| classified(exec_class(&e), e);
    let plan = ScenarioPlan::from_xosc(doc, &env.corpus).map_err(lift)?;
    let spec = plan.monitor_spec().map_err(lift)?;
    spec.validate().map_err(|e| lift(e.into()))?;
    let mut sim = Simulation::new(&plan, &spec, policy);
    let mut samples = Vec::new();
    let mut keep = |s: &Simulation<'_, '_>| {
        if record {
            let st = s.state();
            let ego = &st.actors[0];
            samples.push(TraceSample {
                t: st.time,
                x: ego.x,
                y: ego.y,
                heading: ego.heading,
                speed: ego.speed,
            });
        }
    };
    keep(&sim);
    while !sim.is_finished() {
        sim.step();
        keep(&sim);
    }
    Ok((sim.into_report(), samples))
}

pub fn cmd_run(args: &RunArgs, sources: &SourceArgs) -> anyhow::Result<()> {
    let doc = load_document(&args.xosc)?;
    let policy = match &args.trace {
        Some(p) => EgoPolicy::Scripted { trace: load_trace(p)? },
        None => EgoPolicy::LaneFollow {
            speed_fraction: args.speed_fraction,
        },
    };
    let env = Env::load(sources)?;
    let (report, samples) = execute(&doc, &env, &policy, args.record.is_some())?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.xosc.with_extension("report.json"));
    fs::write(&out, report.to_json()).with_context(|| format!("cannot write {}", out.display()))?;
    if let Some(path) = &args.record {
        let json = serde_json::to_string_pretty(&samples)? + "\n";
        fs::write(path, json).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let counts: serde_json::Map<String, serde_json::Value> = report
        .counts
        .iter()
        .filter(|(_, n)| **n > 0)
        .map(|(k, n)| (k.clone(), (*n).into()))
        .collect();
    crate::print_line(
        &serde_json::json!({
            "report": out,
            "outcome": report.outcome,
            "duration": report.duration,
            "violations": report.violations(),
            "counts": counts,
        })
        .to_string(),
    );
    Ok(())
}
