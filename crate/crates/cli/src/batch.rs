//! Fan-out generation over texts and seeds with an aggregate summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use xoscgen_core::executor::Outcome;
use xoscgen_core::metrics::{
    element_accuracy, feasibility_tally, matching_accuracy, ElementAccuracy, Feasibility, FeasibilityTally,
};
use xoscgen_core::pipeline::Ablation;
use xoscgen_core::representation::deserialize;
use xoscgen_core::{demo, EgoPolicy, ModelBackend, PipelineConfig, ScenarioRepresentation};

use crate::context::{self, BackendKind, Env, ModelArgs, SourceArgs, DEFAULT_MODEL};
use crate::exit::{class_of, classified, ClassExt, ErrorClass};
use crate::generate::{generate_into, XOSC_FILE};
use crate::run::{execute, load_document};

pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const ACCURACY_CSV: &str = "accuracy.csv";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Run manifest JSON; flags given here override its fields.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Text file with one description per line (`#` starts a comment).
    #[arg(long)]
    pub texts: Option<PathBuf>,
    /// Use the bundled demo descriptions, which carry ground truth.
    #[arg(long)]
    pub demo: bool,
    /// Assembly seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// One description in a manifest. Exactly one of `text` and `file` is set;
/// ground truth is optional.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextEntry {
    pub id: Option<String>,
    pub text: Option<String>,
    pub file: Option<PathBuf>,
    pub truth: Option<Value>,
    pub truth_file: Option<PathBuf>,
}

/// Everything a batch needs. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default)]
    pub texts: Vec<TextEntry>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub model: Option<String>,
    pub script: Option<PathBuf>,
    pub ablation: Option<Ablation>,
    pub pipeline_config: Option<PathBuf>,
    pub repo: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub decomposition: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))
            .class(ErrorClass::Config)?;
        let mut m: RunManifest = serde_json::from_str(&text)
            .with_context(|| format!("malformed manifest {}", path.display()))
            .class(ErrorClass::Config)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        for p in [
            &mut m.out,
            &mut m.script,
            &mut m.pipeline_config,
            &mut m.repo,
            &mut m.corpus,
            &mut m.rules,
            &mut m.decomposition,
        ] {
            rebase(p);
        }
        for t in &mut m.texts {
            rebase(&mut t.file);
            rebase(&mut t.truth_file);
        }
        Ok(m)
    }
}

#[derive(Debug, Clone)]
pub struct Item {
    pub id: String,
    pub text: String,
    pub truth: Option<ScenarioRepresentation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ItemRecord {
    pub id: String,
    pub seed: u64,
    /// Directory of the item's artifacts, relative to the batch output.
    pub dir: String,
    pub ok: bool,
    pub code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<Feasibility>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violations: Option<BTreeMap<String, u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub id: String,
    pub seed: u64,
    pub error: String,
    pub code: u8,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub backend: BackendKind,
    pub model: String,
    pub ablation: String,
    pub texts: usize,
    pub seeds: Vec<u64>,
    pub items: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub failures: Vec<Failure>,
    /// Executed items over all items; an item that never produced a
    /// document counts as unsuccessful.
    pub success_rate: f64,
    /// Over items that produced a document.
    pub feasibility: Option<FeasibilityTally>,
    /// Over items with ground truth; a failed parse scores as an empty record.
    pub accuracy: Option<ElementAccuracy>,
    pub matching_accuracy: Option<f64>,
    /// Monitor events summed over executed items.
    pub violations: BTreeMap<String, u32>,
    pub results: Vec<ItemRecord>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn read_truth(entry: &TextEntry) -> anyhow::Result<Option<ScenarioRepresentation>> {
    let bytes = match (&entry.truth, &entry.truth_file) {
        (Some(v), _) => v.to_string().into_bytes(),
        (None, Some(p)) => fs::read(p)
            .with_context(|| format!("cannot read {}", p.display()))
            .class(ErrorClass::ReadError)?,
        (None, None) => return Ok(None),
    };
    deserialize(&bytes)
        .context("malformed ground truth")
        .class(ErrorClass::ReadError)
        .map(Some)
}

fn items_from_manifest(entries: &[TextEntry]) -> anyhow::Result<Vec<Item>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let text = match (&e.text, &e.file) {
                (Some(t), None) => t.clone(),
                (None, Some(p)) => fs::read_to_string(p)
                    .with_context(|| format!("cannot read {}", p.display()))
                    .class(ErrorClass::ReadError)?
                    .trim()
                    .to_string(),
                _ => {
                    return Err(classified(
                        ErrorClass::Config,
                        anyhow::anyhow!("text entry {} needs exactly one of `text` and `file`", i + 1),
                    ))
                }
            };
            Ok(Item {
                id: e.id.clone().unwrap_or_else(|| format!("text-{:03}", i + 1)),
                text,
                truth: read_truth(e)?,
            })
        })
        .collect()
}

fn items_from_lines(path: &Path) -> anyhow::Result<Vec<Item>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .class(ErrorClass::ReadError)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(i, l)| Item {
            id: format!("text-{:03}", i + 1),
            text: l.to_string(),
            truth: None,
        })
        .collect())
}

fn demo_items() -> Vec<Item> {
    demo::cases()
        .into_iter()
        .map(|c| Item {
            id: c.id,
            text: c.text,
            truth: Some(c.truth),
        })
        .collect()
}

/// Generates, reloads and replays one item. Never fails; problems become
/// part of the record.
fn run_item(
    env: &Env,
    config: &PipelineConfig,
    backend: &dyn ModelBackend,
    item: &Item,
    seed: u64,
    out: &Path,
) -> (ItemRecord, Option<ScenarioRepresentation>) {
    let rel = format!("{}/seed-{seed}", item.id);
    let dir = out.join(&rel);
    let attempt = generate_into(env, config, backend, &item.text, seed, &dir, false);
    let mut record = ItemRecord {
        id: item.id.clone(),
        seed,
        dir: rel,
        ok: false,
        code: 0,
        error: None,
        message: None,
        map_id: None,
        feasibility: None,
        outcome: None,
        violations: None,
        element_accuracy: None,
    };
    if let Some(truth) = &item.truth {
        let predicted = attempt
            .representation
            .clone()
            .unwrap_or_else(|| ScenarioRepresentation::empty(item.text.clone()));
        record.element_accuracy = element_accuracy(&[(predicted, truth.clone())]).ok().map(|a| a.mean);
    }
    let fail = |record: &mut ItemRecord, err: &anyhow::Error| {
        let class = class_of(err);
        record.code = class.code();
        record.error = Some(class.name().to_string());
        record.message = Some(crate::exit::render(err));
    };
    let generated = match attempt.outcome {
        Ok(g) => g,
        Err(e) => {
            if class_of(&e) == ErrorClass::EmitError {
                record.feasibility = Some(Feasibility::ReadError);
            }
            fail(&mut record, &e);
            return (record, attempt.representation);
        }
    };
    record.map_id = Some(generated.map_id);
    let executed = load_document(&dir.join(XOSC_FILE))
        .map_err(|e| (Feasibility::ReadError, e))
        .and_then(|doc| {
            execute(&doc, env, &EgoPolicy::lane_follow(), false).map_err(|e| (Feasibility::RuntimeError, e))
        });
    match executed {
        Ok((report, _)) => {
            record.ok = true;
            record.feasibility = Some(Feasibility::Executable);
            record.outcome = Some(report.outcome);
            record.violations = Some(
                report
                    .counts
                    .iter()
                    .filter(|(_, n)| **n > 0)
                    .map(|(k, n)| (k.clone(), *n))
                    .collect(),
            );
            if let Err(e) = fs::write(dir.join(REPORT_FILE), report.to_json()) {
                record.ok = false;
                fail(&mut record, &anyhow::Error::new(e).context("cannot write report"));
            }
        }
        Err((feasibility, e)) => {
            record.feasibility = Some(feasibility);
            fail(&mut record, &e);
        }
    }
    (record, attempt.representation)
}

pub struct Plan {
    pub items: Vec<Item>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub workers: usize,
    pub backend: BackendKind,
    pub model: String,
    pub script: Option<PathBuf>,
    pub config: PipelineConfig,
    pub ablation: String,
    pub sources: SourceArgs,
}

fn resolve(args: &BatchArgs, sources: &SourceArgs) -> anyhow::Result<Plan> {
    let manifest = match &args.manifest {
        Some(p) => RunManifest::load(p)?,
        None => RunManifest::default(),
    };
    let mut items = items_from_manifest(&manifest.texts)?;
    if let Some(p) = &args.texts {
        items.extend(items_from_lines(p)?);
    }
    if args.demo {
        items.extend(demo_items());
    }
    if items.is_empty() {
        return Err(classified(ErrorClass::Config, anyhow::anyhow!("batch has no texts")));
    }
    let mut seen = BTreeSet::new();
    for item in &items {
        if !valid_id(&item.id) {
            return Err(classified(
                ErrorClass::Config,
                anyhow::anyhow!("text id `{}` is not a usable directory name", item.id),
            ));
        }
        if !seen.insert(item.id.as_str()) {
            return Err(classified(
                ErrorClass::Config,
                anyhow::anyhow!("duplicate text id `{}`", item.id),
            ));
        }
    }
    let seeds = if args.seeds.is_empty() {
        manifest.seeds.clone().unwrap_or_else(|| vec![0])
    } else {
        args.seeds.clone()
    };
    if seeds.is_empty() {
        return Err(classified(
            ErrorClass::Config,
            anyhow::anyhow!("batch needs at least one seed"),
        ));
    }
    let out = args
        .out
        .clone()
        .or(manifest.out.clone())
        .ok_or_else(|| classified(ErrorClass::Config, anyhow::anyhow!("batch needs --out")))?;
    let workers = args
        .workers
        .or(manifest.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(classified(
            ErrorClass::Config,
            anyhow::anyhow!("--workers must be at least 1"),
        ));
    }
    let m = &args.model;
    let ablation = m.ablation.or(manifest.ablation);
    let config = context::pipeline_config(
        m.pipeline_config.as_deref().or(manifest.pipeline_config.as_deref()),
        ablation,
    )?;
    let pick = |flag: &Option<PathBuf>, fallback: &Option<PathBuf>| flag.clone().or(fallback.clone());
    Ok(Plan {
        items,
        seeds,
        out,
        workers,
        backend: m.backend.or(manifest.backend).unwrap_or(BackendKind::Remote),
        model: m
            .model
            .clone()
            .or(manifest.model.clone())
            .unwrap_or_else(|| DEFAULT_MODEL.to_string()),
        script: pick(&m.script, &manifest.script),
        config,
        ablation: ablation.map_or("full", |a| a.label()).to_string(),
        sources: SourceArgs {
            repo: pick(&sources.repo, &manifest.repo),
            corpus: pick(&sources.corpus, &manifest.corpus),
            rules: pick(&sources.rules, &manifest.rules),
            decomposition: pick(&sources.decomposition, &manifest.decomposition),
        },
    })
}

/// Runs every (text, seed) pair and aggregates. Item order in the summary
/// follows the inputs, so the worker count does not affect the output.
pub fn run_batch(plan: &Plan) -> anyhow::Result<BatchSummary> {
    let env = Env::load(&plan.sources)?;
    let backend = context::backend(plan.backend, &plan.model, plan.script.as_deref())?;
    fs::create_dir_all(&plan.out).with_context(|| format!("cannot create {}", plan.out.display()))?;
    let jobs: Vec<(&Item, u64)> = plan
        .items
        .iter()
        .flat_map(|i| plan.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .context("cannot start worker pool")?;
    let done: Vec<(ItemRecord, Option<ScenarioRepresentation>)> = pool.install(|| {
        jobs.par_iter()
            .map(|(item, seed)| run_item(&env, &plan.config, backend.as_ref(), item, *seed, &plan.out))
            .collect()
    });

    let mut pairs = Vec::new();
    for ((item, _), (_, rep)) in jobs.iter().zip(&done) {
        if let Some(truth) = &item.truth {
            let predicted = rep
                .clone()
                .unwrap_or_else(|| ScenarioRepresentation::empty(item.text.clone()));
            pairs.push((predicted, truth.clone()));
        }
    }
    let results: Vec<ItemRecord> = done.into_iter().map(|(r, _)| r).collect();
    let outcomes: Vec<Feasibility> = results.iter().filter_map(|r| r.feasibility).collect();
    let feasibility = if outcomes.is_empty() {
        None
    } else {
        Some(feasibility_tally(&outcomes)?)
    };
    let accuracy = if pairs.is_empty() {
        None
    } else {
        Some(element_accuracy(&pairs)?)
    };
    let executed = results
        .iter()
        .filter(|r| r.feasibility == Some(Feasibility::Executable))
        .count();
    let success_rate = executed as f64 / results.len() as f64;
    let matching = match &accuracy {
        Some(a) => Some(matching_accuracy(success_rate, a.mean)?),
        None => None,
    };
    let mut violations = BTreeMap::new();
    for counts in results.iter().filter_map(|r| r.violations.as_ref()) {
        for (k, n) in counts {
            *violations.entry(k.clone()).or_insert(0) += n;
        }
    }
    let failures: Vec<Failure> = results
        .iter()
        .filter(|r| !r.ok)
        .map(|r| Failure {
            id: r.id.clone(),
            seed: r.seed,
            error: r.error.clone().unwrap_or_default(),
            code: r.code,
            message: r.message.clone().unwrap_or_default(),
        })
        .collect();
    Ok(BatchSummary {
        backend: plan.backend,
        model: plan.model.clone(),
        ablation: plan.ablation.clone(),
        texts: plan.items.len(),
        seeds: plan.seeds.clone(),
        items: results.len(),
        succeeded: results.len() - failures.len(),
        failed: failures.len(),
        failures,
        success_rate,
        feasibility,
        accuracy,
        matching_accuracy: matching,
        violations,
        results,
    })
}

fn write_csv(summary: &BatchSummary, out: &Path) -> anyhow::Result<()> {
    let path = out.join(SUMMARY_CSV);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record([
        "id",
        "seed",
        "ok",
        "code",
        "error",
        "map_id",
        "feasibility",
        "outcome",
        "violations",
        "element_accuracy",
    ])?;
    for r in &summary.results {
        let feasibility = r
            .feasibility
            .map(|f| serde_json::to_value(f).map(|v| v.as_str().unwrap_or_default().to_string()));
        let outcome = r
            .outcome
            .map(|o| serde_json::to_value(o).map(|v| v.as_str().unwrap_or_default().to_string()));
        w.write_record([
            r.id.clone(),
            r.seed.to_string(),
            r.ok.to_string(),
            r.code.to_string(),
            r.error.clone().unwrap_or_default(),
            r.map_id.clone().unwrap_or_default(),
            feasibility.transpose()?.unwrap_or_default(),
            outcome.transpose()?.unwrap_or_default(),
            r.violations
                .as_ref()
                .map_or(String::new(), |v| v.values().sum::<u32>().to_string()),
            r.element_accuracy.map_or(String::new(), |a| a.to_string()),
        ])?;
    }
    w.flush()?;
    if let Some(acc) = &summary.accuracy {
        let path = out.join(ACCURACY_CSV);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(["slot", "accuracy"])?;
        for (slot, v) in &acc.per_slot {
            w.write_record([slot.clone(), v.to_string()])?;
        }
        w.write_record(["mean".to_string(), acc.mean.to_string()])?;
        w.flush()?;
    }
    Ok(())
}

pub fn cmd_batch(args: &BatchArgs, sources: &SourceArgs) -> anyhow::Result<()> {
    let plan = resolve(args, sources)?;
    let summary = run_batch(&plan)?;
    let json = serde_json::to_string_pretty(&summary)? + "\n";
    let path = plan.out.join(SUMMARY_JSON);
    fs::write(&path, json).with_context(|| format!("cannot write {}", path.display()))?;
    write_csv(&summary, &plan.out)?;
    crate::print_line(
        &serde_json::json!({
            "summary": path,
            "items": summary.items,
            "succeeded": summary.succeeded,
            "failed": summary.failed,
        })
        .to_string(),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_must_be_plain_names() {
        assert!(valid_id("left_turn"));
        assert!(valid_id("text-001"));
        for bad in ["", ".", "..", "a/b", "a b"] {
            assert!(!valid_id(bad), "{bad:?}");
        }
    }

    #[test]
    fn manifest_paths_resolve_against_its_directory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(
            &path,
            r#"{"texts":[{"id":"a","file":"a.txt"}],"seeds":[1,2],"out":"out","backend":"scripted","ablation":"BP-FS"}"#,
        )
        .unwrap();
        let m = RunManifest::load(&path).unwrap();
        assert_eq!(m.out.unwrap(), dir.path().join("out"));
        assert_eq!(m.texts[0].file.as_ref().unwrap(), &dir.path().join("a.txt"));
        assert_eq!(m.ablation, Some(Ablation::BpFs));
        assert_eq!(m.backend, Some(BackendKind::Scripted));
    }

    #[test]
    fn manifest_rejects_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, r#"{"textz":[]}"#).unwrap();
        let err = RunManifest::load(&path).unwrap_err();
        assert_eq!(class_of(&err), ErrorClass::Config);
    }
}
