//! Accuracy, matching accuracy and rater agreement from files on disk.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde_json::{json, Map, Value};

use xoscgen_core::metrics::{element_accuracy, icc_two_way_random, matching_accuracy, IccForm, RatingMatrix};
use xoscgen_core::representation::deserialize;
use xoscgen_core::ScenarioRepresentation;

use crate::exit::{classified, ClassExt, ErrorClass};

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Predicted representation; pairs with the `--truth` at the same position.
    #[arg(long)]
    pub pred: Vec<PathBuf>,
    /// Ground-truth representation.
    #[arg(long)]
    pub truth: Vec<PathBuf>,
    /// Fraction of scenarios that executed; combined with the mean element
    /// accuracy into the matching accuracy.
    #[arg(long)]
    pub success_rate: Option<f64>,
    /// Ratings CSV with a header row: one row per subject, one column per rater.
    #[arg(long)]
    pub ratings: Option<PathBuf>,
}

fn load_rep(path: &Path) -> anyhow::Result<ScenarioRepresentation> {
    let bytes = fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .class(ErrorClass::ReadError)?;
    deserialize(&bytes)
        .with_context(|| format!("cannot load {}", path.display()))
        .class(ErrorClass::ReadError)
}

pub fn load_ratings(path: &Path) -> anyhow::Result<RatingMatrix> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .class(ErrorClass::ReadError)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record
            .with_context(|| format!("{} row {}", path.display(), i + 2))
            .class(ErrorClass::ReadError)?;
        let row = record
            .iter()
            .map(|cell| cell.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{} row {} has a non-numeric score", path.display(), i + 2))
            .class(ErrorClass::ReadError)?;
        rows.push(row);
    }
    RatingMatrix::new(rows).class(ErrorClass::ReadError)
}

pub fn cmd_score(args: &ScoreArgs) -> anyhow::Result<()> {
    if args.pred.len() != args.truth.len() {
        return Err(classified(
            ErrorClass::Config,
            anyhow::anyhow!(
                "{} --pred files but {} --truth files",
                args.pred.len(),
                args.truth.len()
            ),
        ));
    }
    if args.pred.is_empty() && args.ratings.is_none() {
        return Err(classified(ErrorClass::Config, anyhow::anyhow!("nothing to score")));
    }
    let mut out = Map::new();
    if !args.pred.is_empty() {
        let pairs = args
            .pred
            .iter()
            .zip(&args.truth)
            .map(|(p, t)| Ok((load_rep(p)?, load_rep(t)?)))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let acc = element_accuracy(&pairs)?;
        if let Some(rate) = args.success_rate {
            out.insert("matching_accuracy".into(), json!(matching_accuracy(rate, acc.mean)?));
        }
        out.insert("element_accuracy".into(), serde_json::to_value(&acc)?);
    } else if args.success_rate.is_some() {
        return Err(classified(
            ErrorClass::Config,
            anyhow::anyhow!("--success-rate needs --pred/--truth pairs"),
        ));
    }
    if let Some(path) = &args.ratings {
        let m = load_ratings(path)?;
        out.insert(
            "icc".into(),
            json!({
                "subjects": m.subjects(),
                "raters": m.raters(),
                "single": icc_two_way_random(&m, IccForm::Single)?,
                "average": icc_two_way_random(&m, IccForm::Average)?,
            }),
        );
    }
    crate::print_line(&serde_json::to_string_pretty(&Value::Object(out))?);
    Ok(())
}
