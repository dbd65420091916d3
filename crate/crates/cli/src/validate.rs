//! Checks a representation or a document without generating anything.

use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use xoscgen_core::representation::{deserialize, has_contradiction, validate};
use xoscgen_core::xosc::{verify, FindingSeverity};

use crate::context::{Env, SourceArgs};
use crate::exit::{classified, ClassExt, ErrorClass};
use crate::run::load_document;

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// A `.rep.json` representation or a `.xosc` document.
    pub input: PathBuf,
}

pub fn cmd_validate(args: &ValidateArgs, sources: &SourceArgs) -> anyhow::Result<()> {
    let path = &args.input;
    if path.extension().is_some_and(|e| e == "xosc") {
        let doc = load_document(path)?;
        let findings = verify(&doc);
        crate::print_line(&serde_json::to_string_pretty(&findings)?);
        let errors = findings.iter().filter(|f| f.severity == FindingSeverity::Error).count();
        if errors > 0 {
            return Err(classified(
                ErrorClass::EmitError,
                anyhow::anyhow!("{} fails verification with {errors} error(s)", path.display()),
            ));
        }
        return Ok(());
    }
    let bytes = fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .class(ErrorClass::ReadError)?;
    let rep = deserialize(&bytes)
        .with_context(|| format!("cannot load {}", path.display()))
        .class(ErrorClass::ReadError)?;
    let env = Env::load(sources)?;
    let findings = validate(&rep, &env.repo, &env.rules);
    crate::print_line(&serde_json::to_string_pretty(&findings)?);
    if has_contradiction(&findings) {
        return Err(classified(
            ErrorClass::ParseFailure,
            anyhow::anyhow!("{} has contradictions", path.display()),
        ));
    }
    Ok(())
}
