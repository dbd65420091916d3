//! Corpus health check.

use std::collections::BTreeMap;

use crate::context::{Env, SourceArgs};
use crate::exit::{ClassExt, ErrorClass};

/// Loads the corpus and repository and checks that every closed value of
/// the matchable tiers has a fragment.
pub fn cmd_corpus_check(sources: &SourceArgs) -> anyhow::Result<()> {
    let env = Env::load(sources)?;
    env.corpus.check_closure(&env.repo).class(ErrorClass::Config)?;
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    for f in &env.corpus.fragments {
        *kinds.entry(format!("{:?}", f.kind)).or_default() += 1;
    }
    let maps: Vec<&String> = env.corpus.maps.keys().collect();
    crate::print_line(&serde_json::to_string_pretty(&serde_json::json!({
        "ok": true,
        "fragments": env.corpus.fragments.len(),
        "by_kind": kinds,
        "maps": maps,
        "slots": env.repo.slots.len(),
    }))?);
    Ok(())
}
