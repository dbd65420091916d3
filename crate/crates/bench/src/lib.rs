//! Shared workloads for the criterion benches.

use xoscgen_core::assembler::{Assembler, DecompositionTable};
use xoscgen_core::demo::{self, DemoCase};
use xoscgen_core::{DslCorpus, PipelineConfig, RepositoryConfig, RuleSet, ScriptedBackend, XoscDocument};

/// Everything a bench iteration needs, loaded once.
pub struct Workload {
    pub corpus: DslCorpus,
    pub repo: RepositoryConfig,
    pub rules: RuleSet,
    pub table: DecompositionTable,
    pub config: PipelineConfig,
    pub backend: ScriptedBackend,
    pub cases: Vec<DemoCase>,
}

impl Workload {
    pub fn bundled() -> Self {
        Workload {
            corpus: DslCorpus::bundled(),
            repo: RepositoryConfig::bundled(),
            rules: RuleSet::bundled(),
            table: DecompositionTable::bundled(),
            config: PipelineConfig::bundled(),
            backend: demo::scripted_backend(),
            cases: demo::cases(),
        }
    }

    pub fn assembler(&self) -> Assembler<'_> {
        Assembler::new(&self.corpus, &self.repo, &self.rules, &self.table)
    }

    pub fn case(&self, id: &str) -> &DemoCase {
        self.cases.iter().find(|c| c.id == id).expect("demo case exists")
    }

    /// The emitted document for a demo case's ground truth.
    pub fn document(&self, id: &str, seed: u64) -> XoscDocument {
        let (doc, _) = self
            .assembler()
            .assemble(&self.case(id).truth, seed)
            .expect("demo truth assembles");
        doc.to_xosc()
    }
}
