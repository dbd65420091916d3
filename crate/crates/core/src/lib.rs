//! Compiles natural-language autonomous-driving test descriptions into
//! OpenSCENARIO-style `.xosc` documents and scores them in a small
//! kinematic executor.
//!
//! The flow is:
//!
//! 1. [`pipeline`] turns a description into a [`representation::ScenarioRepresentation`]
//!    through a staged prompt pipeline over a pluggable [`pipeline::ModelBackend`].
//! 2. [`assembler`] matches the representation against the [`corpus::DslCorpus`]
//!    tier by tier and concatenates participant action chains into a
//!    [`assembler::TargetDocument`].
//! 3. [`xosc`] emits, reloads and verifies the XML.
//! 4. [`executor`] replays the scenario on its mini-map with safety monitors.
//! 5. [`metrics`] aggregates accuracy, feasibility and rater agreement.

pub mod assembler;
pub mod bundled;
pub mod corpus;
pub mod demo;
pub mod executor;
pub mod metrics;
pub mod pipeline;
pub mod repository;
pub mod representation;
pub mod text;
pub mod xosc;

pub use assembler::{assemble, Assembler, AssemblyError, AssemblyReport, TargetDocument};
pub use corpus::{DslCorpus, Fragment, FragmentKind, MiniMap, RouteCandidate};
pub use executor::{run_document, EgoPolicy, EvaluationReport, MonitorId, MonitorSpec, ScenarioPlan};
pub use metrics::DomainError;
pub use pipeline::{ModelBackend, PipelineConfig, ScriptedBackend, Stage};
pub use repository::{CanonResult, ElementSlot, RepositoryConfig, TierName};
pub use representation::{ConsistencyFinding, RuleSet, ScenarioRepresentation, Severity, SlotId};
pub use xosc::XoscDocument;

/// Tool name written into every emitted file header.
pub const TOOL_NAME: &str = "xoscgen";
/// Tool version written into every emitted file header.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
