//! Experiment harness: configuration, sweeps, archives, clustering.

pub mod archive;
pub mod cluster;
pub mod config;
pub mod run;

pub use archive::{
    EpsConstants, EpsSummary, ExperimentKind, FailureRecord, SeedProvenance, SolutionArchive,
    SolutionRecord,
};
pub use cluster::{cluster_solutions, translate_by_cells};
pub use config::{ExperimentConfig, SeedStrategy, SCHEMA_VERSION};
pub use run::{canonical_pair, run_experiment};
