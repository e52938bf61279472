//! Monte Carlo size and power studies on synthetic data.

mod generate;
mod local_alt;
mod run;
mod spec;

pub use generate::{generate_dataset, perturbed_rhs_model, rep_seed, DATA_MAX_STEP};
pub use local_alt::{local_alt_v1, state_jacobian, verify_local_alt_equivalence, LocalAltDiagnostic};
pub use run::{
    quantile_sorted, run_replication, run_study, MonteCarloReport, Quantiles, ReplicationRecord, TestOutcome,
    TestSummary,
};
pub use spec::{AltFamily, LocalAlternativeSpec, StudySpec};
