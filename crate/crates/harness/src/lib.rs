//! Experiment harness: random instances, the `dvec` file format, ingest
//! (rescaling and random projection), recall and collision experiments,
//! reports, and the acceptance criteria.

pub mod criteria;
pub mod dvec;
pub mod experiments;
pub mod ingest;
pub mod instance;
pub mod report;

pub use experiments::{run_collision_suite, run_recall, run_vdc_suite, RecallOptions};
pub use ingest::{build_index, default_jl_target, Ingest, JlDim};
pub use instance::{brute_force_near, gen_random_instance, RandomInstance};
pub use report::{Check, ExperimentReport};
