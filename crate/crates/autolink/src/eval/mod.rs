//! Benchmark loading, per-case metrics, orchestration, and reporting.

mod benchmark;
mod metrics;
mod report;
mod run;

pub use benchmark::{load_benchmark, BenchmarkCase};
pub use metrics::{seed_for_case, strict_recall};
pub use report::{compute_aggregates, emit_json, emit_text, Aggregates, CaseRow, RunReport};
pub use run::{run_benchmark, DbResources, DbSource, EvalOptions, PolicyProvider};
