//! SQL generation over a linked schema: self-consistency sampling,
//! iterative correction, execution grouping, and majority voting.

mod accuracy;
mod candidate;
mod grouping;
mod pipeline;
mod voting;

pub use accuracy::{execution_accuracy, ExOutcome};
pub use candidate::{correct_candidate, extract_sql, sample_candidates, Candidate};
pub use grouping::{canonical_execution, canonical_result, group_by_execution, ResultGroup};
pub use pipeline::{run_generation_pipeline, GenerationOutcome, GenerationSettings};
pub use voting::{select_final, PairJudgment, PairVerdict, PairwiseScore, SelectionReport};
