//! The full generation pass for one question: sample, correct, group,
//! and vote.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dbenv::{DialectAdapter, ExecLimits};
use crate::error::Result;
use crate::eval::seed_for_case;
use crate::policy::{Policy, TokenLedger};
use crate::sqlgen::candidate::{correct_candidate, sample_candidates, Candidate};
use crate::sqlgen::grouping::{group_by_execution, ResultGroup};
use crate::sqlgen::voting::{select_final, SelectionReport};

/// Knobs for one generation pass.
#[derive(Debug, Clone)]
pub struct GenerationSettings {
    /// Self-consistency sample count.
    pub candidates: usize,
    /// Correction round trips per candidate.
    pub t_max_corr: usize,
    pub temperature: f64,
    /// Root of the per-candidate sampling and correction seeds and of
    /// the tie-break generator.
    pub seed: u64,
    pub generation_template: String,
    pub correction_template: String,
    pub selection_template: String,
}

/// Everything one generation pass produced. `selection` and
/// `selected_sql` are absent when no candidate executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub candidates: Vec<Candidate>,
    pub groups: Vec<ResultGroup>,
    pub selection: Option<SelectionReport>,
    pub selected_sql: Option<String>,
}

/// Samples candidates against a schema, repairs the broken ones, groups
/// them by execution result, and votes a winner.
pub fn run_generation_pipeline(
    question: &str,
    schema_text: &str,
    settings: &GenerationSettings,
    adapter: &mut dyn DialectAdapter,
    limits: &ExecLimits,
    policy: &mut dyn Policy,
    ledger: &mut TokenLedger,
) -> Result<GenerationOutcome> {
    let sampled = sample_candidates(
        question,
        schema_text,
        settings.candidates,
        settings.temperature,
        Some(settings.seed),
        &settings.generation_template,
        policy,
        ledger,
    )?;
    let candidates: Vec<Candidate> = sampled
        .into_iter()
        .map(|candidate| {
            let revision_seed = seed_for_case(settings.seed, &format!("corr-{}", candidate.id));
            correct_candidate(
                candidate,
                adapter,
                limits,
                question,
                schema_text,
                &settings.correction_template,
                settings.t_max_corr,
                settings.temperature,
                Some(revision_seed),
                policy,
                ledger,
            )
        })
        .collect::<Result<_>>()?;

    let groups = group_by_execution(&candidates, adapter, limits);
    if groups.is_empty() {
        return Ok(GenerationOutcome {
            candidates,
            groups,
            selection: None,
            selected_sql: None,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let selection = select_final(
        &candidates,
        &groups,
        question,
        &settings.selection_template,
        adapter,
        limits,
        policy,
        &mut rng,
        ledger,
    )?;
    let selected_sql = candidates
        .iter()
        .find(|candidate| candidate.id == selection.selected_id)
        .and_then(|candidate| candidate.effective_sql())
        .map(str::to_string);
    Ok(GenerationOutcome {
        candidates,
        groups,
        selection: Some(selection),
        selected_sql,
    })
}
