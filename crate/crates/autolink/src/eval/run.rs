//! Benchmark orchestration: one full pipeline run per case.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::thread;

use crate::agent::{run_session, SessionConfig, SessionEnvs, StopReason};
use crate::dbenv::{collect_sample_map, SqliteAdapter};
use crate::error::Result;
use crate::eval::benchmark::BenchmarkCase;
use crate::eval::metrics::{seed_for_case, strict_recall};
use crate::eval::report::{CaseRow, RunReport};
use crate::policy::{Policy, TokenLedger};
use crate::schema::{format_mschema, DatabaseCatalog, LinkedSchema, PartitionMap};
use crate::sqlgen::{execution_accuracy, run_generation_pipeline, ExOutcome, GenerationSettings};
use crate::vecstore::{ColumnIndex, Embedder};

/// Where a case's database lives.
#[derive(Debug, Clone)]
pub enum DbSource {
    /// A SQLite file opened read-only.
    File(PathBuf),
    /// DDL and inserts executed into a fresh in-memory database.
    MemorySeed(String),
}

/// Everything needed to evaluate cases against one database.
#[derive(Debug)]
pub struct DbResources {
    pub catalog: DatabaseCatalog,
    pub index: ColumnIndex,
    pub source: DbSource,
}

impl DbResources {
    /// Opens a fresh adapter; each case gets its own connection.
    pub fn open_adapter(&self) -> Result<SqliteAdapter> {
        match &self.source {
            DbSource::File(path) => SqliteAdapter::open_file(path),
            DbSource::MemorySeed(sql) => SqliteAdapter::open_memory_seeded(sql),
        }
    }
}

/// Hands out per-case policies. Implementations must be shareable
/// across evaluation workers.
pub trait PolicyProvider: Sync {
    /// The policy driving the linking session for this case.
    fn link_policy(&self, case: &BenchmarkCase) -> Result<Box<dyn Policy>>;
    /// The policy used for sampling, correction, and judging.
    fn generation_policy(&self, case: &BenchmarkCase) -> Result<Box<dyn Policy>>;
}

/// Knobs for one benchmark run.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub session: SessionConfig,
    /// Run the generation half of the pipeline and score EX.
    pub with_generation: bool,
    /// Self-consistency sample count.
    pub candidates: usize,
    /// Maximum correction round trips per candidate.
    pub t_max_corr: usize,
    pub sql_temperature: f64,
    pub generation_template: String,
    pub correction_template: String,
    pub selection_template: String,
    /// Example values per column in the generation schema.
    pub sample_values: usize,
    pub seed: u64,
    /// Worker cap for case-level parallelism.
    pub jobs: usize,
}

impl EvalOptions {
    /// Disabled-action names, stable for report labeling.
    pub fn ablation_labels(&self) -> Vec<String> {
        self.session
            .disabled
            .iter()
            .map(|kind| kind.name().to_string())
            .collect()
    }
}

/// Evaluates every case and assembles the report. Case failures become
/// per-case error rows; the batch itself never aborts. Results are
/// deterministic for a fixed seed regardless of the worker count.
pub fn run_benchmark(
    cases: &[BenchmarkCase],
    resources: &BTreeMap<String, DbResources>,
    embedder: &dyn Embedder,
    provider: &dyn PolicyProvider,
    options: &EvalOptions,
) -> RunReport {
    let workers = options.jobs.clamp(1, cases.len().max(1));
    let mut indexed: Vec<(usize, CaseRow)> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|worker| {
                scope.spawn(move || {
                    let mut rows = Vec::new();
                    let mut position = worker;
                    while position < cases.len() {
                        let row = run_case(&cases[position], resources, embedder, provider, options);
                        rows.push((position, row));
                        position += workers;
                    }
                    rows
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|handle| handle.join().expect("evaluation worker panicked"))
            .collect()
    });
    indexed.sort_by_key(|(position, _)| *position);
    let rows = indexed.into_iter().map(|(_, row)| row).collect();
    RunReport::new(options.seed, options.ablation_labels(), rows)
}

/// Runs one case end to end, folding failures into the row.
fn run_case(
    case: &BenchmarkCase,
    resources: &BTreeMap<String, DbResources>,
    embedder: &dyn Embedder,
    provider: &dyn PolicyProvider,
    options: &EvalOptions,
) -> CaseRow {
    let Some(db) = resources.get(&case.db_id) else {
        return CaseRow::failed(
            &case.case_id,
            &case.db_id,
            format!("no catalog or index for database {}", case.db_id),
        );
    };
    if case.dialect != "sqlite" {
        return CaseRow::failed(
            &case.case_id,
            &case.db_id,
            format!("unsupported dialect {}", case.dialect),
        );
    }
    let mut adapter = match db.open_adapter() {
        Ok(adapter) => adapter,
        Err(error) => return CaseRow::failed(&case.case_id, &case.db_id, error.to_string()),
    };
    let mut link_policy = match provider.link_policy(case) {
        Ok(policy) => policy,
        Err(error) => return CaseRow::failed(&case.case_id, &case.db_id, error.to_string()),
    };

    let mut envs = SessionEnvs {
        adapter: &mut adapter,
        index: &db.index,
        embedder,
        catalog: &db.catalog,
    };
    let outcome = match run_session(&case.question, &mut envs, link_policy.as_mut(), &options.session)
    {
        Ok(outcome) => outcome,
        Err(error) => return CaseRow::failed(&case.case_id, &case.db_id, error.to_string()),
    };

    let mut ledger = TokenLedger::new();
    ledger.extend(outcome.transcript.iter().map(|record| record.usage));
    let partitions = PartitionMap::new(&db.catalog);
    let mut row = CaseRow {
        case_id: case.case_id.clone(),
        db_id: case.db_id.clone(),
        error: None,
        linked_columns: outcome.linked.len(),
        srr_hit: strict_recall(&outcome.linked, &case.gold_columns, &partitions),
        turns_used: outcome.transcript.len(),
        stop_reason: Some(outcome.stop_reason.clone()),
        input_tokens: 0,
        output_tokens: 0,
        token_source: String::new(),
        selected_sql: None,
        ex_outcome: None,
    };

    if let StopReason::PolicyFailure { message } = &outcome.stop_reason {
        row.error = Some(format!("linking policy failed: {message}"));
    } else if options.with_generation {
        match run_generation(case, db, &mut adapter, &outcome.linked, provider, options, &mut ledger)
        {
            Ok((selected_sql, ex_outcome)) => {
                row.selected_sql = selected_sql;
                row.ex_outcome = ex_outcome;
            }
            Err(error) => row.error = Some(error.to_string()),
        }
    }

    let (input_tokens, output_tokens) = ledger.totals();
    row.input_tokens = input_tokens;
    row.output_tokens = output_tokens;
    row.token_source = ledger.source_label().to_string();
    row
}

/// The generation half: sample, correct, group, vote, score. A case
/// where no candidate executes is scored as a prediction error.
fn run_generation(
    case: &BenchmarkCase,
    db: &DbResources,
    adapter: &mut SqliteAdapter,
    linked: &LinkedSchema,
    provider: &dyn PolicyProvider,
    options: &EvalOptions,
    ledger: &mut TokenLedger,
) -> Result<(Option<String>, Option<ExOutcome>)> {
    let samples = collect_sample_map(adapter, linked, options.sample_values, &options.session.limits);
    let schema_text = format_mschema(linked, &db.catalog, Some(&samples))?;
    let mut policy = provider.generation_policy(case)?;
    let settings = GenerationSettings {
        candidates: options.candidates,
        t_max_corr: options.t_max_corr,
        temperature: options.sql_temperature,
        seed: seed_for_case(options.seed, &case.case_id),
        generation_template: options.generation_template.clone(),
        correction_template: options.correction_template.clone(),
        selection_template: options.selection_template.clone(),
    };
    let outcome = run_generation_pipeline(
        &case.question,
        &schema_text,
        &settings,
        adapter,
        &options.session.limits,
        policy.as_mut(),
        ledger,
    )?;
    let Some(selected_sql) = outcome.selected_sql else {
        return Ok((None, Some(ExOutcome::PredError)));
    };

    let ex = execution_accuracy(&selected_sql, &case.gold_sql, adapter, &options.session.limits)?;
    Ok((Some(selected_sql), Some(ex)))
}
