//! The four operator commands. Logs go to standard error, data to
//! files and standard output.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde_json::json;

use autolink::agent::{run_session, token_totals, SessionEnvs, SessionOutcome, StopReason};
use autolink::config::RunConfig;
use autolink::dbenv::collect_sample_map;
use autolink::eval::{
    emit_json, emit_text, load_benchmark, run_benchmark, seed_for_case, DbResources,
};
use autolink::policy::{Policy, TokenLedger};
use autolink::schema::format_mschema;
use autolink::sqlgen::{run_generation_pipeline, GenerationSettings};
use autolink::vecstore::{build_index, Embedder};
use autolink::{agent, Error, Result};

use crate::backends;

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Builds one vector index per configured catalog, skipping indices
/// that are already current unless forced.
pub fn cmd_index(config: &RunConfig, force: bool) -> Result<()> {
    let catalogs = backends::load_catalogs(config)?;
    let embedder = backends::build_embedder(config)?;
    create_dir(&config.index_dir)?;
    for (db_id, catalog) in &catalogs {
        let path = backends::index_path(config, db_id);
        if !force && backends::index_up_to_date(&path, catalog, embedder.as_ref()) {
            eprintln!("{db_id}: skipped (index up to date)");
            continue;
        }
        let index = match build_index(catalog, embedder.as_ref()) {
            Ok(index) => index,
            Err(error) => {
                eprintln!("{db_id}: index build failed");
                return Err(error);
            }
        };
        index.save(&path)?;
        eprintln!("{db_id}: indexed {} columns -> {}", index.len(), path.display());
    }
    Ok(())
}

struct LinkPhase {
    outcome: SessionOutcome,
    schema_text: String,
}

/// The shared front half of link and generate: run the session and
/// render the linked schema with sample values.
fn run_link_phase(
    config: &RunConfig,
    resources: &DbResources,
    embedder: &dyn Embedder,
    question: &str,
    policy: &mut dyn Policy,
) -> Result<LinkPhase> {
    let mut adapter = resources.open_adapter()?;
    let session = config.session_config()?;
    let mut envs = SessionEnvs {
        adapter: &mut adapter,
        index: &resources.index,
        embedder,
        catalog: &resources.catalog,
    };
    let outcome = run_session(question, &mut envs, policy, &session)?;
    let samples = collect_sample_map(
        &mut adapter,
        &outcome.linked,
        config.eval.sample_values,
        &config.limits,
    );
    let schema_text = format_mschema(&outcome.linked, &resources.catalog, Some(&samples))?;
    Ok(LinkPhase {
        outcome,
        schema_text,
    })
}

/// Runs one linking session and writes the transcript, the linked
/// schema, and a one-line summary.
pub fn cmd_link(config: &RunConfig, db_id: &str, question: &str) -> Result<()> {
    let embedder = backends::build_embedder(config)?;
    let resources = backends::resources_for(config, db_id, embedder.as_ref())?;
    let (mut policy, _) = backends::single_policies(config, db_id)?;
    let phase = run_link_phase(config, &resources, embedder.as_ref(), question, policy.as_mut())?;

    create_dir(&config.out_dir)?;
    let transcript_path = config.out_dir.join("transcript.jsonl");
    agent::write_transcript(&transcript_path, &phase.outcome.transcript)?;
    let schema_path = config.out_dir.join("linked_schema.txt");
    write_file(&schema_path, &phase.schema_text)?;
    eprintln!(
        "wrote {} and {}",
        transcript_path.display(),
        schema_path.display()
    );

    let (input_tokens, output_tokens) = token_totals(&phase.outcome.transcript);
    println!(
        "turns: {} linked_columns: {} input_tokens: {} output_tokens: {}",
        phase.outcome.transcript.len(),
        phase.outcome.linked.len(),
        input_tokens,
        output_tokens
    );
    if let StopReason::PolicyFailure { message } = &phase.outcome.stop_reason {
        return Err(Error::Policy(format!("linking policy failed: {message}")));
    }
    Ok(())
}

/// Links, then samples, corrects, groups, and votes. Prints the final
/// SQL and writes a candidate-level report.
pub fn cmd_generate(config: &RunConfig, db_id: &str, question: &str) -> Result<()> {
    let embedder = backends::build_embedder(config)?;
    let resources = backends::resources_for(config, db_id, embedder.as_ref())?;
    let (mut link_policy, mut generation_policy) = backends::single_policies(config, db_id)?;
    let phase = run_link_phase(
        config,
        &resources,
        embedder.as_ref(),
        question,
        link_policy.as_mut(),
    )?;
    if let StopReason::PolicyFailure { message } = &phase.outcome.stop_reason {
        return Err(Error::Policy(format!("linking policy failed: {message}")));
    }

    let mut ledger = TokenLedger::new();
    ledger.extend(phase.outcome.transcript.iter().map(|record| record.usage));
    let settings = GenerationSettings {
        candidates: config.hyper.candidates,
        t_max_corr: config.hyper.t_max_corr,
        temperature: config.hyper.sql_temperature,
        seed: seed_for_case(config.eval.seed, question),
        generation_template: config.generation_template()?.to_string(),
        correction_template: config.correction_template()?.to_string(),
        selection_template: config.selection_template()?.to_string(),
    };
    let mut adapter = resources.open_adapter()?;
    let mut generation = run_generation_pipeline(
        question,
        &phase.schema_text,
        &settings,
        &mut adapter,
        &config.limits,
        generation_policy.as_mut(),
        &mut ledger,
    )?;

    for candidate in &mut generation.candidates {
        if let Some(feedback) = &mut candidate.final_feedback {
            feedback.elapsed_secs = 0.0;
        }
    }
    let (input_tokens, output_tokens) = ledger.totals();
    let report = json!({
        "db_id": db_id,
        "question": question,
        "seed": config.eval.seed,
        "linked_columns": phase.outcome.linked.len(),
        "turns_used": phase.outcome.transcript.len(),
        "input_tokens": input_tokens,
        "output_tokens": output_tokens,
        "token_source": ledger.source_label(),
        "final_sql": generation.selected_sql,
        "candidates": generation.candidates,
        "groups": generation.groups,
        "selection": generation.selection,
    });
    create_dir(&config.out_dir)?;
    let report_path = config.out_dir.join("generate_report.json");
    let mut rendered = serde_json::to_string_pretty(&report)
        .map_err(|error| Error::Validation(format!("report serialization: {error}")))?;
    rendered.push('\n');
    write_file(&report_path, &rendered)?;
    eprintln!("wrote {}", report_path.display());

    match generation.selected_sql {
        Some(sql) => {
            println!("{sql}");
            Ok(())
        }
        None => Err(Error::Validation(format!(
            "no candidate produced an executable SQL; diagnostic report at {}",
            report_path.display()
        ))),
    }
}

/// Evaluates a benchmark file and writes JSON and text reports. The
/// exit status reflects infrastructure failures only, never metrics.
pub fn cmd_eval(config: &RunConfig, benchmark: &Path) -> Result<()> {
    let cases = load_benchmark(benchmark)?;
    let embedder = backends::build_embedder(config)?;
    let catalogs = backends::load_catalogs(config)?;
    let referenced: BTreeSet<&str> = cases.iter().map(|case| case.db_id.as_str()).collect();
    let mut resources = BTreeMap::new();
    for (db_id, catalog) in catalogs {
        if !referenced.contains(db_id.as_str()) {
            continue;
        }
        let index = backends::load_index_checked(config, &db_id, &catalog, embedder.as_ref())?;
        let source = backends::db_source(config, &db_id)?;
        resources.insert(
            db_id,
            DbResources {
                catalog,
                index,
                source,
            },
        );
    }

    let provider = backends::eval_provider(config)?;
    let options = config.eval_options()?;
    eprintln!(
        "evaluating {} case(s) across {} database(s) with {} worker(s)",
        cases.len(),
        resources.len(),
        options.jobs
    );
    let report = run_benchmark(
        &cases,
        &resources,
        embedder.as_ref(),
        provider.as_ref(),
        &options,
    );

    create_dir(&config.out_dir)?;
    let json_path = config.out_dir.join("eval_report.json");
    let text_path = config.out_dir.join("eval_report.txt");
    write_file(&json_path, &emit_json(&report)?)?;
    let text = emit_text(&report);
    write_file(&text_path, &text)?;
    eprintln!("wrote {} and {}", json_path.display(), text_path.display());
    print!("{text}");
    Ok(())
}
