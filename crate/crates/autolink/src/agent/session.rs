//! The iterative schema-linking session.
//!
//! A session starts from a retrieval-seeded linked schema, then loops:
//! the policy reads the chat history, emits actions, the environment
//! executes them, and the rendered observation is appended as the next
//! user message. The linked schema only grows, every retrieved or linked
//! column lands in the exclusion set, and the loop ends on an explicit
//! stop, the turn budget, or two consecutive malformed outputs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agent::action::{
    parse_add_argument, parse_policy_output, Action, ActionKind,
};
use crate::dbenv::{execute, render_feedback, DialectAdapter, ExecLimits};
use crate::error::Result;
use crate::policy::{ChatMessage, Policy, PolicyRequest, Sampling, TokenUsage};
use crate::schema::{format_mschema, DatabaseCatalog, LinkedSchema};
use crate::template::render_template;
use crate::vecstore::{
    assemble_snippet, initial_schema, retrieve, ColumnIndex, Embedder, ExclusionSet,
};

/// Everything a session needs from the outside world.
pub struct SessionEnvs<'a> {
    pub adapter: &'a mut dyn DialectAdapter,
    pub index: &'a ColumnIndex,
    pub embedder: &'a dyn Embedder,
    pub catalog: &'a DatabaseCatalog,
}

/// Knobs fixed for the lifetime of one session.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// Initial retrieval size.
    pub n: usize,
    /// Per-call retrieval size for `@retrieve_schema`.
    pub m: usize,
    /// Maximum number of turns.
    pub t_max: usize,
    pub limits: ExecLimits,
    /// Actions rejected at parse time in this run.
    pub disabled: BTreeSet<ActionKind>,
    /// Instruction template with `{question}`, `{table_list}`,
    /// `{initial_schema}`, and `{disabled_actions}` placeholders.
    pub instruction_template: String,
}

/// Mutable state threaded through the turns.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub linked: LinkedSchema,
    pub excl: ExclusionSet,
    pub m: usize,
    pub limits: ExecLimits,
}

/// One completed turn, as persisted to the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    /// 1-based turn number.
    pub turn: usize,
    /// The policy output verbatim.
    pub raw_output: String,
    /// Parsed reasoning, absent when the output was malformed.
    pub reasoning: Option<String>,
    /// Parsed actions in listed order, empty when malformed.
    pub actions: Vec<Action>,
    /// Rejection reason when the output failed the grammar.
    pub malformed: Option<String>,
    /// The environment text appended as the next user message.
    pub observation: String,
    pub usage: TokenUsage,
}

/// Why the session ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    /// The policy emitted `@stop_action`.
    StopAction,
    /// The turn budget ran out.
    TurnLimit,
    /// Two consecutive outputs failed the grammar.
    MalformedLimit,
    /// The policy transport failed; the transcript is partial.
    PolicyFailure { message: String },
}

impl StopReason {
    pub fn is_failure(&self) -> bool {
        matches!(self, StopReason::PolicyFailure { .. })
    }
}

/// The result of one session, failure or not: the transcript always
/// covers every turn that completed.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub linked: LinkedSchema,
    pub exclusions: ExclusionSet,
    pub transcript: Vec<TranscriptRecord>,
    pub stop_reason: StopReason,
}

/// Renders the system message that opens the chat: instruction text with
/// the question, the bare table list, the seed schema, and the names of
/// any disabled actions filled in.
pub fn build_initial_context(
    template: &str,
    question: &str,
    catalog: &DatabaseCatalog,
    initial: &LinkedSchema,
    disabled: &BTreeSet<ActionKind>,
) -> Result<String> {
    let table_list = catalog
        .tables
        .iter()
        .map(|table| table.name.as_str())
        .collect::<Vec<_>>()
        .join(", ");
    let disabled_actions = if disabled.is_empty() {
        "none".to_string()
    } else {
        disabled
            .iter()
            .map(|kind| kind.name())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let values: BTreeMap<&str, String> = BTreeMap::from([
        ("question", question.to_string()),
        ("table_list", table_list),
        ("initial_schema", format_mschema(initial, catalog, None)?),
        ("disabled_actions", disabled_actions),
    ]);
    render_template(template, &values)
}

/// Executes the parsed actions of one turn in listed order and returns
/// the combined observation plus whether the policy asked to stop.
///
/// Environment failures never abort the turn: they are rendered into the
/// observation so the policy can react on the next turn.
pub fn dispatch(
    actions: &[Action],
    state: &mut SessionState,
    envs: &mut SessionEnvs<'_>,
) -> (String, bool) {
    let mut fragments: Vec<String> = Vec::new();
    let mut stop = false;
    for action in actions {
        match action.kind {
            ActionKind::ExploreSchema | ActionKind::VerifySchema => {
                let feedback = execute(envs.adapter, &action.argument, &state.limits);
                fragments.push(render_feedback(&feedback));
            }
            ActionKind::RetrieveSchema => {
                fragments.push(dispatch_retrieve(&action.argument, state, envs));
            }
            ActionKind::AddSchema => {
                fragments.push(dispatch_add(&action.argument, state, envs));
            }
            ActionKind::StopAction => {
                stop = true;
            }
        }
    }
    (fragments.join("\n\n"), stop)
}

fn dispatch_retrieve(
    query: &str,
    state: &mut SessionState,
    envs: &mut SessionEnvs<'_>,
) -> String {
    let hits = match retrieve(query, state.m, &state.excl, envs.index, envs.embedder) {
        Ok(hits) => hits,
        Err(error) => return format!("[ERROR: {error}]"),
    };
    for hit in &hits {
        state.excl.insert_doc(&hit.doc);
    }
    match assemble_snippet(&hits, envs.catalog, state.m) {
        Ok(snippet) => snippet,
        Err(error) => format!("[ERROR: {error}]"),
    }
}

fn dispatch_add(
    argument: &str,
    state: &mut SessionState,
    envs: &mut SessionEnvs<'_>,
) -> String {
    let pairs = match parse_add_argument(argument) {
        Ok(pairs) => pairs,
        Err(message) => return format!("[ERROR: {message}]"),
    };
    let mut resolved = 0usize;
    let mut unknown: Vec<String> = Vec::new();
    for (table, column) in pairs {
        match envs.catalog.column(&table, &column) {
            Some(entry) => {
                state.linked.add(entry.clone());
                state.excl.insert_key(&table, &column);
                resolved += 1;
            }
            None => unknown.push(format!("{table}.{column}")),
        }
    }
    let mut lines = Vec::new();
    if resolved > 0 {
        let noun = if resolved == 1 { "column" } else { "columns" };
        lines.push(format!("[Added {resolved} {noun} to the linked schema]"));
    }
    if !unknown.is_empty() {
        lines.push(format!(
            "[ERROR: unknown schema identifiers: {}]",
            unknown.join(", ")
        ));
    }
    lines.join("\n")
}

/// Runs one full linking session.
///
/// The chat history maps one-to-one onto the transcript: the rendered
/// instruction is the system message, then each turn appends the raw
/// policy output as an assistant message and the observation as a user
/// message. A policy transport failure ends the session with
/// [`StopReason::PolicyFailure`] so the partial transcript survives.
pub fn run_session(
    question: &str,
    envs: &mut SessionEnvs<'_>,
    policy: &mut dyn Policy,
    config: &SessionConfig,
) -> Result<SessionOutcome> {
    let initial = initial_schema(question, config.n, envs.index, envs.embedder, envs.catalog)?;
    let context = build_initial_context(
        &config.instruction_template,
        question,
        envs.catalog,
        &initial,
        &config.disabled,
    )?;

    let excl = ExclusionSet::from_linked(&initial);
    let mut state = SessionState {
        linked: initial,
        excl,
        m: config.m,
        limits: config.limits.clone(),
    };
    let mut messages = vec![ChatMessage::system(context)];
    let mut transcript: Vec<TranscriptRecord> = Vec::new();
    let mut consecutive_malformed = 0usize;
    let mut stop_reason = StopReason::TurnLimit;

    for turn in 1..=config.t_max {
        let request = PolicyRequest::new(messages.clone(), Sampling::deterministic())?;
        let (raw_output, usage) = match policy.complete(&request) {
            Ok(reply) => reply,
            Err(error) => {
                stop_reason = StopReason::PolicyFailure {
                    message: error.to_string(),
                };
                break;
            }
        };

        let record = match parse_policy_output(&raw_output, &config.disabled) {
            Ok(parsed) => {
                consecutive_malformed = 0;
                let (observation, stop) = dispatch(&parsed.actions, &mut state, envs);
                if stop {
                    stop_reason = StopReason::StopAction;
                }
                TranscriptRecord {
                    turn,
                    raw_output: raw_output.clone(),
                    reasoning: Some(parsed.reasoning),
                    actions: parsed.actions,
                    malformed: None,
                    observation,
                    usage,
                }
            }
            Err(malformed) => {
                consecutive_malformed += 1;
                if consecutive_malformed >= 2 {
                    stop_reason = StopReason::MalformedLimit;
                }
                TranscriptRecord {
                    turn,
                    raw_output: raw_output.clone(),
                    reasoning: None,
                    actions: Vec::new(),
                    malformed: Some(malformed.reason.clone()),
                    observation: format!("[ERROR: malformed output — {}]", malformed.reason),
                    usage,
                }
            }
        };

        messages.push(ChatMessage::assistant(record.raw_output.clone()));
        messages.push(ChatMessage::user(record.observation.clone()));
        transcript.push(record);

        if matches!(
            stop_reason,
            StopReason::StopAction | StopReason::MalformedLimit
        ) {
            break;
        }
    }

    Ok(SessionOutcome {
        linked: state.linked,
        exclusions: state.excl,
        transcript,
        stop_reason,
    })
}

/// Sums the per-turn token ledger.
pub fn token_totals(transcript: &[TranscriptRecord]) -> (u64, u64) {
    transcript.iter().fold((0, 0), |(input, output), record| {
        (
            input + record.usage.input_tokens,
            output + record.usage.output_tokens,
        )
    })
}
