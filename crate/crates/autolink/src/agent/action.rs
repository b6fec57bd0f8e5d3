//! Action grammar for policy outputs.
//!
//! A policy turn is well formed when it carries exactly one `<think>` block
//! and one `<actions>` block, and every non-blank line inside the actions
//! block parses as `@<name>(`argument`)`. `@stop_action` alone takes an
//! empty argument list. Violations are reported as [`MalformedOutput`]
//! values rather than hard errors: the session layer renders them back to
//! the policy as an observation and keeps going.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The five verbs a policy may emit inside an `<actions>` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    ExploreSchema,
    RetrieveSchema,
    VerifySchema,
    AddSchema,
    StopAction,
}

impl ActionKind {
    /// The wire name, without the `@` sigil.
    pub fn name(self) -> &'static str {
        match self {
            ActionKind::ExploreSchema => "explore_schema",
            ActionKind::RetrieveSchema => "retrieve_schema",
            ActionKind::VerifySchema => "verify_schema",
            ActionKind::AddSchema => "add_schema",
            ActionKind::StopAction => "stop_action",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "explore_schema" => Some(ActionKind::ExploreSchema),
            "retrieve_schema" => Some(ActionKind::RetrieveSchema),
            "verify_schema" => Some(ActionKind::VerifySchema),
            "add_schema" => Some(ActionKind::AddSchema),
            "stop_action" => Some(ActionKind::StopAction),
            _ => None,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl FromStr for ActionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::from_name(s).ok_or_else(|| format!("unknown action name: {s}"))
    }
}

/// One parsed action line. `argument` is empty for `stop_action`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub argument: String,
}

impl Action {
    pub fn new(kind: ActionKind, argument: impl Into<String>) -> Self {
        Action {
            kind,
            argument: argument.into(),
        }
    }

    pub fn stop() -> Self {
        Action::new(ActionKind::StopAction, "")
    }
}

/// A policy output that passed the grammar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedOutput {
    pub reasoning: String,
    pub actions: Vec<Action>,
}

/// Why a policy output was rejected. The reason is rendered verbatim into
/// the observation shown back to the policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedOutput {
    pub reason: String,
}

impl MalformedOutput {
    fn new(reason: impl Into<String>) -> Self {
        MalformedOutput {
            reason: reason.into(),
        }
    }
}

impl fmt::Display for MalformedOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.reason)
    }
}

/// Parses and validates one raw policy output.
///
/// `disabled` lists action kinds rejected in this run; emitting one is a
/// grammar violation just like an unknown name, so ablated sessions keep
/// a single enforcement point.
pub fn parse_policy_output(
    raw: &str,
    disabled: &BTreeSet<ActionKind>,
) -> Result<ParsedOutput, MalformedOutput> {
    let reasoning = extract_block(raw, "think")?;
    let body = extract_block(raw, "actions")?;

    let mut actions = Vec::new();
    for line in body.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        actions.push(parse_action_line(line)?);
    }

    if actions.is_empty() {
        return Err(MalformedOutput::new("the <actions> block lists no actions"));
    }
    for action in &actions {
        if disabled.contains(&action.kind) {
            return Err(MalformedOutput::new(format!(
                "@{} is disabled in this run",
                action.kind
            )));
        }
    }
    if actions
        .iter()
        .all(|action| action.kind == ActionKind::AddSchema)
    {
        return Err(MalformedOutput::new(
            "@add_schema must be paired with another action in the same turn",
        ));
    }

    Ok(ParsedOutput {
        reasoning: reasoning.trim().to_string(),
        actions,
    })
}

/// Returns the contents of the first `<tag>...</tag>` span.
fn extract_block(raw: &str, tag: &str) -> Result<String, MalformedOutput> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = raw
        .find(&open)
        .ok_or_else(|| MalformedOutput::new(format!("missing {open} block")))?;
    let after_open = start + open.len();
    let end = raw[after_open..]
        .find(&close)
        .ok_or_else(|| MalformedOutput::new(format!("unterminated {open} block")))?;
    Ok(raw[after_open..after_open + end].to_string())
}

/// Parses one trimmed, non-empty action line.
fn parse_action_line(line: &str) -> Result<Action, MalformedOutput> {
    let rest = line.strip_prefix('@').ok_or_else(|| {
        MalformedOutput::new(format!("unrecognized action line: {line}"))
    })?;
    let paren = rest.find('(').ok_or_else(|| {
        MalformedOutput::new(format!("unrecognized action line: {line}"))
    })?;
    let name = &rest[..paren];
    let kind = ActionKind::from_name(name)
        .ok_or_else(|| MalformedOutput::new(format!("unknown action @{name}")))?;
    let tail = &rest[paren + 1..];

    if kind == ActionKind::StopAction {
        if tail != ")" {
            return Err(MalformedOutput::new(
                "@stop_action takes no argument; write @stop_action()",
            ));
        }
        return Ok(Action::stop());
    }

    let argument = tail
        .strip_prefix('`')
        .and_then(|inner| inner.strip_suffix("`)"))
        .ok_or_else(|| {
            MalformedOutput::new(format!(
                "@{kind} argument must be wrapped in backticks"
            ))
        })?;
    if argument.trim().is_empty() {
        return Err(MalformedOutput::new(format!("@{kind} argument is empty")));
    }
    if kind == ActionKind::AddSchema {
        parse_add_argument(argument).map_err(MalformedOutput::new)?;
    }
    Ok(Action::new(kind, argument))
}

/// Splits an `add_schema` argument into `(table, column)` pairs. The
/// argument is a semicolon-separated list of `table.column` identifiers;
/// the split is on the last dot so tables with dotted names survive.
pub fn parse_add_argument(argument: &str) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for piece in argument.split(';') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        let (table, column) = piece.rsplit_once('.').ok_or_else(|| {
            format!("@add_schema expects table.column identifiers, got: {piece}")
        })?;
        let table = table.trim();
        let column = column.trim();
        if table.is_empty() || column.is_empty() {
            return Err(format!(
                "@add_schema expects table.column identifiers, got: {piece}"
            ));
        }
        pairs.push((table.to_string(), column.to_string()));
    }
    if pairs.is_empty() {
        return Err("@add_schema argument lists no identifiers".to_string());
    }
    Ok(pairs)
}
