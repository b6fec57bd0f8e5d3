//! Self-consistency sampling and iterative statement correction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dbenv::{execute, DialectAdapter, ExecLimits, FeedbackKind, SqlFeedback};
use crate::error::{Error, Result};
use crate::policy::{ChatMessage, Policy, PolicyRequest, Sampling, TokenLedger};
use crate::template::render_template;

/// One sampled SQL candidate and everything learned about it since.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// 1-based sample index.
    pub id: usize,
    /// The completion verbatim.
    pub raw_output: String,
    /// SQL extracted from the completion, absent when extraction failed.
    pub sql: Option<String>,
    /// Why extraction failed, when it did.
    pub extraction_error: Option<String>,
    /// The statement after correction; equals `sql` at zero turns.
    pub corrected_sql: Option<String>,
    /// Number of revision round trips taken.
    pub correction_turns: usize,
    /// Outcome of the last correction-phase execution.
    pub final_feedback: Option<SqlFeedback>,
}

impl Candidate {
    /// The statement this candidate stands behind right now.
    pub fn effective_sql(&self) -> Option<&str> {
        self.corrected_sql.as_deref().or(self.sql.as_deref())
    }
}

/// Returns the contents of the first fenced code block labeled as SQL.
///
/// The opening fence must carry an `sql` or `sqlite` tag; an unterminated
/// or empty block does not count.
pub fn extract_sql(completion: &str) -> Option<String> {
    let mut inside = false;
    let mut body: Vec<&str> = Vec::new();
    for line in completion.lines() {
        let trimmed = line.trim();
        if !inside {
            if let Some(label) = trimmed.strip_prefix("```") {
                let label = label.trim().to_lowercase();
                if label == "sql" || label == "sqlite" {
                    inside = true;
                }
            }
            continue;
        }
        if trimmed == "```" {
            let sql = body.join("\n").trim().to_string();
            if sql.is_empty() {
                return None;
            }
            return Some(sql);
        }
        body.push(line);
    }
    None
}

/// Draws `n` independent stochastic completions conditioned on the
/// question and the linked-schema text only, extracting one SQL
/// candidate from each. Completions without a usable block become
/// invalid candidates rather than failures.
#[allow(clippy::too_many_arguments)]
pub fn sample_candidates(
    question: &str,
    schema_text: &str,
    n: usize,
    temperature: f64,
    base_seed: Option<u64>,
    generation_template: &str,
    policy: &mut dyn Policy,
    ledger: &mut TokenLedger,
) -> Result<Vec<Candidate>> {
    if n == 0 {
        return Err(Error::Validation(
            "candidate count must be at least 1".into(),
        ));
    }
    if schema_text.trim().is_empty() {
        return Err(Error::Validation(
            "cannot generate SQL against an empty linked schema".into(),
        ));
    }
    let values: BTreeMap<&str, String> = BTreeMap::from([
        ("question", question.to_string()),
        ("schema", schema_text.to_string()),
    ]);
    let prompt = render_template(generation_template, &values)?;

    let mut candidates = Vec::with_capacity(n);
    for id in 1..=n {
        let sampling = Sampling::stochastic(
            temperature,
            base_seed.map(|seed| seed.wrapping_add(id as u64 - 1)),
        );
        let request = PolicyRequest::new(vec![ChatMessage::user(prompt.clone())], sampling)?;
        let (raw_output, usage) = policy.complete(&request)?;
        ledger.record(usage);
        let sql = extract_sql(&raw_output);
        let extraction_error = if sql.is_none() {
            Some("completion contains no fenced SQL block".to_string())
        } else {
            None
        };
        candidates.push(Candidate {
            id,
            raw_output,
            sql,
            extraction_error,
            corrected_sql: None,
            correction_turns: 0,
            final_feedback: None,
        });
    }
    Ok(candidates)
}

/// Executes the candidate and, on engine errors, asks the policy for a
/// revision carrying the failing statement and the error text, up to
/// `t_max_corr` round trips. Success, empty results, and timeouts end
/// the loop; a revision without a usable SQL block ends it too, keeping
/// the last statement and its error.
#[allow(clippy::too_many_arguments)]
pub fn correct_candidate(
    mut candidate: Candidate,
    adapter: &mut dyn DialectAdapter,
    limits: &ExecLimits,
    question: &str,
    schema_text: &str,
    correction_template: &str,
    t_max_corr: usize,
    temperature: f64,
    base_seed: Option<u64>,
    policy: &mut dyn Policy,
    ledger: &mut TokenLedger,
) -> Result<Candidate> {
    let Some(initial_sql) = candidate.sql.clone() else {
        return Ok(candidate);
    };

    let mut current = initial_sql;
    let mut turns = 0usize;
    let mut messages: Vec<ChatMessage> = Vec::new();

    loop {
        let feedback = execute(adapter, &current, limits);
        let failed = feedback.kind == FeedbackKind::EngineError;
        candidate.final_feedback = Some(feedback.clone());
        if !failed || turns >= t_max_corr {
            break;
        }

        let values: BTreeMap<&str, String> = BTreeMap::from([
            ("question", question.to_string()),
            ("schema", schema_text.to_string()),
            ("sql", current.clone()),
            ("error", feedback.message.clone()),
        ]);
        messages.push(ChatMessage::user(render_template(
            correction_template,
            &values,
        )?));
        let sampling = Sampling::stochastic(
            temperature,
            base_seed.map(|seed| seed.wrapping_add(turns as u64)),
        );
        let request = PolicyRequest::new(messages.clone(), sampling)?;
        let (raw_output, usage) = policy.complete(&request)?;
        ledger.record(usage);
        messages.push(ChatMessage::assistant(raw_output.clone()));

        match extract_sql(&raw_output) {
            Some(revised) => {
                current = revised;
                turns += 1;
            }
            None => break,
        }
    }

    candidate.corrected_sql = Some(current);
    candidate.correction_turns = turns;
    Ok(candidate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbenv::SqliteAdapter;
    use crate::policy::ScriptedPolicy;

    const GENERATION: &str = "Question: {question}\nSchema:\n{schema}\nWrite SQL.";
    const CORRECTION: &str =
        "Question: {question}\nSchema:\n{schema}\nFailed SQL: {sql}\nError: {error}\nFix it.";

    fn fenced(sql: &str) -> String {
        format!("Here you go.\n```sql\n{sql}\n```\nDone.")
    }

    fn adapter() -> SqliteAdapter {
        SqliteAdapter::open_memory_seeded(
            "CREATE TABLE orders(id INTEGER, total REAL);\
             INSERT INTO orders VALUES (1, 9.5), (2, 12.0);",
        )
        .unwrap()
    }

    #[test]
    fn extracts_the_first_labeled_block() {
        let text = "prose\n```python\nx = 1\n```\n```sql\nSELECT 1;\n```\n```sql\nSELECT 2;\n```";
        assert_eq!(extract_sql(text).unwrap(), "SELECT 1;");
    }

    #[test]
    fn accepts_sqlite_labels_case_insensitively() {
        assert_eq!(
            extract_sql("```SQLite\nSELECT 3\n```").unwrap(),
            "SELECT 3"
        );
        assert_eq!(extract_sql("```SQL\nSELECT 4\n```").unwrap(), "SELECT 4");
    }

    #[test]
    fn rejects_unlabeled_unterminated_and_empty_blocks() {
        assert_eq!(extract_sql("```\nSELECT 1\n```"), None);
        assert_eq!(extract_sql("```sql\nSELECT 1"), None);
        assert_eq!(extract_sql("```sql\n\n```"), None);
        assert_eq!(extract_sql("no code at all"), None);
    }

    #[test]
    fn multiline_statements_survive_extraction() {
        let sql = "SELECT id,\n       total\nFROM orders\nWHERE total > 10";
        assert_eq!(extract_sql(&fenced(sql)).unwrap(), sql);
    }

    #[test]
    fn samples_n_candidates_in_order() {
        let mut policy = ScriptedPolicy::new([
            fenced("SELECT 1"),
            "no sql here".to_string(),
            fenced("SELECT 3"),
        ]);
        let mut ledger = TokenLedger::new();
        let candidates = sample_candidates(
            "q",
            "[DB_ID] shop",
            3,
            1.0,
            Some(7),
            GENERATION,
            &mut policy,
            &mut ledger,
        )
        .unwrap();
        assert_eq!(candidates.len(), 3);
        assert_eq!(candidates[0].id, 1);
        assert_eq!(candidates[0].sql.as_deref(), Some("SELECT 1"));
        assert_eq!(candidates[1].sql, None);
        assert!(candidates[1]
            .extraction_error
            .as_deref()
            .unwrap()
            .contains("no fenced SQL block"));
        assert_eq!(candidates[2].sql.as_deref(), Some("SELECT 3"));
        assert_eq!(ledger.entries().len(), 3);
    }

    #[test]
    fn sampling_conditions_only_on_question_and_schema() {
        struct Capture {
            inner: ScriptedPolicy,
            prompts: Vec<PolicyRequest>,
        }
        impl Policy for Capture {
            fn complete(
                &mut self,
                request: &PolicyRequest,
            ) -> crate::error::Result<(String, crate::policy::TokenUsage)> {
                self.prompts.push(request.clone());
                self.inner.complete(request)
            }
        }
        let mut policy = Capture {
            inner: ScriptedPolicy::new([fenced("SELECT 1"), fenced("SELECT 2")]),
            prompts: Vec::new(),
        };
        let mut ledger = TokenLedger::new();
        sample_candidates(
            "count the orders",
            "[DB_ID] shop\n# Table orders\n(id: INTEGER)",
            2,
            1.0,
            Some(3),
            GENERATION,
            &mut policy,
            &mut ledger,
        )
        .unwrap();

        for (index, request) in policy.prompts.iter().enumerate() {
            assert_eq!(request.messages.len(), 1);
            assert!(request.messages[0].content.contains("count the orders"));
            assert!(request.messages[0].content.contains("# Table orders"));
            assert_eq!(request.sampling.temperature, 1.0);
            assert_eq!(request.sampling.seed, Some(3 + index as u64));
        }
    }

    #[test]
    fn rejects_empty_schema_and_zero_n() {
        let mut policy = ScriptedPolicy::new([fenced("SELECT 1")]);
        let mut ledger = TokenLedger::new();
        assert!(sample_candidates(
            "q", "  ", 1, 1.0, None, GENERATION, &mut policy, &mut ledger
        )
        .is_err());
        assert!(sample_candidates(
            "q",
            "[DB_ID] x",
            0,
            1.0,
            None,
            GENERATION,
            &mut policy,
            &mut ledger
        )
        .is_err());
    }

    fn raw_candidate(id: usize, sql: &str) -> Candidate {
        Candidate {
            id,
            raw_output: fenced(sql),
            sql: Some(sql.to_string()),
            extraction_error: None,
            corrected_sql: None,
            correction_turns: 0,
            final_feedback: None,
        }
    }

    #[test]
    fn clean_candidates_need_zero_correction_turns() {
        let mut adapter = adapter();
        let mut policy = ScriptedPolicy::new(Vec::<String>::new());
        let mut ledger = TokenLedger::new();
        let corrected = correct_candidate(
            raw_candidate(1, "SELECT id FROM orders"),
            &mut adapter,
            &ExecLimits::default(),
            "q",
            "schema",
            CORRECTION,
            5,
            1.0,
            None,
            &mut policy,
            &mut ledger,
        )
        .unwrap();
        assert_eq!(corrected.correction_turns, 0);
        assert_eq!(corrected.corrected_sql.as_deref(), Some("SELECT id FROM orders"));
        assert_eq!(
            corrected.final_feedback.as_ref().unwrap().kind,
            FeedbackKind::Rows
        );
        assert_eq!(ledger.entries().len(), 0);
    }

    #[test]
    fn engine_errors_are_revised_until_success() {
        let mut adapter = adapter();
        let mut policy = ScriptedPolicy::new([fenced("SELECT total FROM orders")]);
        let mut ledger = TokenLedger::new();
        let corrected = correct_candidate(
            raw_candidate(1, "SELECT missing FROM orders"),
            &mut adapter,
            &ExecLimits::default(),
            "q",
            "schema",
            CORRECTION,
            5,
            1.0,
            None,
            &mut policy,
            &mut ledger,
        )
        .unwrap();
        assert_eq!(corrected.correction_turns, 1);
        assert_eq!(
            corrected.corrected_sql.as_deref(),
            Some("SELECT total FROM orders")
        );
        assert_eq!(
            corrected.final_feedback.as_ref().unwrap().kind,
            FeedbackKind::Rows
        );
        assert_eq!(ledger.entries().len(), 1);
    }

    #[test]
    fn correction_prompts_carry_the_failing_sql_and_error() {
        struct Capture {
            inner: ScriptedPolicy,
            requests: Vec<PolicyRequest>,
        }
        impl Policy for Capture {
            fn complete(
                &mut self,
                request: &PolicyRequest,
            ) -> crate::error::Result<(String, crate::policy::TokenUsage)> {
                self.requests.push(request.clone());
                self.inner.complete(request)
            }
        }
        let mut adapter = adapter();
        let mut policy = Capture {
            inner: ScriptedPolicy::new([
                fenced("SELECT still_missing FROM orders"),
                fenced("SELECT id FROM orders"),
            ]),
            requests: Vec::new(),
        };
        let mut ledger = TokenLedger::new();
        let corrected = correct_candidate(
            raw_candidate(1, "SELECT missing FROM orders"),
            &mut adapter,
            &ExecLimits::default(),
            "q",
            "schema",
            CORRECTION,
            5,
            1.0,
            None,
            &mut policy,
            &mut ledger,
        )
        .unwrap();
        assert_eq!(corrected.correction_turns, 2);

        let first = &policy.requests[0].messages;
        assert_eq!(first.len(), 1);
        assert!(first[0].content.contains("SELECT missing FROM orders"));
        assert!(first[0].content.contains("no such column: missing"));

        let second = &policy.requests[1].messages;
        assert_eq!(second.len(), 3);
        assert!(second[2].content.contains("still_missing"));
    }

    #[test]
    fn correction_stops_at_the_turn_budget() {
        let mut adapter = adapter();
        let script: Vec<String> = (0..6)
            .map(|i| fenced(&format!("SELECT broken_{i} FROM orders")))
            .collect();
        let mut policy = ScriptedPolicy::new(script);
        let mut ledger = TokenLedger::new();
        let corrected = correct_candidate(
            raw_candidate(1, "SELECT missing FROM orders"),
            &mut adapter,
            &ExecLimits::default(),
            "q",
            "schema",
            CORRECTION,
            3,
            1.0,
            None,
            &mut policy,
            &mut ledger,
        )
        .unwrap();
        assert_eq!(corrected.correction_turns, 3);
        assert_eq!(
            corrected.final_feedback.as_ref().unwrap().kind,
            FeedbackKind::EngineError
        );
        assert_eq!(corrected.corrected_sql.as_deref(), Some("SELECT broken_2 FROM orders"));
        assert_eq!(policy.remaining(), 3);
    }

    #[test]
    fn unusable_revisions_end_the_loop() {
        let mut adapter = adapter();
        let mut policy = ScriptedPolicy::new(["sorry, cannot help".to_string()]);
        let mut ledger = TokenLedger::new();
        let corrected = correct_candidate(
            raw_candidate(1, "SELECT missing FROM orders"),
            &mut adapter,
            &ExecLimits::default(),
            "q",
            "schema",
            CORRECTION,
            5,
            1.0,
            None,
            &mut policy,
            &mut ledger,
        )
        .unwrap();
        assert_eq!(corrected.correction_turns, 0);
        assert_eq!(
            corrected.corrected_sql.as_deref(),
            Some("SELECT missing FROM orders")
        );
        assert_eq!(
            corrected.final_feedback.as_ref().unwrap().kind,
            FeedbackKind::EngineError
        );
    }

    #[test]
    fn invalid_candidates_pass_through_untouched() {
        let mut adapter = adapter();
        let mut policy = ScriptedPolicy::new(Vec::<String>::new());
        let mut ledger = TokenLedger::new();
        let candidate = Candidate {
            id: 2,
            raw_output: "prose".into(),
            sql: None,
            extraction_error: Some("completion contains no fenced SQL block".into()),
            corrected_sql: None,
            correction_turns: 0,
            final_feedback: None,
        };
        let unchanged = correct_candidate(
            candidate.clone(),
            &mut adapter,
            &ExecLimits::default(),
            "q",
            "schema",
            CORRECTION,
            5,
            1.0,
            None,
            &mut policy,
            &mut ledger,
        )
        .unwrap();
        assert_eq!(unchanged, candidate);
    }

    #[test]
    fn empty_results_count_as_corrected() {
        let mut adapter = adapter();
        let mut policy = ScriptedPolicy::new(Vec::<String>::new());
        let mut ledger = TokenLedger::new();
        let corrected = correct_candidate(
            raw_candidate(1, "SELECT id FROM orders WHERE total > 1e9"),
            &mut adapter,
            &ExecLimits::default(),
            "q",
            "schema",
            CORRECTION,
            5,
            1.0,
            None,
            &mut policy,
            &mut ledger,
        )
        .unwrap();
        assert_eq!(corrected.correction_turns, 0);
        assert_eq!(
            corrected.final_feedback.as_ref().unwrap().kind,
            FeedbackKind::Empty
        );
    }
}
