//! Execution-based majority voting with pairwise tiebreak.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dbenv::{execute, render_feedback, DialectAdapter, ExecLimits};
use crate::error::{Error, Result};
use crate::policy::{ChatMessage, Policy, PolicyRequest, Sampling, TokenLedger};
use crate::sqlgen::candidate::Candidate;
use crate::sqlgen::grouping::ResultGroup;
use crate::template::render_template;

/// How the judge ruled on one pair of tied representatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairVerdict {
    AWins,
    BWins,
    /// The reply matched neither label; both sides get half a win.
    Draw,
}

/// One recorded judgment from the tiebreak phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairJudgment {
    pub candidate_a: usize,
    pub candidate_b: usize,
    pub reply: String,
    pub verdict: PairVerdict,
}

/// Pairwise score for one representative, in half-win units so draws
/// stay exact: a win is worth 2, a draw 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseScore {
    pub candidate_id: usize,
    pub win_units: u32,
}

/// Everything the selection decided and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub selected_id: usize,
    /// Group sizes in descending order.
    pub group_sizes: Vec<usize>,
    /// Whether tied majority groups forced a pairwise tiebreak.
    pub tie_break: bool,
    pub judgments: Vec<PairJudgment>,
    pub scores: Vec<PairwiseScore>,
}

/// Picks the final candidate: a uniformly random member of the unique
/// largest group, or, when several groups tie for largest, the tied
/// groups' smallest-id representatives are judged pairwise and the most
/// wins take it (win-count ties fall back to the seeded rng).
#[allow(clippy::too_many_arguments)]
pub fn select_final<R: Rng>(
    candidates: &[Candidate],
    groups: &[ResultGroup],
    question: &str,
    selection_template: &str,
    adapter: &mut dyn DialectAdapter,
    limits: &ExecLimits,
    policy: &mut dyn Policy,
    rng: &mut R,
    ledger: &mut TokenLedger,
) -> Result<SelectionReport> {
    if groups.is_empty() {
        return Err(Error::Validation(
            "no executable candidates to vote on".into(),
        ));
    }
    let group_sizes: Vec<usize> = groups.iter().map(|group| group.members.len()).collect();
    let max_size = *group_sizes.iter().max().expect("groups is nonempty");
    let maximal: Vec<&ResultGroup> = groups
        .iter()
        .filter(|group| group.members.len() == max_size)
        .collect();

    if maximal.len() == 1 {
        let members = &maximal[0].members;
        let selected_id = members[rng.random_range(0..members.len())];
        return Ok(SelectionReport {
            selected_id,
            group_sizes,
            tie_break: false,
            judgments: Vec::new(),
            scores: Vec::new(),
        });
    }

    let mut representatives: Vec<usize> = maximal
        .iter()
        .map(|group| *group.members.iter().min().expect("groups are never empty"))
        .collect();
    representatives.sort_unstable();

    let mut rendered: BTreeMap<usize, (String, String)> = BTreeMap::new();
    for &id in &representatives {
        let sql = candidate_sql(candidates, id)?;
        let feedback = execute(adapter, sql, limits);
        rendered.insert(id, (sql.to_string(), render_feedback(&feedback)));
    }

    let mut units: BTreeMap<usize, u32> =
        representatives.iter().map(|&id| (id, 0)).collect();
    let mut judgments = Vec::new();
    for (left_index, &a) in representatives.iter().enumerate() {
        for &b in &representatives[left_index + 1..] {
            let (sql_a, result_a) = &rendered[&a];
            let (sql_b, result_b) = &rendered[&b];
            let values: BTreeMap<&str, String> = BTreeMap::from([
                ("question", question.to_string()),
                ("sql_a", sql_a.clone()),
                ("result_a", result_a.clone()),
                ("sql_b", sql_b.clone()),
                ("result_b", result_b.clone()),
            ]);
            let prompt = render_template(selection_template, &values)?;
            let request = PolicyRequest::new(
                vec![ChatMessage::user(prompt)],
                Sampling::deterministic(),
            )?;
            let (reply, usage) = policy.complete(&request)?;
            ledger.record(usage);
            let verdict = parse_judge_reply(&reply);
            match verdict {
                PairVerdict::AWins => *units.get_mut(&a).expect("seeded above") += 2,
                PairVerdict::BWins => *units.get_mut(&b).expect("seeded above") += 2,
                PairVerdict::Draw => {
                    *units.get_mut(&a).expect("seeded above") += 1;
                    *units.get_mut(&b).expect("seeded above") += 1;
                }
            }
            judgments.push(PairJudgment {
                candidate_a: a,
                candidate_b: b,
                reply,
                verdict,
            });
        }
    }

    let best = *units.values().max().expect("representatives is nonempty");
    let top: Vec<usize> = representatives
        .iter()
        .copied()
        .filter(|id| units[id] == best)
        .collect();
    let selected_id = top[rng.random_range(0..top.len())];

    Ok(SelectionReport {
        selected_id,
        group_sizes,
        tie_break: true,
        judgments,
        scores: representatives
            .iter()
            .map(|&candidate_id| PairwiseScore {
                candidate_id,
                win_units: units[&candidate_id],
            })
            .collect(),
    })
}

fn candidate_sql(candidates: &[Candidate], id: usize) -> Result<&str> {
    candidates
        .iter()
        .find(|candidate| candidate.id == id)
        .and_then(Candidate::effective_sql)
        .ok_or_else(|| {
            Error::Validation(format!("group references candidate {id} without SQL"))
        })
}

/// A judge reply counts only when it is exactly the label `A` or `B`
/// (case-insensitive, ignoring surrounding whitespace and a trailing
/// period); anything else is a draw.
fn parse_judge_reply(reply: &str) -> PairVerdict {
    let trimmed = reply.trim().trim_end_matches('.').trim();
    if trimmed.eq_ignore_ascii_case("a") {
        PairVerdict::AWins
    } else if trimmed.eq_ignore_ascii_case("b") {
        PairVerdict::BWins
    } else {
        PairVerdict::Draw
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbenv::SqliteAdapter;
    use crate::policy::ScriptedPolicy;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SELECTION: &str = "Q: {question}\nA: {sql_a}\n{result_a}\nB: {sql_b}\n{result_b}\nPick one.";

    fn adapter() -> SqliteAdapter {
        SqliteAdapter::open_memory_seeded(
            "CREATE TABLE t(v INTEGER); INSERT INTO t VALUES (1), (2);",
        )
        .unwrap()
    }

    fn candidate(id: usize) -> Candidate {
        Candidate {
            id,
            raw_output: String::new(),
            sql: Some(format!("SELECT v FROM t WHERE v <= {id}")),
            extraction_error: None,
            corrected_sql: None,
            correction_turns: 0,
            final_feedback: None,
        }
    }

    fn group(members: &[usize]) -> ResultGroup {
        ResultGroup {
            canonical_result: format!("result-of-{members:?}"),
            members: members.to_vec(),
        }
    }

    fn run(
        groups: &[ResultGroup],
        script: Vec<String>,
        seed: u64,
    ) -> SelectionReport {
        let candidates: Vec<Candidate> = groups
            .iter()
            .flat_map(|group| group.members.iter().map(|&id| candidate(id)))
            .collect();
        let mut adapter = adapter();
        let mut policy = ScriptedPolicy::new(script);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ledger = TokenLedger::new();
        select_final(
            &candidates,
            groups,
            "q",
            SELECTION,
            &mut adapter,
            &ExecLimits::default(),
            &mut policy,
            &mut rng,
            &mut ledger,
        )
        .unwrap()
    }

    #[test]
    fn empty_groups_are_an_error() {
        let mut adapter = adapter();
        let mut policy = ScriptedPolicy::new(Vec::<String>::new());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ledger = TokenLedger::new();
        let error = select_final(
            &[],
            &[],
            "q",
            SELECTION,
            &mut adapter,
            &ExecLimits::default(),
            &mut policy,
            &mut rng,
            &mut ledger,
        )
        .unwrap_err();
        assert!(error.to_string().contains("no executable candidates"), "{error}");
    }

    #[test]
    fn unique_majority_skips_the_judge() {
        let groups = [group(&[1, 2, 4]), group(&[3, 5])];
        let report = run(&groups, Vec::new(), 11);
        assert!(!report.tie_break);
        assert!(report.judgments.is_empty());
        assert!(groups[0].members.contains(&report.selected_id));
        assert_eq!(report.group_sizes, vec![3, 2]);
    }

    #[test]
    fn single_group_is_degenerate() {
        let groups = [group(&[1, 2, 3, 4, 5])];
        let report = run(&groups, Vec::new(), 0);
        assert!(groups[0].members.contains(&report.selected_id));
    }

    #[test]
    fn seeded_selection_is_reproducible() {
        let groups = [group(&[1, 2, 4]), group(&[3, 5])];
        let first = run(&groups, Vec::new(), 42);
        let second = run(&groups, Vec::new(), 42);
        assert_eq!(first, second);
    }

    #[test]
    fn tied_groups_judge_min_id_representatives() {
        let groups = [group(&[1, 3]), group(&[2, 5]), group(&[4])];
        let report = run(
            &groups,
            vec!["A".to_string()],
            7,
        );
        assert!(report.tie_break);
        assert_eq!(report.judgments.len(), 1);
        assert_eq!(report.judgments[0].candidate_a, 1);
        assert_eq!(report.judgments[0].candidate_b, 2);
        assert_eq!(report.judgments[0].verdict, PairVerdict::AWins);
        assert_eq!(report.selected_id, 1);
        assert_eq!(
            report.scores,
            vec![
                PairwiseScore { candidate_id: 1, win_units: 2 },
                PairwiseScore { candidate_id: 2, win_units: 0 },
            ]
        );
    }

    #[test]
    fn most_pairwise_wins_take_a_three_way_tie() {
        let groups = [group(&[1]), group(&[4]), group(&[7])];
        let report = run(
            &groups,
            vec!["A".to_string(), "A.".to_string(), "b".to_string()],
            0,
        );
        assert_eq!(report.judgments.len(), 3);
        assert_eq!(report.selected_id, 1);
        assert_eq!(
            report.scores,
            vec![
                PairwiseScore { candidate_id: 1, win_units: 4 },
                PairwiseScore { candidate_id: 4, win_units: 0 },
                PairwiseScore { candidate_id: 7, win_units: 2 },
            ]
        );
    }

    #[test]
    fn unparseable_replies_score_as_draws() {
        let groups = [group(&[1]), group(&[2])];
        let report = run(&groups, vec!["I prefer the first one".to_string()], 5);
        assert_eq!(report.judgments[0].verdict, PairVerdict::Draw);
        assert_eq!(
            report.scores,
            vec![
                PairwiseScore { candidate_id: 1, win_units: 1 },
                PairwiseScore { candidate_id: 2, win_units: 1 },
            ]
        );
        assert!(report.selected_id == 1 || report.selected_id == 2);
        let again = run(&groups, vec!["I prefer the first one".to_string()], 5);
        assert_eq!(report.selected_id, again.selected_id);
    }

    #[test]
    fn judge_prompts_carry_both_sides() {
        struct Capture {
            inner: ScriptedPolicy,
            prompts: Vec<String>,
        }
        impl Policy for Capture {
            fn complete(
                &mut self,
                request: &PolicyRequest,
            ) -> crate::error::Result<(String, crate::policy::TokenUsage)> {
                self.prompts.push(request.messages[0].content.clone());
                self.inner.complete(request)
            }
        }
        let groups = [group(&[1]), group(&[2])];
        let candidates: Vec<Candidate> = vec![candidate(1), candidate(2)];
        let mut adapter = adapter();
        let mut policy = Capture {
            inner: ScriptedPolicy::new(["B".to_string()]),
            prompts: Vec::new(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ledger = TokenLedger::new();
        let report = select_final(
            &candidates,
            &groups,
            "pick the best",
            SELECTION,
            &mut adapter,
            &ExecLimits::default(),
            &mut policy,
            &mut rng,
            &mut ledger,
        )
        .unwrap();
        assert_eq!(report.selected_id, 2);
        let prompt = &policy.prompts[0];
        assert!(prompt.contains("pick the best"), "{prompt}");
        assert!(prompt.contains("SELECT v FROM t WHERE v <= 1"), "{prompt}");
        assert!(prompt.contains("SELECT v FROM t WHERE v <= 2"), "{prompt}");
        assert!(prompt.contains("[Total rows: 1, Execution time: "), "{prompt}");
        assert_eq!(ledger.entries().len(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        /// The selection always lands in a maximal-cardinality group,
        /// whatever the size profile and however the judge waffles.
        #[test]
        fn selection_stays_in_a_maximal_group(
            sizes in proptest::collection::vec(1usize..4, 1..5),
            seed in 0u64..1000,
        ) {
            let mut next_id = 1;
            let groups: Vec<ResultGroup> = sizes
                .iter()
                .map(|&size| {
                    let members: Vec<usize> = (next_id..next_id + size).collect();
                    next_id += size;
                    group(&members)
                })
                .collect();
            let pair_budget = groups.len() * groups.len();
            let script: Vec<String> = (0..pair_budget).map(|_| "shrug".to_string()).collect();
            let report = run(&groups, script, seed);

            let max_size = sizes.iter().copied().max().unwrap();
            let in_maximal = groups
                .iter()
                .filter(|group| group.members.len() == max_size)
                .any(|group| group.members.contains(&report.selected_id));
            prop_assert!(in_maximal);
        }
    }
}
