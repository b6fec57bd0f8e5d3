//! Execution-result canonicalization and candidate grouping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dbenv::{execute_raw, CellValue, DialectAdapter, ExecLimits, RawExecution};
use crate::sqlgen::candidate::Candidate;

/// Candidates whose executions normalize to the same result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultGroup {
    /// Canonical JSON of the sorted row multiset.
    pub canonical_result: String,
    /// Member candidate ids, ascending.
    pub members: Vec<usize>,
}

/// Maps one typed cell to a collision-free JSON value. SQL NULL stays a
/// JSON null so it can never collide with the text 'NULL'; the remaining
/// variants carry a type prefix because they all render as strings.
fn canonical_cell(cell: &CellValue) -> Value {
    match cell {
        CellValue::Null => Value::Null,
        CellValue::Integer(value) => Value::from(*value),
        CellValue::Real(value) => Value::String(format!("r:{:.5e}", value)),
        CellValue::Text(value) => Value::String(format!("t:{value}")),
        CellValue::Blob(bytes) => {
            let hex: String = bytes.iter().map(|byte| format!("{byte:02x}")).collect();
            Value::String(format!("b:{hex}"))
        }
    }
}

/// Canonical text for a result set: rows are normalized cell-wise, then
/// sorted by their serialized form so row order never matters.
pub fn canonical_result(rows: &[Vec<CellValue>]) -> String {
    let mut serialized: Vec<String> = rows
        .iter()
        .map(|row| {
            let cells: Vec<Value> = row.iter().map(canonical_cell).collect();
            Value::Array(cells).to_string()
        })
        .collect();
    serialized.sort_unstable();
    format!("[{}]", serialized.join(","))
}

/// Runs one statement with the row cap lifted and returns its canonical
/// result, or `None` when execution fails terminally.
pub fn canonical_execution(
    adapter: &mut dyn DialectAdapter,
    sql: &str,
    limits: &ExecLimits,
) -> Option<String> {
    let eval_limits = limits.unbounded_rows();
    match execute_raw(adapter, sql, &eval_limits) {
        RawExecution::Rows { rows, .. } => Some(canonical_result(&rows)),
        RawExecution::Interrupted { .. } | RawExecution::EngineError { .. } => None,
    }
}

/// Partitions candidates by canonical execution result. Candidates
/// without a statement or whose executions fail are left out entirely;
/// groups come back ordered by descending size, then by smallest member.
pub fn group_by_execution(
    candidates: &[Candidate],
    adapter: &mut dyn DialectAdapter,
    limits: &ExecLimits,
) -> Vec<ResultGroup> {
    let mut by_result: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for candidate in candidates {
        let Some(sql) = candidate.effective_sql() else {
            continue;
        };
        let Some(canonical) = canonical_execution(adapter, sql, limits) else {
            continue;
        };
        by_result.entry(canonical).or_default().push(candidate.id);
    }

    let mut groups: Vec<ResultGroup> = by_result
        .into_iter()
        .map(|(canonical_result, mut members)| {
            members.sort_unstable();
            ResultGroup {
                canonical_result,
                members,
            }
        })
        .collect();
    groups.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then_with(|| a.members[0].cmp(&b.members[0]))
    });
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbenv::SqliteAdapter;
    use proptest::prelude::*;

    fn adapter() -> SqliteAdapter {
        SqliteAdapter::open_memory_seeded(
            "CREATE TABLE t(a INTEGER, b TEXT, c REAL);\
             INSERT INTO t VALUES (1, 'x', 0.5), (2, 'y', 1.5), (3, NULL, 2.5);",
        )
        .unwrap()
    }

    fn candidate(id: usize, sql: Option<&str>) -> Candidate {
        Candidate {
            id,
            raw_output: String::new(),
            sql: sql.map(str::to_string),
            extraction_error: None,
            corrected_sql: None,
            correction_turns: 0,
            final_feedback: None,
        }
    }

    #[test]
    fn typed_null_never_collides_with_null_text() {
        let typed = canonical_result(&[vec![CellValue::Null]]);
        let text = canonical_result(&[vec![CellValue::Text("NULL".into())]]);
        assert_ne!(typed, text);
    }

    #[test]
    fn numbers_and_their_text_twins_stay_distinct() {
        let number = canonical_result(&[vec![CellValue::Integer(1)]]);
        let text = canonical_result(&[vec![CellValue::Text("1".into())]]);
        assert_ne!(number, text);
    }

    #[test]
    fn floats_compare_at_six_significant_digits() {
        let lossy = canonical_result(&[vec![CellValue::Real(0.1 + 0.2)]]);
        let exact = canonical_result(&[vec![CellValue::Real(0.3)]]);
        assert_eq!(lossy, exact);
        let close = canonical_result(&[vec![CellValue::Real(0.300001)]]);
        let closer = canonical_result(&[vec![CellValue::Real(0.3000004)]]);
        assert_ne!(close, exact);
        assert_eq!(closer, exact);
    }

    #[test]
    fn row_order_is_irrelevant() {
        let forward = canonical_result(&[
            vec![CellValue::Integer(1)],
            vec![CellValue::Integer(2)],
        ]);
        let backward = canonical_result(&[
            vec![CellValue::Integer(2)],
            vec![CellValue::Integer(1)],
        ]);
        assert_eq!(forward, backward);
    }

    #[test]
    fn multiset_cardinality_matters() {
        let once = canonical_result(&[vec![CellValue::Integer(1)]]);
        let twice = canonical_result(&[
            vec![CellValue::Integer(1)],
            vec![CellValue::Integer(1)],
        ]);
        assert_ne!(once, twice);
    }

    #[test]
    fn equivalent_queries_group_together() {
        let mut adapter = adapter();
        let candidates = vec![
            candidate(1, Some("SELECT a FROM t ORDER BY a")),
            candidate(2, Some("SELECT a FROM t ORDER BY a DESC")),
            candidate(3, Some("SELECT a FROM t WHERE a > 1")),
            candidate(4, Some("SELECT missing FROM t")),
            candidate(5, None),
        ];
        let groups = group_by_execution(&candidates, &mut adapter, &ExecLimits::default());
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].members, vec![1, 2]);
        assert_eq!(groups[1].members, vec![3]);
    }

    #[test]
    fn all_failing_candidates_yield_no_groups() {
        let mut adapter = adapter();
        let candidates = vec![
            candidate(1, Some("SELECT missing FROM t")),
            candidate(2, None),
        ];
        assert!(group_by_execution(&candidates, &mut adapter, &ExecLimits::default()).is_empty());
    }

    #[test]
    fn grouping_sees_rows_beyond_the_display_cap() {
        let mut adapter = SqliteAdapter::open_memory_seeded(
            "CREATE TABLE n(v INTEGER);\
             WITH RECURSIVE seq(v) AS (SELECT 1 UNION ALL SELECT v + 1 FROM seq WHERE v < 40)\
             INSERT INTO n SELECT v FROM seq;",
        )
        .unwrap();
        let candidates = vec![
            candidate(1, Some("SELECT v FROM n")),
            candidate(2, Some("SELECT v FROM n WHERE v <= 5")),
        ];
        let limits = ExecLimits::default();
        assert_eq!(limits.max_rows, 5);
        let groups = group_by_execution(&candidates, &mut adapter, &limits);
        assert_eq!(groups.len(), 2, "truncated results must not be conflated");
    }

    #[test]
    fn corrected_sql_wins_over_the_original() {
        let mut adapter = adapter();
        let mut broken = candidate(1, Some("SELECT missing FROM t"));
        broken.corrected_sql = Some("SELECT a FROM t".into());
        let fine = candidate(2, Some("SELECT a FROM t"));
        let groups = group_by_execution(&[broken, fine], &mut adapter, &ExecLimits::default());
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].members, vec![1, 2]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        /// Oracle: O(N²) pairwise partition by canonical equality must
        /// reproduce the grouping exactly.
        #[test]
        fn grouping_matches_pairwise_partition_oracle(
            picks in proptest::collection::vec(0usize..5, 1..10)
        ) {
            let statements = [
                "SELECT a FROM t",
                "SELECT a FROM t ORDER BY a DESC",
                "SELECT a FROM t WHERE a >= 1",
                "SELECT b FROM t",
                "SELECT missing FROM t",
            ];
            let mut adapter = adapter();
            let candidates: Vec<Candidate> = picks
                .iter()
                .enumerate()
                .map(|(index, pick)| candidate(index + 1, Some(statements[*pick])))
                .collect();

            let groups = group_by_execution(&candidates, &mut adapter, &ExecLimits::default());

            let canon: Vec<Option<String>> = candidates
                .iter()
                .map(|c| canonical_execution(&mut adapter, c.sql.as_ref().unwrap(), &ExecLimits::default()))
                .collect();
            let mut oracle: Vec<Vec<usize>> = Vec::new();
            for (index, result) in canon.iter().enumerate() {
                let Some(result) = result else { continue };
                match oracle.iter_mut().find(|members| {
                    canon[members[0] - 1].as_ref() == Some(result)
                }) {
                    Some(members) => members.push(index + 1),
                    None => oracle.push(vec![index + 1]),
                }
            }
            oracle.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));

            let got: Vec<Vec<usize>> = groups.into_iter().map(|g| g.members).collect();
            prop_assert_eq!(got, oracle);
        }
    }
}
