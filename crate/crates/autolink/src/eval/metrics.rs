//! Strict recall and per-case seeding.

use crate::fnv::Fnv1a;
use crate::schema::{LinkedSchema, PartitionMap};

/// True iff every gold column is covered by the linked schema.
///
/// Matching is case-insensitive. A gold column whose table was merged
/// into a partition group counts as covered when any member of that
/// group is linked with the same column name.
pub fn strict_recall(
    linked: &LinkedSchema,
    gold: &[(String, String)],
    partitions: &PartitionMap,
) -> bool {
    gold.iter().all(|(table, column)| {
        if linked.contains(table, column) {
            return true;
        }
        partitions
            .group_of(table)
            .is_some_and(|group| group.iter().any(|member| linked.contains(member, column)))
    })
}

/// Stable per-case RNG seed derived from the global seed and case id,
/// independent of case order and worker scheduling.
pub fn seed_for_case(global_seed: u64, case_id: &str) -> u64 {
    let mut hasher = Fnv1a::new();
    hasher.write(&global_seed.to_le_bytes());
    hasher.write(case_id.as_bytes());
    hasher.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{parse_catalog, ColumnEntry, DatabaseCatalog};
    use proptest::prelude::*;

    fn catalog() -> DatabaseCatalog {
        parse_catalog(
            r#"{
                "format_version": 1,
                "db_id": "logs",
                "tables": [
                    {"name": "events_20240101", "columns": [
                        {"name": "user_id", "type": "INTEGER"},
                        {"name": "action", "type": "TEXT"}
                    ]},
                    {"name": "events_20240102", "columns": [
                        {"name": "user_id", "type": "INTEGER"},
                        {"name": "action", "type": "TEXT"}
                    ]},
                    {"name": "channels", "columns": [
                        {"name": "channel_id", "type": "INTEGER"},
                        {"name": "name", "type": "TEXT"}
                    ]}
                ]
            }"#,
        )
        .unwrap()
    }

    fn entry(table: &str, column: &str) -> ColumnEntry {
        ColumnEntry {
            table_name: table.to_string(),
            column_name: column.to_string(),
            data_type: "INTEGER".to_string(),
            description: None,
            is_primary_key: false,
            foreign_key_target: None,
            sample_values: Vec::new(),
        }
    }

    fn gold(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(table, column)| (table.to_string(), column.to_string()))
            .collect()
    }

    #[test]
    fn superset_linkage_hits() {
        let partitions = PartitionMap::new(&catalog());
        let mut linked = LinkedSchema::new();
        linked.add(entry("channels", "channel_id"));
        linked.add(entry("channels", "name"));
        assert!(strict_recall(
            &linked,
            &gold(&[("channels", "channel_id")]),
            &partitions
        ));
    }

    #[test]
    fn any_missing_gold_column_misses() {
        let partitions = PartitionMap::new(&catalog());
        let mut linked = LinkedSchema::new();
        linked.add(entry("channels", "channel_id"));
        assert!(!strict_recall(
            &linked,
            &gold(&[("channels", "channel_id"), ("channels", "name")]),
            &partitions
        ));
    }

    #[test]
    fn matching_is_case_insensitive() {
        let partitions = PartitionMap::new(&catalog());
        let mut linked = LinkedSchema::new();
        linked.add(entry("Channels", "Channel_ID"));
        assert!(strict_recall(
            &linked,
            &gold(&[("CHANNELS", "channel_id")]),
            &partitions
        ));
    }

    #[test]
    fn partition_siblings_satisfy_gold_membership() {
        let partitions = PartitionMap::new(&catalog());
        let mut linked = LinkedSchema::new();
        linked.add(entry("events_20240101", "user_id"));
        assert!(strict_recall(
            &linked,
            &gold(&[("events_20240102", "user_id")]),
            &partitions
        ));
        assert!(!strict_recall(
            &linked,
            &gold(&[("events_20240102", "action")]),
            &partitions
        ));
    }

    #[test]
    fn unknown_gold_tables_never_hit() {
        let partitions = PartitionMap::new(&catalog());
        let mut linked = LinkedSchema::new();
        linked.add(entry("channels", "name"));
        assert!(!strict_recall(
            &linked,
            &gold(&[("ghost", "name")]),
            &partitions
        ));
    }

    #[test]
    fn empty_gold_is_vacuously_satisfied() {
        let partitions = PartitionMap::new(&catalog());
        assert!(strict_recall(&LinkedSchema::new(), &[], &partitions));
    }

    #[test]
    fn case_seeds_differ_by_case_and_global_seed() {
        assert_eq!(seed_for_case(0, "c1"), seed_for_case(0, "c1"));
        assert_ne!(seed_for_case(0, "c1"), seed_for_case(0, "c2"));
        assert_ne!(seed_for_case(0, "c1"), seed_for_case(1, "c1"));
    }

    proptest! {
        /// Adding columns never flips a hit back to a miss.
        #[test]
        fn recall_is_monotone_in_linked(
            base in proptest::collection::vec((0usize..3, 0usize..2), 0..4),
            extra in proptest::collection::vec((0usize..3, 0usize..2), 0..4),
        ) {
            let catalog = catalog();
            let partitions = PartitionMap::new(&catalog);
            let all: Vec<(String, String)> = catalog
                .tables
                .iter()
                .flat_map(|table| {
                    table.columns.iter().map(|column| {
                        (table.name.clone(), column.column_name.clone())
                    })
                })
                .collect();
            let golds = gold(&[("events_20240102", "user_id"), ("channels", "name")]);

            let mut linked = LinkedSchema::new();
            for (t, c) in &base {
                let (table, column) = &all[(t * 2 + c) % all.len()];
                linked.add(entry(table, column));
            }
            let before = strict_recall(&linked, &golds, &partitions);
            for (t, c) in &extra {
                let (table, column) = &all[(t * 2 + c) % all.len()];
                linked.add(entry(table, column));
            }
            let after = strict_recall(&linked, &golds, &partitions);
            prop_assert!(!(before && !after));
        }
    }
}
