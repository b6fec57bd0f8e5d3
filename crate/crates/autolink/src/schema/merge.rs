//! Partition-aware merging of physically sharded tables.
//!
//! Warehouse-style databases often shard one logical table into many
//! physical tables that differ only by a name suffix. Tables with
//! byte-identical ordered column signatures are treated as one logical
//! entity so each of their columns is documented and embedded once.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::schema::catalog::{normalize_identifier, ColumnRef, DatabaseCatalog};

/// A column of a logical table group, listing every physical table
/// that shares the identical column layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalColumnDoc {
    pub column_name: String,
    pub table_names: Vec<String>,
    pub data_type: String,
    pub description: Option<String>,
    pub is_primary_key: bool,
    pub foreign_key_target: Option<ColumnRef>,
    pub doc_text: String,
}

/// Groups tables by byte-identical ordered (column name, data type)
/// signatures, preserving catalog order within and across groups.
pub fn partition_groups(catalog: &DatabaseCatalog) -> Vec<Vec<String>> {
    let mut groups: Vec<(Vec<(&str, &str)>, Vec<String>)> = Vec::new();
    for table in &catalog.tables {
        let signature: Vec<(&str, &str)> = table
            .columns
            .iter()
            .map(|column| (column.column_name.as_str(), column.data_type.as_str()))
            .collect();
        match groups.iter_mut().find(|(other, _)| *other == signature) {
            Some((_, names)) => names.push(table.name.clone()),
            None => groups.push((signature, vec![table.name.clone()])),
        }
    }
    groups.into_iter().map(|(_, names)| names).collect()
}

/// Merges partitioned tables and emits one document per logical column.
pub fn merge_partitioned_tables(catalog: &DatabaseCatalog) -> Vec<LogicalColumnDoc> {
    let mut docs = Vec::new();
    for group in partition_groups(catalog) {
        let first = catalog
            .table(&group[0])
            .expect("group members come from the catalog");
        for column in &first.columns {
            let mut doc = LogicalColumnDoc {
                column_name: column.column_name.clone(),
                table_names: group.clone(),
                data_type: column.data_type.clone(),
                description: column.description.clone(),
                is_primary_key: column.is_primary_key,
                foreign_key_target: column.foreign_key_target.clone(),
                doc_text: String::new(),
            };
            doc.doc_text = render_column_doc(&doc);
            docs.push(doc);
        }
    }
    docs
}

/// Renders the six-line retrieval document for a logical column and
/// lowercases the whole text.
pub fn render_column_doc(doc: &LogicalColumnDoc) -> String {
    let tables = doc.table_names.join(", ");
    let description = doc.description.as_deref().unwrap_or("None");
    let primary_key = if doc.is_primary_key { "Yes" } else { "None" };
    let foreign_key = match &doc.foreign_key_target {
        Some(target) => format!("{}.{}", target.table, target.column),
        None => "None".to_string(),
    };
    format!(
        "Column: {};\nTable: [{}];\nType: {};\nDescription: {};\nPrimary Key: {};\nForeign Key: {};",
        doc.column_name, tables, doc.data_type, description, primary_key, foreign_key
    )
    .to_lowercase()
}

/// Table-to-group lookup built once per catalog, answering which
/// physical tables share a table's column signature.
#[derive(Debug, Clone)]
pub struct PartitionMap {
    group_of_table: HashMap<String, usize>,
    groups: Vec<Vec<String>>,
}

impl PartitionMap {
    pub fn new(catalog: &DatabaseCatalog) -> Self {
        let groups = partition_groups(catalog);
        let mut group_of_table = HashMap::new();
        for (index, group) in groups.iter().enumerate() {
            for table in group {
                group_of_table.insert(normalize_identifier(table), index);
            }
        }
        PartitionMap {
            group_of_table,
            groups,
        }
    }

    /// All tables sharing `table`'s signature (including itself), or
    /// None when the table is not in the catalog.
    pub fn group_of(&self, table: &str) -> Option<&[String]> {
        let index = *self.group_of_table.get(&normalize_identifier(table))?;
        Some(&self.groups[index])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::catalog::parse_catalog;

    use proptest::prelude::*;

    fn partitioned_catalog() -> DatabaseCatalog {
        parse_catalog(
            r#"{
                "format_version": 1,
                "db_id": "ga",
                "tables": [
                    {"name": "ga_sessions_20170720", "columns": [
                        {"name": "visitNumber", "type": "INT64", "description": "The session number for this user"},
                        {"name": "date", "type": "STRING"}
                    ]},
                    {"name": "ga_sessions_20170521", "columns": [
                        {"name": "visitNumber", "type": "INT64"},
                        {"name": "date", "type": "STRING"}
                    ]},
                    {"name": "channels", "columns": [
                        {"name": "id", "type": "INT64", "primary_key": true}
                    ]}
                ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn identical_signatures_merge_into_one_group() {
        let docs = merge_partitioned_tables(&partitioned_catalog());
        assert_eq!(docs.len(), 3);
        let visit = docs
            .iter()
            .find(|doc| doc.column_name == "visitNumber")
            .unwrap();
        assert_eq!(
            visit.table_names,
            vec!["ga_sessions_20170720", "ga_sessions_20170521"]
        );
    }

    #[test]
    fn single_tables_stay_unmerged() {
        let catalog = parse_catalog(
            r#"{
                "format_version": 1,
                "db_id": "solo",
                "tables": [{"name": "t", "columns": [
                    {"name": "a", "type": "INTEGER"},
                    {"name": "b", "type": "TEXT"},
                    {"name": "c", "type": "REAL"}
                ]}]
            }"#,
        )
        .unwrap();
        let docs = merge_partitioned_tables(&catalog);
        assert_eq!(docs.len(), 3);
        assert!(docs.iter().all(|doc| doc.table_names == vec!["t"]));
    }

    #[test]
    fn type_differences_block_merging() {
        let catalog = parse_catalog(
            r#"{
                "format_version": 1,
                "db_id": "near",
                "tables": [
                    {"name": "a", "columns": [{"name": "x", "type": "INTEGER"}]},
                    {"name": "b", "columns": [{"name": "x", "type": "TEXT"}]}
                ]
            }"#,
        )
        .unwrap();
        assert_eq!(merge_partitioned_tables(&catalog).len(), 2);
    }

    #[test]
    fn doc_text_matches_layout_and_is_lowercase() {
        let docs = merge_partitioned_tables(&partitioned_catalog());
        let visit = docs
            .iter()
            .find(|doc| doc.column_name == "visitNumber")
            .unwrap();
        assert_eq!(
            visit.doc_text,
            "column: visitnumber;\n\
             table: [ga_sessions_20170720, ga_sessions_20170521];\n\
             type: int64;\n\
             description: the session number for this user;\n\
             primary key: none;\n\
             foreign key: none;"
        );

        let id = docs.iter().find(|doc| doc.column_name == "id").unwrap();
        assert!(id.doc_text.contains("primary key: yes;"));
        assert!(id.doc_text.contains("description: none;"));
    }

    #[test]
    fn doc_text_is_deterministic() {
        let docs_a = merge_partitioned_tables(&partitioned_catalog());
        let docs_b = merge_partitioned_tables(&partitioned_catalog());
        assert_eq!(docs_a, docs_b);
    }

    #[test]
    fn partition_map_reports_siblings() {
        let map = PartitionMap::new(&partitioned_catalog());
        let group = map.group_of("GA_SESSIONS_20170521").unwrap();
        assert_eq!(group.len(), 2);
        assert_eq!(map.group_of("channels").unwrap(), ["channels"]);
        assert!(map.group_of("absent").is_none());
    }

    /// Independent grouping oracle: quadratic pairwise signature
    /// comparison, written without reusing the production grouping.
    fn brute_force_doc_count(catalog: &DatabaseCatalog) -> usize {
        let signature = |index: usize| -> Vec<(String, String)> {
            catalog.tables[index]
                .columns
                .iter()
                .map(|column| (column.column_name.clone(), column.data_type.clone()))
                .collect()
        };
        let mut counted = vec![false; catalog.tables.len()];
        let mut total = 0;
        for i in 0..catalog.tables.len() {
            if counted[i] {
                continue;
            }
            for j in i..catalog.tables.len() {
                if signature(i) == signature(j) {
                    counted[j] = true;
                }
            }
            total += catalog.tables[i].columns.len();
        }
        total
    }

    fn arbitrary_catalog() -> impl Strategy<Value = DatabaseCatalog> {
        // Small alphabets force signature collisions so merging paths
        // are actually exercised.
        let column = (0..4u8, 0..2u8).prop_map(|(name, data_type)| (name, data_type));
        let table = proptest::collection::vec(column, 1..5);
        proptest::collection::vec(table, 1..20).prop_map(|tables| {
            let tables = tables
                .into_iter()
                .enumerate()
                .map(|(table_index, columns)| {
                    let mut seen = std::collections::HashSet::new();
                    let columns: Vec<_> = columns
                        .into_iter()
                        .filter(|(name, _)| seen.insert(*name))
                        .map(|(name, data_type)| crate::schema::ColumnEntry {
                            table_name: format!("t{table_index}"),
                            column_name: format!("c{name}"),
                            data_type: ["INTEGER", "TEXT"][data_type as usize].to_string(),
                            description: None,
                            is_primary_key: false,
                            foreign_key_target: None,
                            sample_values: Vec::new(),
                        })
                        .collect();
                    crate::schema::TableSchema {
                        name: format!("t{table_index}"),
                        columns,
                    }
                })
                .collect();
            DatabaseCatalog {
                db_id: "prop".into(),
                tables,
            }
        })
    }

    proptest! {
        #[test]
        fn doc_count_matches_brute_force_oracle(catalog in arbitrary_catalog()) {
            let docs = merge_partitioned_tables(&catalog);
            prop_assert_eq!(docs.len(), brute_force_doc_count(&catalog));
        }

        #[test]
        fn expanding_docs_recovers_every_catalog_column(catalog in arbitrary_catalog()) {
            let mut expanded: Vec<(String, String)> = Vec::new();
            for doc in merge_partitioned_tables(&catalog) {
                for table in &doc.table_names {
                    expanded.push((table.clone(), doc.column_name.clone()));
                }
            }
            expanded.sort();
            let mut physical: Vec<(String, String)> = catalog
                .tables
                .iter()
                .flat_map(|table| {
                    table.columns.iter().map(|column| {
                        (table.name.clone(), column.column_name.clone())
                    })
                })
                .collect();
            physical.sort();
            prop_assert_eq!(expanded.len(), physical.len());
            prop_assert_eq!(expanded, physical);
        }
    }
}
