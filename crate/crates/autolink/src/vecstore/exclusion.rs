//! Columns the retriever must not surface again.

use std::collections::BTreeSet;

use crate::schema::{column_key, ColumnKey, LinkedSchema, LogicalColumnDoc};

/// Set of (table, column) pairs that are already linked or were already
/// retrieved. The set only ever grows within a session.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionSet {
    keys: BTreeSet<ColumnKey>,
}

impl ExclusionSet {
    pub fn new() -> Self {
        ExclusionSet::default()
    }

    /// Seeds the exclusions with every column of a linked schema.
    pub fn from_linked(linked: &LinkedSchema) -> Self {
        let mut set = ExclusionSet::new();
        for key in linked.keys() {
            set.keys.insert(key.clone());
        }
        set
    }

    pub fn insert_key(&mut self, table: &str, column: &str) {
        self.keys.insert(column_key(table, column));
    }

    /// Marks every concrete column a retrieved doc stands for.
    pub fn insert_doc(&mut self, doc: &LogicalColumnDoc) {
        for table in &doc.table_names {
            self.insert_key(table, &doc.column_name);
        }
    }

    pub fn contains(&self, table: &str, column: &str) -> bool {
        self.keys.contains(&column_key(table, column))
    }

    /// A doc is excluded as soon as any of its expansions is excluded,
    /// so retrieval can never resurface an already-seen column.
    pub fn excludes(&self, doc: &LogicalColumnDoc) -> bool {
        doc.table_names
            .iter()
            .any(|table| self.contains(table, &doc.column_name))
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}
