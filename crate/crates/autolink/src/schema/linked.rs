//! The monotonically growing set of linked columns.

use std::collections::BTreeMap;

use crate::schema::catalog::{normalize_identifier, ColumnEntry};

/// Normalized (table, column) membership key.
pub type ColumnKey = (String, String);

/// Builds the normalized membership key for a table and column name.
pub fn column_key(table: &str, column: &str) -> ColumnKey {
    (normalize_identifier(table), normalize_identifier(column))
}

/// The set of columns linked so far, keyed by normalized identifiers.
///
/// The set only grows: re-adding an existing key is a no-op and there
/// is no removal operation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkedSchema {
    entries: BTreeMap<ColumnKey, ColumnEntry>,
}

impl LinkedSchema {
    pub fn new() -> Self {
        LinkedSchema::default()
    }

    /// Adds a column entry; returns false when the key already exists.
    pub fn add(&mut self, entry: ColumnEntry) -> bool {
        let key = column_key(&entry.table_name, &entry.column_name);
        if self.entries.contains_key(&key) {
            return false;
        }
        self.entries.insert(key, entry);
        true
    }

    /// Unions another linked schema in, keeping existing entries.
    pub fn absorb(&mut self, other: &LinkedSchema) {
        for entry in other.entries() {
            self.add(entry.clone());
        }
    }

    pub fn contains(&self, table: &str, column: &str) -> bool {
        self.entries.contains_key(&column_key(table, column))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Normalized keys in deterministic sorted order.
    pub fn keys(&self) -> impl Iterator<Item = &ColumnKey> {
        self.entries.keys()
    }

    /// Entries in deterministic key order.
    pub fn entries(&self) -> impl Iterator<Item = &ColumnEntry> {
        self.entries.values()
    }
}
