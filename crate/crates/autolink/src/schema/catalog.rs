//! Catalog ingestion and the column-level schema model.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fnv::Fnv1a;

/// Catalog file format version accepted by [`ingest_catalog`].
pub const CATALOG_FORMAT_VERSION: u32 = 1;

/// Maximum number of sample values kept per column.
pub const MAX_SAMPLE_VALUES: usize = 5;

/// Reference to a column of another table, as carried by a foreign key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

/// One physical column with the metadata the linker surfaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnEntry {
    pub table_name: String,
    pub column_name: String,
    pub data_type: String,
    pub description: Option<String>,
    pub is_primary_key: bool,
    pub foreign_key_target: Option<ColumnRef>,
    pub sample_values: Vec<String>,
}

/// One physical table: a name plus its ordered columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnEntry>,
}

/// A full database schema with stable table and column order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatabaseCatalog {
    pub db_id: String,
    pub tables: Vec<TableSchema>,
}

/// Normalizes an identifier for comparison: trimmed and lowercased.
/// Original casing is preserved everywhere identifiers are displayed.
pub fn normalize_identifier(raw: &str) -> String {
    raw.trim().to_lowercase()
}

impl DatabaseCatalog {
    /// Looks up a table by case-insensitive name.
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        let wanted = normalize_identifier(name);
        self.tables
            .iter()
            .find(|table| normalize_identifier(&table.name) == wanted)
    }

    /// Looks up a column by case-insensitive table and column name.
    pub fn column(&self, table: &str, column: &str) -> Option<&ColumnEntry> {
        let wanted = normalize_identifier(column);
        self.table(table)?
            .columns
            .iter()
            .find(|entry| normalize_identifier(&entry.column_name) == wanted)
    }

    /// Total number of physical columns across all tables.
    pub fn column_count(&self) -> usize {
        self.tables.iter().map(|table| table.columns.len()).sum()
    }

    /// Stable structural fingerprint used for index freshness checks.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = Fnv1a::new();
        let mut field = |text: &str| {
            hasher.write(text.as_bytes());
            hasher.write(&[0x1f]);
        };
        field(&self.db_id);
        for table in &self.tables {
            field(&table.name);
            for column in &table.columns {
                field(&column.column_name);
                field(&column.data_type);
                field(column.description.as_deref().unwrap_or(""));
                field(if column.is_primary_key { "pk" } else { "" });
                if let Some(target) = &column.foreign_key_target {
                    field(&target.table);
                    field(&target.column);
                } else {
                    field("");
                }
                for sample in &column.sample_values {
                    field(sample);
                }
            }
        }
        hasher.finish()
    }
}

#[derive(Deserialize)]
struct CatalogFile {
    format_version: u32,
    db_id: String,
    tables: Vec<TableFile>,
}

#[derive(Deserialize)]
struct TableFile {
    name: String,
    columns: Vec<ColumnFile>,
}

#[derive(Deserialize)]
struct ColumnFile {
    name: String,
    #[serde(rename = "type")]
    data_type: String,
    description: Option<String>,
    #[serde(default)]
    primary_key: bool,
    foreign_key: Option<ColumnRef>,
    #[serde(default)]
    samples: Vec<String>,
}

/// Reads and validates a catalog JSON file.
pub fn ingest_catalog(path: &Path) -> Result<DatabaseCatalog> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::io(path, source))?;
    let file: CatalogFile = serde_json::from_str(&text)
        .map_err(|source| Error::parse(path, source.line(), source.to_string()))?;
    validate_catalog(file)
}

/// Validates catalog JSON already held in memory.
pub fn parse_catalog(text: &str) -> Result<DatabaseCatalog> {
    let file: CatalogFile = serde_json::from_str(text)
        .map_err(|source| Error::parse("<memory>", source.line(), source.to_string()))?;
    validate_catalog(file)
}

fn validate_catalog(file: CatalogFile) -> Result<DatabaseCatalog> {
    if file.format_version != CATALOG_FORMAT_VERSION {
        return Err(Error::Validation(format!(
            "unsupported catalog format_version {} (expected {})",
            file.format_version, CATALOG_FORMAT_VERSION
        )));
    }
    if file.db_id.trim().is_empty() {
        return Err(Error::Validation("catalog db_id is empty".into()));
    }

    let mut tables = Vec::with_capacity(file.tables.len());
    let mut seen_tables = HashSet::new();
    for table in file.tables {
        if table.name.trim().is_empty() {
            return Err(Error::Validation(format!(
                "catalog {} contains a table with an empty name",
                file.db_id
            )));
        }
        if !seen_tables.insert(normalize_identifier(&table.name)) {
            return Err(Error::Validation(format!(
                "duplicate table name {} in catalog {}",
                table.name, file.db_id
            )));
        }
        if table.columns.is_empty() {
            return Err(Error::Validation(format!(
                "table {} declares no columns",
                table.name
            )));
        }

        let mut columns = Vec::with_capacity(table.columns.len());
        let mut seen_columns = HashSet::new();
        for column in table.columns {
            if column.name.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "table {} contains a column with an empty name",
                    table.name
                )));
            }
            if !seen_columns.insert(normalize_identifier(&column.name)) {
                return Err(Error::Validation(format!(
                    "duplicate column name {} in table {}",
                    column.name, table.name
                )));
            }
            let mut samples = column.samples;
            samples.truncate(MAX_SAMPLE_VALUES);
            columns.push(ColumnEntry {
                table_name: table.name.clone(),
                column_name: column.name,
                data_type: column.data_type,
                description: column.description,
                is_primary_key: column.primary_key,
                foreign_key_target: column.foreign_key,
                sample_values: samples,
            });
        }
        tables.push(TableSchema {
            name: table.name,
            columns,
        });
    }

    let catalog = DatabaseCatalog {
        db_id: file.db_id,
        tables,
    };
    for table in &catalog.tables {
        for column in &table.columns {
            if let Some(target) = &column.foreign_key_target {
                if catalog.column(&target.table, &target.column).is_none() {
                    return Err(Error::Validation(format!(
                        "foreign key on {}.{} references unknown column {}.{}",
                        table.name, column.column_name, target.table, target.column
                    )));
                }
            }
        }
    }
    Ok(catalog)
}
