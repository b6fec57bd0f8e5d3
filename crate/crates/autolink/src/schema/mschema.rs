//! Compact M-Schema rendering of a linked column subset.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::schema::catalog::{normalize_identifier, ColumnEntry, DatabaseCatalog};
use crate::schema::linked::{column_key, ColumnKey, LinkedSchema};
use crate::schema::merge::partition_groups;

/// Per-column sample values keyed by normalized (table, column),
/// overriding the samples stored in the catalog.
pub type SampleMap = BTreeMap<ColumnKey, Vec<String>>;

/// Renders a linked subset as an M-Schema text block.
///
/// Output starts with a `[DB_ID]` header, then one `# Table` section
/// per partition group that has linked columns, with one parenthesized
/// line per column. Partition groups are headed by their
/// lexicographically first member plus a bracketed sibling count.
pub fn format_mschema(
    subset: &LinkedSchema,
    catalog: &DatabaseCatalog,
    samples: Option<&SampleMap>,
) -> Result<String> {
    for key in subset.keys() {
        if catalog.column(&key.0, &key.1).is_none() {
            return Err(Error::Validation(format!(
                "linked column {}.{} is not in catalog {}",
                key.0, key.1, catalog.db_id
            )));
        }
    }

    let mut output = format!("[DB_ID] {}", catalog.db_id);
    for group in partition_groups(catalog) {
        let Some(section) = render_group(&group, subset, catalog, samples) else {
            continue;
        };
        output.push('\n');
        output.push_str(&section);
    }
    Ok(output)
}

fn render_group(
    group: &[String],
    subset: &LinkedSchema,
    catalog: &DatabaseCatalog,
    samples: Option<&SampleMap>,
) -> Option<String> {
    let template = catalog
        .table(&group[0])
        .expect("group members come from the catalog");

    let mut lines = Vec::new();
    for column in &template.columns {
        let entry = group
            .iter()
            .filter(|table| subset.contains(table, &column.column_name))
            .filter_map(|table| catalog.column(table, &column.column_name))
            .next();
        if let Some(entry) = entry {
            lines.push(render_column_line(entry, samples));
        }
    }
    if lines.is_empty() {
        return None;
    }

    let representative = group
        .iter()
        .min_by_key(|name| normalize_identifier(name))
        .expect("groups are nonempty");
    let mut section = format!("# Table {representative}");
    if group.len() > 1 {
        section.push_str(&format!(" [+{} siblings]", group.len() - 1));
    }
    for line in lines {
        section.push('\n');
        section.push_str(&line);
    }
    Some(section)
}

fn render_column_line(entry: &ColumnEntry, samples: Option<&SampleMap>) -> String {
    let key = column_key(&entry.table_name, &entry.column_name);
    let values = samples
        .and_then(|map| map.get(&key))
        .unwrap_or(&entry.sample_values);

    let mut line = format!("({}: {}", entry.column_name, entry.data_type);
    if !values.is_empty() {
        let rendered: Vec<String> = values
            .iter()
            .take(crate::schema::MAX_SAMPLE_VALUES)
            .map(|value| render_sample(value, &entry.data_type))
            .collect();
        line.push_str(&format!(", Examples:[{}]", rendered.join(",")));
    }
    if let Some(description) = &entry.description {
        line.push_str(", ");
        line.push_str(description);
    }
    line.push(')');
    line
}

/// Numeric-typed samples render bare; everything else is quoted.
fn render_sample(value: &str, data_type: &str) -> String {
    let lowered = data_type.to_lowercase();
    let numeric = ["int", "real", "float", "double", "dec", "num", "bool"]
        .iter()
        .any(|marker| lowered.contains(marker));
    if numeric {
        value.to_string()
    } else {
        format!("\"{}\"", value.replace('"', "\\\""))
    }
}
