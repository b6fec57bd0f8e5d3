//! Catalog model, partitioned-table merging, and schema rendering.

mod catalog;
mod linked;
mod merge;
mod mschema;

pub use catalog::{
    ingest_catalog, normalize_identifier, parse_catalog, ColumnEntry, ColumnRef, DatabaseCatalog,
    TableSchema, CATALOG_FORMAT_VERSION, MAX_SAMPLE_VALUES,
};
pub use linked::{column_key, ColumnKey, LinkedSchema};
pub use merge::{
    merge_partitioned_tables, partition_groups, render_column_doc, LogicalColumnDoc, PartitionMap,
};
pub use mschema::{format_mschema, SampleMap};
