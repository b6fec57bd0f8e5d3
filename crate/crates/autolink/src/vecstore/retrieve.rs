//! Exclusion-aware top-K retrieval and snippet assembly.

use crate::error::{Error, Result};
use crate::schema::{
    format_mschema, normalize_identifier, ColumnEntry, DatabaseCatalog, LinkedSchema,
    LogicalColumnDoc,
};
use crate::vecstore::embedder::Embedder;
use crate::vecstore::exclusion::ExclusionSet;
use crate::vecstore::index::ColumnIndex;

/// One retrieval hit with its cosine similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc: LogicalColumnDoc,
    pub score: f32,
}

/// Full-scan cosine retrieval. The query is lowercased before embedding;
/// docs with any excluded expansion are dropped before ranking; ties are
/// broken by ascending (table, column) name.
pub fn retrieve(
    query: &str,
    k: usize,
    excl: &ExclusionSet,
    index: &ColumnIndex,
    embedder: &dyn Embedder,
) -> Result<Vec<ScoredDoc>> {
    index.ensure_compatible(embedder)?;
    if k == 0 {
        return Ok(Vec::new());
    }

    let query_vectors = embedder.embed(&[query.to_lowercase()])?;
    let query_vector = query_vectors
        .first()
        .ok_or_else(|| Error::Embedder("embedder returned no vector for the query".into()))?;

    let mut scored: Vec<(usize, f32)> = Vec::new();
    for (position, doc) in index.docs.iter().enumerate() {
        if excl.excludes(doc) {
            continue;
        }
        scored.push((position, dot(query_vector, index.vector(position))));
    }

    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| tie_key(&index.docs[a.0]).cmp(&tie_key(&index.docs[b.0])))
    });
    scored.truncate(k);

    Ok(scored
        .into_iter()
        .map(|(position, score)| ScoredDoc {
            doc: index.docs[position].clone(),
            score,
        })
        .collect())
}

fn tie_key(doc: &LogicalColumnDoc) -> (String, String) {
    (
        normalize_identifier(&doc.table_names[0]),
        normalize_identifier(&doc.column_name),
    )
}

/// Plain f32 accumulation in vector order; independent scorers reproduce
/// the exact same bits, which the ranking tests rely on.
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = 0.0f32;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Resolves a logical doc back to the concrete catalog columns it merges.
pub fn expand_doc(doc: &LogicalColumnDoc, catalog: &DatabaseCatalog) -> Result<Vec<ColumnEntry>> {
    let mut entries = Vec::with_capacity(doc.table_names.len());
    for table in &doc.table_names {
        let entry = catalog.column(table, &doc.column_name).ok_or_else(|| {
            Error::Validation(format!(
                "doc {}.{} does not resolve in catalog {}",
                table, doc.column_name, catalog.db_id
            ))
        })?;
        entries.push(entry.clone());
    }
    Ok(entries)
}

/// Renders the top-K retrieved docs as a structured M-Schema snippet.
pub fn assemble_snippet(
    docs: &[ScoredDoc],
    catalog: &DatabaseCatalog,
    k: usize,
) -> Result<String> {
    let mut subset = LinkedSchema::new();
    for scored in docs.iter().take(k) {
        for entry in expand_doc(&scored.doc, catalog)? {
            subset.add(entry);
        }
    }
    format_mschema(&subset, catalog, None)
}

/// One-shot retrieval that seeds the linked schema before the agent loop.
pub fn initial_schema(
    question: &str,
    n: usize,
    index: &ColumnIndex,
    embedder: &dyn Embedder,
    catalog: &DatabaseCatalog,
) -> Result<LinkedSchema> {
    if n == 0 {
        return Err(Error::Validation(
            "initial retrieval size must be at least 1".into(),
        ));
    }
    let docs = retrieve(question, n, &ExclusionSet::new(), index, embedder)?;
    let mut linked = LinkedSchema::new();
    for scored in &docs {
        for entry in expand_doc(&scored.doc, catalog)? {
            linked.add(entry);
        }
    }
    Ok(linked)
}
