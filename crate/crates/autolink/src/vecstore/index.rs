//! Column index construction and its on-disk container.

use std::path::Path;

use crate::error::{Error, Result};
use crate::schema::{merge_partitioned_tables, DatabaseCatalog, LogicalColumnDoc};
use crate::vecstore::embedder::Embedder;

pub const INDEX_FORMAT_VERSION: u32 = 1;

const MAGIC: &[u8; 4] = b"ALVS";

/// Immutable embedding index over the logical column docs of one catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnIndex {
    pub format_version: u32,
    pub embedder_id: String,
    pub dim: usize,
    /// Fingerprint of the source catalog, used to detect staleness.
    pub catalog_fingerprint: u64,
    pub docs: Vec<LogicalColumnDoc>,
    /// Row-major unit vectors, one row per doc.
    vectors: Vec<f32>,
}

impl ColumnIndex {
    pub fn from_parts(
        embedder_id: String,
        dim: usize,
        catalog_fingerprint: u64,
        docs: Vec<LogicalColumnDoc>,
        vectors: Vec<f32>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("index dimension must be positive".into()));
        }
        if vectors.len() != docs.len() * dim {
            return Err(Error::Validation(format!(
                "vector payload holds {} floats but {} docs of dimension {} need {}",
                vectors.len(),
                docs.len(),
                dim,
                docs.len() * dim
            )));
        }
        Ok(ColumnIndex {
            format_version: INDEX_FORMAT_VERSION,
            embedder_id,
            dim,
            catalog_fingerprint,
            docs,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn vector(&self, index: usize) -> &[f32] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    /// Errors unless the given embedder is the one the index was built
    /// with, both by identifier and by dimension.
    pub fn ensure_compatible(&self, embedder: &dyn Embedder) -> Result<()> {
        if embedder.id() != self.embedder_id || embedder.dim() != self.dim {
            return Err(Error::Embedder(format!(
                "index was built with embedder {} (dim {}) but the session uses {} (dim {})",
                self.embedder_id,
                self.dim,
                embedder.id(),
                embedder.dim()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let docs_json = serde_json::to_vec(&self.docs)
            .map_err(|error| Error::Validation(format!("cannot serialize docs: {error}")))?;

        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&self.format_version.to_le_bytes());
        bytes.extend_from_slice(&self.catalog_fingerprint.to_le_bytes());
        bytes.extend_from_slice(&(self.embedder_id.len() as u32).to_le_bytes());
        bytes.extend_from_slice(self.embedder_id.as_bytes());
        bytes.extend_from_slice(&(self.dim as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.docs.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&(docs_json.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&docs_json);
        for value in &self.vectors {
            bytes.extend_from_slice(&value.to_le_bytes());
        }
        std::fs::write(path, bytes).map_err(|error| Error::io(path, error))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|error| Error::io(path, error))?;
        let mut reader = Reader {
            bytes: &bytes,
            offset: 0,
            path,
        };

        if reader.take(4)? != MAGIC {
            return Err(reader.corrupt("missing index magic"));
        }
        let format_version = reader.u32()?;
        if format_version != INDEX_FORMAT_VERSION {
            return Err(reader.corrupt(&format!(
                "unsupported index format version {format_version}, expected {INDEX_FORMAT_VERSION}"
            )));
        }
        let catalog_fingerprint = reader.u64()?;
        let id_len = reader.u32()? as usize;
        let embedder_id = String::from_utf8(reader.take(id_len)?.to_vec())
            .map_err(|_| reader.corrupt("embedder id is not valid UTF-8"))?;
        let dim = reader.u32()? as usize;
        let doc_count = reader.u32()? as usize;
        let docs_len = reader.u64()? as usize;
        let docs: Vec<LogicalColumnDoc> = serde_json::from_slice(reader.take(docs_len)?)
            .map_err(|error| reader.corrupt(&format!("doc payload is invalid: {error}")))?;
        if docs.len() != doc_count {
            return Err(reader.corrupt(&format!(
                "doc count header says {doc_count} but payload holds {}",
                docs.len()
            )));
        }

        let float_bytes = reader.take(doc_count * dim * 4)?;
        if reader.offset != bytes.len() {
            return Err(reader.corrupt("trailing bytes after vector payload"));
        }
        let vectors: Vec<f32> = float_bytes
            .chunks_exact(4)
            .map(|chunk| f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
            .collect();

        let mut index = Self::from_parts(embedder_id, dim, catalog_fingerprint, docs, vectors)?;
        index.format_version = format_version;
        Ok(index)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, count: usize) -> Result<&'a [u8]> {
        if self.offset + count > self.bytes.len() {
            return Err(self.corrupt("file is truncated"));
        }
        let slice = &self.bytes[self.offset..self.offset + count];
        self.offset += count;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        let bytes = self.take(4)?;
        Ok(u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let bytes = self.take(8)?;
        Ok(u64::from_le_bytes([
            bytes[0], bytes[1], bytes[2], bytes[3], bytes[4], bytes[5], bytes[6], bytes[7],
        ]))
    }

    fn corrupt(&self, message: &str) -> Error {
        Error::Validation(format!(
            "index file {} is corrupt: {message}",
            self.path.display()
        ))
    }
}

/// Embeds every logical column doc exactly once and assembles the index.
pub fn build_index(catalog: &DatabaseCatalog, embedder: &dyn Embedder) -> Result<ColumnIndex> {
    let docs = merge_partitioned_tables(catalog);
    let texts: Vec<String> = docs.iter().map(|doc| doc.doc_text.clone()).collect();

    let vectors = match embedder.embed(&texts) {
        Ok(vectors) => vectors,
        Err(_) => embed_individually(&docs, embedder)?,
    };
    if vectors.len() != docs.len() {
        return Err(Error::Embedder(format!(
            "embedder returned {} vectors for {} docs",
            vectors.len(),
            docs.len()
        )));
    }

    let dim = embedder.dim();
    let mut flat = Vec::with_capacity(docs.len() * dim);
    for (doc, vector) in docs.iter().zip(&vectors) {
        if vector.len() != dim {
            return Err(Error::Embedder(format!(
                "embedder returned a vector of dimension {} for doc {}, expected {dim}",
                vector.len(),
                doc_id(doc)
            )));
        }
        flat.extend_from_slice(vector);
    }

    ColumnIndex::from_parts(
        embedder.id(),
        dim,
        catalog.fingerprint(),
        docs,
        flat,
    )
}

/// Fallback after a failed batch: embed doc by doc so the error can name
/// the document that breaks.
fn embed_individually(
    docs: &[LogicalColumnDoc],
    embedder: &dyn Embedder,
) -> Result<Vec<Vec<f32>>> {
    let mut vectors = Vec::with_capacity(docs.len());
    for doc in docs {
        let mut batch = embedder.embed(&[doc.doc_text.clone()]).map_err(|error| {
            Error::Embedder(format!("embedding failed for doc {}: {error}", doc_id(doc)))
        })?;
        vectors.push(batch.remove(0));
    }
    Ok(vectors)
}

fn doc_id(doc: &LogicalColumnDoc) -> String {
    format!("{}.{}", doc.table_names[0], doc.column_name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::parse_catalog;
    use crate::vecstore::embedder::HashEmbedder;

    fn plain_catalog() -> DatabaseCatalog {
        parse_catalog(
            r#"{
                "format_version": 1,
                "db_id": "shop",
                "tables": [
                    {"name": "orders", "columns": [
                        {"name": "id", "type": "INTEGER"},
                        {"name": "user_id", "type": "INTEGER"},
                        {"name": "total", "type": "REAL"}
                    ]},
                    {"name": "users", "columns": [
                        {"name": "id", "type": "INTEGER"},
                        {"name": "name", "type": "TEXT"}
                    ]}
                ]
            }"#,
        )
        .unwrap()
    }

    fn partitioned_catalog() -> DatabaseCatalog {
        parse_catalog(
            r#"{
                "format_version": 1,
                "db_id": "logs",
                "tables": [
                    {"name": "ev_a", "columns": [
                        {"name": "ts", "type": "INTEGER"},
                        {"name": "kind", "type": "TEXT"},
                        {"name": "user", "type": "TEXT"},
                        {"name": "payload", "type": "TEXT"}
                    ]},
                    {"name": "ev_b", "columns": [
                        {"name": "ts", "type": "INTEGER"},
                        {"name": "kind", "type": "TEXT"},
                        {"name": "user", "type": "TEXT"},
                        {"name": "payload", "type": "TEXT"}
                    ]}
                ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn one_doc_per_column_without_shared_signatures() {
        let index = build_index(&plain_catalog(), &HashEmbedder::default64()).unwrap();
        assert_eq!(index.len(), 5);
        assert_eq!(index.dim, 64);
    }

    #[test]
    fn partition_siblings_are_embedded_once() {
        let index = build_index(&partitioned_catalog(), &HashEmbedder::default64()).unwrap();
        assert_eq!(index.len(), 4);
        assert_eq!(index.docs[0].table_names, vec!["ev_a", "ev_b"]);
    }

    #[test]
    fn saved_index_reloads_identically_and_reserializes_byte_equal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("columns.idx");
        let index = build_index(&plain_catalog(), &HashEmbedder::default64()).unwrap();
        index.save(&path).unwrap();
        let reloaded = ColumnIndex::load(&path).unwrap();
        assert_eq!(reloaded, index);

        let second = dir.path().join("columns2.idx");
        reloaded.save(&second).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&second).unwrap()
        );
    }

    #[test]
    fn corrupt_containers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("columns.idx");
        let index = build_index(&plain_catalog(), &HashEmbedder::default64()).unwrap();
        index.save(&path).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        let error = ColumnIndex::load(&path).unwrap_err();
        assert!(error.to_string().contains("magic"), "{error}");

        let good = {
            bytes[0] = b'A';
            bytes
        };
        std::fs::write(&path, &good[..good.len() - 3]).unwrap();
        let error = ColumnIndex::load(&path).unwrap_err();
        assert!(error.to_string().contains("truncated"), "{error}");

        let mut versioned = good.clone();
        versioned[4] = 99;
        std::fs::write(&path, &versioned).unwrap();
        let error = ColumnIndex::load(&path).unwrap_err();
        assert!(error.to_string().contains("version"), "{error}");
    }

    #[test]
    fn compatibility_requires_matching_id_and_dimension() {
        let index = build_index(&plain_catalog(), &HashEmbedder::default64()).unwrap();
        assert!(index.ensure_compatible(&HashEmbedder::default64()).is_ok());
        let other = HashEmbedder::new(32).unwrap();
        let error = index.ensure_compatible(&other).unwrap_err();
        assert!(error.to_string().contains("hash-v1-d32"), "{error}");
    }

    struct FlakyBatch;

    impl Embedder for FlakyBatch {
        fn id(&self) -> String {
            "flaky".into()
        }
        fn dim(&self) -> usize {
            4
        }
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
            if texts.len() > 1 {
                return Err(Error::Embedder("batch too large".into()));
            }
            Ok(vec![vec![1.0, 0.0, 0.0, 0.0]])
        }
    }

    #[test]
    fn failed_batches_fall_back_to_per_doc_embedding() {
        let index = build_index(&plain_catalog(), &FlakyBatch).unwrap();
        assert_eq!(index.len(), 5);
        assert_eq!(index.vector(3), &[1.0, 0.0, 0.0, 0.0]);
    }

    struct PoisonedDoc;

    impl Embedder for PoisonedDoc {
        fn id(&self) -> String {
            "poisoned".into()
        }
        fn dim(&self) -> usize {
            4
        }
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
            if texts.iter().any(|text| text.contains("total")) {
                return Err(Error::Embedder("encoder refused the text".into()));
            }
            Ok(texts.iter().map(|_| vec![0.0, 1.0, 0.0, 0.0]).collect())
        }
    }

    #[test]
    fn build_failure_names_the_failing_doc() {
        let error = build_index(&plain_catalog(), &PoisonedDoc).unwrap_err();
        assert!(error.to_string().contains("orders.total"), "{error}");
    }
}
