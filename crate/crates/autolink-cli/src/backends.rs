//! Construction of embedders, policies, and per-database resources
//! from a loaded run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use autolink::config::{load_script, EmbedderBackend, PolicyBackend, RunConfig, ScriptFile};
use autolink::eval::{BenchmarkCase, DbResources, DbSource, PolicyProvider};
use autolink::policy::{Policy, RemotePolicy, RemotePolicyConfig, ReplayPolicy, ScriptedPolicy};
use autolink::schema::{ingest_catalog, DatabaseCatalog};
use autolink::vecstore::{ColumnIndex, Embedder, HashEmbedder, RemoteEmbedder};
use autolink::{Error, Result};

pub fn build_embedder(config: &RunConfig) -> Result<Box<dyn Embedder>> {
    match &config.embedder {
        EmbedderBackend::Hash { dimension } => Ok(Box::new(HashEmbedder::new(*dimension)?)),
        EmbedderBackend::Remote(remote) => Ok(Box::new(RemoteEmbedder::new(remote.clone())?)),
    }
}

/// Loads every configured catalog, keyed by db id.
pub fn load_catalogs(config: &RunConfig) -> Result<BTreeMap<String, DatabaseCatalog>> {
    if config.catalogs.is_empty() {
        return Err(Error::Config("paths.catalogs lists no catalog files".into()));
    }
    let mut map = BTreeMap::new();
    for path in &config.catalogs {
        let catalog = ingest_catalog(path)?;
        let db_id = catalog.db_id.clone();
        if map.insert(db_id.clone(), catalog).is_some() {
            return Err(Error::Config(format!(
                "duplicate db id {db_id} in paths.catalogs"
            )));
        }
    }
    Ok(map)
}

pub fn index_path(config: &RunConfig, db_id: &str) -> PathBuf {
    config.index_dir.join(format!("{db_id}.idx"))
}

/// An index is current when it loads, was built from this catalog
/// content, and matches the active embedder.
pub fn index_up_to_date(path: &Path, catalog: &DatabaseCatalog, embedder: &dyn Embedder) -> bool {
    match ColumnIndex::load(path) {
        Ok(index) => {
            index.catalog_fingerprint == catalog.fingerprint()
                && index.ensure_compatible(embedder).is_ok()
        }
        Err(_) => false,
    }
}

pub fn load_index_checked(
    config: &RunConfig,
    db_id: &str,
    catalog: &DatabaseCatalog,
    embedder: &dyn Embedder,
) -> Result<ColumnIndex> {
    let path = index_path(config, db_id);
    if !path.is_file() {
        return Err(Error::Config(format!(
            "no index for {db_id} at {}; run the index command first",
            path.display()
        )));
    }
    let index = ColumnIndex::load(&path)?;
    index.ensure_compatible(embedder)?;
    if index.catalog_fingerprint != catalog.fingerprint() {
        return Err(Error::Config(format!(
            "index for {db_id} is stale; re-run the index command"
        )));
    }
    Ok(index)
}

/// Finds the database behind a db id: a `.sqlite` file, or a `.sql`
/// seed script executed into a fresh in-memory database per run.
pub fn db_source(config: &RunConfig, db_id: &str) -> Result<DbSource> {
    let file = config.db_dir.join(format!("{db_id}.sqlite"));
    if file.is_file() {
        return Ok(DbSource::File(file));
    }
    let seed = config.db_dir.join(format!("{db_id}.sql"));
    if seed.is_file() {
        let sql = fs::read_to_string(&seed).map_err(|source| Error::Io {
            path: seed.clone(),
            source,
        })?;
        return Ok(DbSource::MemorySeed(sql));
    }
    Err(Error::Config(format!(
        "no database for {db_id}: expected {} or {}",
        file.display(),
        seed.display()
    )))
}

/// Catalog, index, and database for one db id.
pub fn resources_for(
    config: &RunConfig,
    db_id: &str,
    embedder: &dyn Embedder,
) -> Result<DbResources> {
    let mut catalogs = load_catalogs(config)?;
    let Some(catalog) = catalogs.remove(db_id) else {
        let known: Vec<&str> = catalogs.keys().map(String::as_str).collect();
        return Err(Error::Config(format!(
            "unknown db id {db_id}; configured catalogs: {}",
            known.join(", ")
        )));
    };
    let index = load_index_checked(config, db_id, &catalog, embedder)?;
    let source = db_source(config, db_id)?;
    Ok(DbResources {
        catalog,
        index,
        source,
    })
}

fn keyed_script(dir: Option<&Path>, key: &str) -> Result<ScriptFile> {
    let dir = dir.ok_or_else(|| {
        Error::Config("policy.scripts_dir is required for the scripted and replay backends".into())
    })?;
    load_script(&dir.join(format!("{key}.json")))
}

fn boxed_policy(outputs: Vec<String>, replay: bool) -> Box<dyn Policy> {
    if replay {
        Box::new(ReplayPolicy::new(outputs))
    } else {
        Box::new(ScriptedPolicy::new(outputs))
    }
}

/// Policies for a single-question command, keyed by db id: one for the
/// linking session and one for generation.
pub fn single_policies(
    config: &RunConfig,
    db_id: &str,
) -> Result<(Box<dyn Policy>, Box<dyn Policy>)> {
    match &config.policy {
        PolicyBackend::Scripted { scripts_dir } => {
            let script = keyed_script(scripts_dir.as_deref(), db_id)?;
            Ok((
                boxed_policy(script.link, false),
                boxed_policy(script.generate, false),
            ))
        }
        PolicyBackend::Replay { scripts_dir } => {
            let script = keyed_script(scripts_dir.as_deref(), db_id)?;
            Ok((
                boxed_policy(script.link, true),
                boxed_policy(script.generate, true),
            ))
        }
        PolicyBackend::Remote(remote) => Ok((
            Box::new(RemotePolicy::new(remote.clone())?),
            Box::new(RemotePolicy::new(remote.clone())?),
        )),
    }
}

/// Hands each benchmark case the outputs from `{scripts_dir}/{case_id}.json`.
struct ScriptDirProvider {
    dir: PathBuf,
    replay: bool,
}

impl PolicyProvider for ScriptDirProvider {
    fn link_policy(&self, case: &BenchmarkCase) -> Result<Box<dyn Policy>> {
        let script = load_script(&self.dir.join(format!("{}.json", case.case_id)))?;
        Ok(boxed_policy(script.link, self.replay))
    }

    fn generation_policy(&self, case: &BenchmarkCase) -> Result<Box<dyn Policy>> {
        let script = load_script(&self.dir.join(format!("{}.json", case.case_id)))?;
        Ok(boxed_policy(script.generate, self.replay))
    }
}

/// Opens a fresh remote client per case; the service-side rate cap is
/// carried in each client's configuration.
struct RemoteProvider {
    config: RemotePolicyConfig,
}

impl PolicyProvider for RemoteProvider {
    fn link_policy(&self, _case: &BenchmarkCase) -> Result<Box<dyn Policy>> {
        Ok(Box::new(RemotePolicy::new(self.config.clone())?))
    }

    fn generation_policy(&self, _case: &BenchmarkCase) -> Result<Box<dyn Policy>> {
        Ok(Box::new(RemotePolicy::new(self.config.clone())?))
    }
}

pub fn eval_provider(config: &RunConfig) -> Result<Box<dyn PolicyProvider>> {
    match &config.policy {
        PolicyBackend::Scripted { scripts_dir } => {
            let dir = scripts_dir.clone().ok_or_else(|| {
                Error::Config("policy.scripts_dir is required to evaluate with the scripted backend".into())
            })?;
            Ok(Box::new(ScriptDirProvider { dir, replay: false }))
        }
        PolicyBackend::Replay { scripts_dir } => {
            let dir = scripts_dir.clone().ok_or_else(|| {
                Error::Config("policy.scripts_dir is required to evaluate with the replay backend".into())
            })?;
            Ok(Box::new(ScriptDirProvider { dir, replay: true }))
        }
        PolicyBackend::Remote(remote) => Ok(Box::new(RemoteProvider {
            config: remote.clone(),
        })),
    }
}
