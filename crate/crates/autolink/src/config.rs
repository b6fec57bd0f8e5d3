//! TOML run configuration: file loading, validation, and flag overrides.
//!
//! Precedence is command-line flag over config file over built-in
//! default. Relative paths resolve against the config file's directory.
//! Credentials never appear inline; the config names environment
//! variables and the backends read them at construction.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::agent::{ActionKind, SessionConfig};
use crate::dbenv::ExecLimits;
use crate::error::{Error, Result};
use crate::eval::EvalOptions;
use crate::policy::RemotePolicyConfig;
use crate::template::ensure_placeholders;
use crate::vecstore::RemoteEmbedderConfig;

pub const DEFAULT_N: usize = 30;
pub const DEFAULT_M: usize = 3;
pub const DEFAULT_T_MAX: usize = 10;
pub const DEFAULT_CANDIDATES: usize = 5;
pub const DEFAULT_T_MAX_CORR: usize = 5;
pub const DEFAULT_SQL_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_MAX_ROWS: usize = 5;
pub const DEFAULT_TIMEOUT_SECONDS: f64 = 120.0;

/// Flag values that take precedence over the config file. `None` and an
/// empty `ablate` list mean the flag was not given.
#[derive(Debug, Default, Clone)]
pub struct CliOverrides {
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub max_turns: Option<usize>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub candidates: Option<usize>,
    /// Replaces the config file's ablation list when non-empty.
    pub ablate: Vec<String>,
}

/// Search and loop hyperparameters.
#[derive(Debug, Clone)]
pub struct Hyperparameters {
    /// Seed-schema size for initial retrieval.
    pub n: usize,
    /// Columns returned per retrieval action.
    pub m: usize,
    /// Linking-turn budget.
    pub t_max: usize,
    /// Self-consistency sample count.
    pub candidates: usize,
    /// Correction round trips per candidate.
    pub t_max_corr: usize,
    /// Reserved; the linking loop always decodes deterministically.
    pub link_temperature: f64,
    pub sql_temperature: f64,
}

/// Which completion backend the run talks to. Scripted and replay read
/// `{scripts_dir}/{key}.json` files, keyed by case id under eval and by
/// db id for single-question commands.
#[derive(Debug, Clone)]
pub enum PolicyBackend {
    /// Outputs read from script files, consumed in order.
    Scripted { scripts_dir: Option<PathBuf> },
    /// Like scripted, but fails loudly on underrun to guard replays.
    Replay { scripts_dir: Option<PathBuf> },
    Remote(RemotePolicyConfig),
}

/// Which embedding backend builds and queries indices.
#[derive(Debug, Clone)]
pub enum EmbedderBackend {
    /// Deterministic local embedder for tests and fixtures.
    Hash { dimension: usize },
    Remote(RemoteEmbedderConfig),
}

/// Evaluation-run settings.
#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub seed: u64,
    pub jobs: usize,
    pub ablate: BTreeSet<ActionKind>,
    /// Example values per column in the generation schema.
    pub sample_values: usize,
    pub with_generation: bool,
}

/// A template that was named in the config and validated at load.
#[derive(Debug, Clone)]
pub struct TemplateSlot {
    pub path: PathBuf,
    pub text: String,
}

/// The four prompt templates. Each is optional in the file; commands
/// that need a missing one fail with a config error naming the key.
#[derive(Debug, Clone, Default)]
pub struct Templates {
    pub instruction: Option<TemplateSlot>,
    pub generation: Option<TemplateSlot>,
    pub correction: Option<TemplateSlot>,
    pub selection: Option<TemplateSlot>,
}

/// A fully resolved and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Directory the config file lives in; base for relative paths.
    pub root: PathBuf,
    pub catalogs: Vec<PathBuf>,
    pub index_dir: PathBuf,
    /// Holds `{db_id}.sqlite` database files or `{db_id}.sql` seeds.
    pub db_dir: PathBuf,
    pub out_dir: PathBuf,
    pub templates: Templates,
    pub hyper: Hyperparameters,
    pub limits: ExecLimits,
    pub policy: PolicyBackend,
    pub embedder: EmbedderBackend,
    pub eval: EvalSettings,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    paths: RawPaths,
    #[serde(default)]
    hyper: RawHyper,
    #[serde(default)]
    limits: RawLimits,
    #[serde(default)]
    policy: RawPolicy,
    #[serde(default)]
    embedder: RawEmbedder,
    #[serde(default)]
    eval: RawEval,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPaths {
    catalogs: Option<Vec<PathBuf>>,
    index_dir: Option<PathBuf>,
    db_dir: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    instruction_template: Option<PathBuf>,
    generation_template: Option<PathBuf>,
    correction_template: Option<PathBuf>,
    selection_template: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHyper {
    n: Option<usize>,
    m: Option<usize>,
    t_max: Option<usize>,
    candidates: Option<usize>,
    t_max_corr: Option<usize>,
    link_temperature: Option<f64>,
    sql_temperature: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimits {
    max_rows: Option<usize>,
    timeout_seconds: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    backend: Option<String>,
    scripts_dir: Option<PathBuf>,
    base_url: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    timeout_seconds: Option<f64>,
    max_retries: Option<u32>,
    max_in_flight: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmbedder {
    backend: Option<String>,
    dimension: Option<usize>,
    base_url: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    batch_size: Option<usize>,
    timeout_seconds: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    seed: Option<u64>,
    jobs: Option<usize>,
    ablate: Option<Vec<String>>,
    sample_values: Option<usize>,
    with_generation: Option<bool>,
}

/// Reads, resolves, and validates a config file, then applies flag
/// overrides on top.
pub fn load_config(path: &Path, overrides: &CliOverrides) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|error| Error::Config(format!("{}: {error}", path.display())))?;
    let raw: RawConfig = toml::from_str(&text)
        .map_err(|error| Error::Config(format!("{}: {}", path.display(), error.message())))?;
    let root = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    resolve(raw, root, overrides)
}

fn resolve(raw: RawConfig, root: PathBuf, overrides: &CliOverrides) -> Result<RunConfig> {
    let hyper = Hyperparameters {
        n: overrides.n.or(raw.hyper.n).unwrap_or(DEFAULT_N),
        m: overrides.m.or(raw.hyper.m).unwrap_or(DEFAULT_M),
        t_max: overrides
            .max_turns
            .or(raw.hyper.t_max)
            .unwrap_or(DEFAULT_T_MAX),
        candidates: overrides
            .candidates
            .or(raw.hyper.candidates)
            .unwrap_or(DEFAULT_CANDIDATES),
        t_max_corr: raw.hyper.t_max_corr.unwrap_or(DEFAULT_T_MAX_CORR),
        link_temperature: raw.hyper.link_temperature.unwrap_or(0.0),
        sql_temperature: raw
            .hyper
            .sql_temperature
            .unwrap_or(DEFAULT_SQL_TEMPERATURE),
    };
    validate_hyper(&hyper)?;

    let limits = ExecLimits {
        max_rows: raw.limits.max_rows.unwrap_or(DEFAULT_MAX_ROWS),
        timeout_secs: raw
            .limits
            .timeout_seconds
            .unwrap_or(DEFAULT_TIMEOUT_SECONDS),
    };
    if limits.max_rows == 0 {
        return Err(Error::Config("limits.max_rows must be at least 1".into()));
    }
    if !(limits.timeout_secs > 0.0) {
        return Err(Error::Config(
            "limits.timeout_seconds must be positive".into(),
        ));
    }

    let catalogs = raw
        .paths
        .catalogs
        .unwrap_or_default()
        .into_iter()
        .map(|p| existing_file(&root, p, "paths.catalogs"))
        .collect::<Result<Vec<_>>>()?;
    let index_dir = root.join(raw.paths.index_dir.unwrap_or_else(|| "index".into()));
    let db_dir = root.join(raw.paths.db_dir.unwrap_or_else(|| "db".into()));
    let out_dir = root.join(raw.paths.out_dir.unwrap_or_else(|| "out".into()));

    let templates = Templates {
        instruction: load_template_slot(
            &root,
            raw.paths.instruction_template,
            "paths.instruction_template",
            &["question", "table_list", "initial_schema", "disabled_actions"],
        )?,
        generation: load_template_slot(
            &root,
            raw.paths.generation_template,
            "paths.generation_template",
            &["question", "schema"],
        )?,
        correction: load_template_slot(
            &root,
            raw.paths.correction_template,
            "paths.correction_template",
            &["question", "schema", "sql", "error"],
        )?,
        selection: load_template_slot(
            &root,
            raw.paths.selection_template,
            "paths.selection_template",
            &["question", "sql_a", "result_a", "sql_b", "result_b"],
        )?,
    };

    let policy = resolve_policy(raw.policy, &root)?;
    let embedder = resolve_embedder(raw.embedder)?;

    let ablate_names = if overrides.ablate.is_empty() {
        raw.eval.ablate.unwrap_or_default()
    } else {
        overrides.ablate.clone()
    };
    let eval = EvalSettings {
        seed: overrides.seed.or(raw.eval.seed).unwrap_or(0),
        jobs: overrides.jobs.or(raw.eval.jobs).unwrap_or(1),
        ablate: parse_ablation(&ablate_names)?,
        sample_values: raw.eval.sample_values.unwrap_or(3),
        with_generation: raw.eval.with_generation.unwrap_or(true),
    };
    if eval.jobs == 0 {
        return Err(Error::Config("eval.jobs must be at least 1".into()));
    }

    Ok(RunConfig {
        root,
        catalogs,
        index_dir,
        db_dir,
        out_dir,
        templates,
        hyper,
        limits,
        policy,
        embedder,
        eval,
    })
}

fn validate_hyper(hyper: &Hyperparameters) -> Result<()> {
    if hyper.n < 1 {
        return Err(Error::Config("hyper.n must be at least 1".into()));
    }
    if hyper.m < 1 {
        return Err(Error::Config("hyper.m must be at least 1".into()));
    }
    if !(1..=100).contains(&hyper.t_max) {
        return Err(Error::Config(
            "hyper.t_max must be between 1 and 100".into(),
        ));
    }
    if hyper.candidates < 1 {
        return Err(Error::Config("hyper.candidates must be at least 1".into()));
    }
    if hyper.link_temperature != 0.0 {
        return Err(Error::Config(
            "hyper.link_temperature must be 0.0; the linking loop decodes deterministically"
                .into(),
        ));
    }
    if !(hyper.sql_temperature >= 0.0) {
        return Err(Error::Config(
            "hyper.sql_temperature must be non-negative".into(),
        ));
    }
    Ok(())
}

fn resolve_policy(raw: RawPolicy, root: &Path) -> Result<PolicyBackend> {
    let backend = raw.backend.as_deref().unwrap_or("scripted");
    let scripts_dir = raw
        .scripts_dir
        .map(|p| existing_dir(root, p, "policy.scripts_dir"))
        .transpose()?;
    match backend {
        "scripted" => Ok(PolicyBackend::Scripted { scripts_dir }),
        "replay" => Ok(PolicyBackend::Replay { scripts_dir }),
        "remote" => {
            let base_url = raw.base_url.ok_or_else(|| {
                Error::Config("policy.base_url is required for the remote backend".into())
            })?;
            let model = raw.model.ok_or_else(|| {
                Error::Config("policy.model is required for the remote backend".into())
            })?;
            Ok(PolicyBackend::Remote(RemotePolicyConfig {
                base_url,
                model,
                api_key_env: raw.api_key_env,
                timeout_secs: raw.timeout_seconds.unwrap_or(60.0),
                max_retries: raw.max_retries.unwrap_or(2),
                max_in_flight: raw.max_in_flight.unwrap_or(4),
            }))
        }
        other => Err(Error::Config(format!(
            "unknown policy backend {other} (expected scripted, replay, or remote)"
        ))),
    }
}

fn resolve_embedder(raw: RawEmbedder) -> Result<EmbedderBackend> {
    let backend = raw.backend.as_deref().unwrap_or("hash");
    match backend {
        "hash" => {
            let dimension = raw.dimension.unwrap_or(64);
            if dimension < 1 {
                return Err(Error::Config(
                    "embedder.dimension must be at least 1".into(),
                ));
            }
            Ok(EmbedderBackend::Hash { dimension })
        }
        "remote" => {
            let base_url = raw.base_url.ok_or_else(|| {
                Error::Config("embedder.base_url is required for the remote backend".into())
            })?;
            let model = raw.model.ok_or_else(|| {
                Error::Config("embedder.model is required for the remote backend".into())
            })?;
            let dim = raw.dimension.ok_or_else(|| {
                Error::Config("embedder.dimension is required for the remote backend".into())
            })?;
            Ok(EmbedderBackend::Remote(RemoteEmbedderConfig {
                base_url,
                model,
                dim,
                api_key_env: raw.api_key_env,
                batch_size: raw.batch_size.unwrap_or(64),
                timeout_secs: raw.timeout_seconds.unwrap_or(30.0),
            }))
        }
        other => Err(Error::Config(format!(
            "unknown embedder backend {other} (expected hash or remote)"
        ))),
    }
}

fn parse_ablation(names: &[String]) -> Result<BTreeSet<ActionKind>> {
    let mut set = BTreeSet::new();
    for name in names {
        let kind: ActionKind = name
            .parse()
            .map_err(|reason: String| Error::Config(format!("eval.ablate: {reason}")))?;
        if matches!(kind, ActionKind::AddSchema | ActionKind::StopAction) {
            return Err(Error::Config(format!(
                "eval.ablate: {name} cannot be disabled; the loop needs it to function"
            )));
        }
        set.insert(kind);
    }
    Ok(set)
}

fn existing_file(root: &Path, path: PathBuf, key: &str) -> Result<PathBuf> {
    let resolved = root.join(path);
    if resolved.is_file() {
        Ok(resolved)
    } else {
        Err(Error::Config(format!(
            "{key}: file {} does not exist",
            resolved.display()
        )))
    }
}

fn existing_dir(root: &Path, path: PathBuf, key: &str) -> Result<PathBuf> {
    let resolved = root.join(path);
    if resolved.is_dir() {
        Ok(resolved)
    } else {
        Err(Error::Config(format!(
            "{key}: directory {} does not exist",
            resolved.display()
        )))
    }
}

fn load_template_slot(
    root: &Path,
    path: Option<PathBuf>,
    key: &str,
    required: &[&str],
) -> Result<Option<TemplateSlot>> {
    let Some(path) = path else { return Ok(None) };
    let path = existing_file(root, path, key)?;
    let text = fs::read_to_string(&path).map_err(|source| Error::io(&path, source))?;
    ensure_placeholders(&text, required)
        .map_err(|error| Error::Config(format!("{key}: {error}")))?;
    Ok(Some(TemplateSlot { path, text }))
}

fn required_template<'a>(slot: &'a Option<TemplateSlot>, key: &str) -> Result<&'a str> {
    slot.as_ref()
        .map(|slot| slot.text.as_str())
        .ok_or_else(|| Error::Config(format!("{key} is not set")))
}

impl RunConfig {
    pub fn instruction_template(&self) -> Result<&str> {
        required_template(&self.templates.instruction, "paths.instruction_template")
    }

    pub fn generation_template(&self) -> Result<&str> {
        required_template(&self.templates.generation, "paths.generation_template")
    }

    pub fn correction_template(&self) -> Result<&str> {
        required_template(&self.templates.correction, "paths.correction_template")
    }

    pub fn selection_template(&self) -> Result<&str> {
        required_template(&self.templates.selection, "paths.selection_template")
    }

    /// Assembles the linking-session settings, requiring the
    /// instruction template.
    pub fn session_config(&self) -> Result<SessionConfig> {
        Ok(SessionConfig {
            n: self.hyper.n,
            m: self.hyper.m,
            t_max: self.hyper.t_max,
            limits: self.limits.clone(),
            disabled: self.eval.ablate.clone(),
            instruction_template: self.instruction_template()?.to_string(),
        })
    }

    /// Assembles full pipeline options. Generation templates are only
    /// required when the generation half is enabled.
    pub fn eval_options(&self) -> Result<EvalOptions> {
        let generation_template;
        let correction_template;
        let selection_template;
        if self.eval.with_generation {
            generation_template = self.generation_template()?.to_string();
            correction_template = self.correction_template()?.to_string();
            selection_template = self.selection_template()?.to_string();
        } else {
            generation_template = String::new();
            correction_template = String::new();
            selection_template = String::new();
        }
        Ok(EvalOptions {
            session: self.session_config()?,
            with_generation: self.eval.with_generation,
            candidates: self.hyper.candidates,
            t_max_corr: self.hyper.t_max_corr,
            sql_temperature: self.hyper.sql_temperature,
            generation_template,
            correction_template,
            selection_template,
            sample_values: self.eval.sample_values,
            seed: self.eval.seed,
            jobs: self.eval.jobs,
        })
    }
}

/// Scripted policy outputs for one question or benchmark case.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptFile {
    /// Raw outputs for the linking session, in turn order.
    #[serde(default)]
    pub link: Vec<String>,
    /// Raw outputs for sampling, correction, and judging, in call order.
    #[serde(default)]
    pub generate: Vec<String>,
}

/// Loads a script file of pre-written policy outputs.
pub fn load_script(path: &Path) -> Result<ScriptFile> {
    let text = fs::read_to_string(path).map_err(|source| Error::io(path, source))?;
    serde_json::from_str(&text)
        .map_err(|error| Error::Config(format!("{}: {error}", path.display())))
}
