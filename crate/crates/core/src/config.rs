//! Toolkit configuration: one versioned JSON document.
//!
//! Loading is all-or-nothing. The first out-of-range or unknown field fails
//! the load with its field path; no defaults are applied after an error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::{Capability, CapabilitySet, Gateway, HttpBackend, HttpOptions, MockBackend, DEFAULT_EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::extract::{
    AnswerAliases, BinaryLabel, DecisionPolicy, Extractor, DEFAULT_DIC_THRESHOLD, DEFAULT_TEMPERATURE,
};
use crate::recognition::{RecognitionTask, Recognizer, RefinementChain, RelationLexicon, DEFAULT_RELATIONS};
use crate::variation::{NoiseConfig, DEFAULT_ARTICLES, DEFAULT_SEED};

pub const SCHEMA_VERSION: u32 = 1;
pub const ENDPOINT_ENV: &str = "VLX_BACKEND_ENDPOINT";

#[derive(Debug, Clone, PartialEq)]
pub enum BackendConfig {
    Mock {
        fixtures: PathBuf,
        capabilities: CapabilitySet,
        embedding_dim: usize,
    },
    Http {
        endpoint: String,
        retries: u32,
        backoff: Duration,
        timeout: Duration,
        capabilities: CapabilitySet,
    },
}

impl BackendConfig {
    pub fn build(&self) -> Result<Gateway> {
        match self {
            BackendConfig::Mock {
                fixtures,
                capabilities,
                embedding_dim,
            } => Ok(Gateway::new(
                MockBackend::from_fixture_file(fixtures)?
                    .with_capabilities(capabilities.clone())
                    .with_embedding_dim(*embedding_dim),
            )),
            BackendConfig::Http {
                endpoint,
                retries,
                backoff,
                timeout,
                capabilities,
            } => Ok(Gateway::new(HttpBackend::new(
                endpoint,
                HttpOptions {
                    retries: *retries,
                    backoff: *backoff,
                    timeout: *timeout,
                    capabilities: capabilities.clone(),
                },
            )?)),
        }
    }

    pub fn http(endpoint: &str) -> Self {
        let d = HttpOptions::default();
        BackendConfig::Http {
            endpoint: endpoint.to_string(),
            retries: d.retries,
            backoff: d.backoff,
            timeout: d.timeout,
            capabilities: d.capabilities,
        }
    }
}

/// A named task: a single recognition query or a refinement chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TaskDefinition {
    Chain(RefinementChain),
    Single(RecognitionTask),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolkitConfig {
    pub backend: BackendConfig,
    pub noise: NoiseConfig,
    /// Whether the seed came from the document rather than the default.
    pub seed_from_config: bool,
    pub articles: Vec<String>,
    pub decision_policy: DecisionPolicy,
    pub itr_temperature: f64,
    pub dic_threshold: f64,
    pub aliases: AnswerAliases,
    pub relation_lexicon: RelationLexicon,
    pub workers: usize,
    pub tasks: BTreeMap<String, TaskDefinition>,
}

// Wire form. Every optional field carries its documented default.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    backend: RawBackend,
    #[serde(default)]
    noise: RawNoise,
    #[serde(default = "default_articles")]
    articles: Vec<String>,
    #[serde(default)]
    decision_policy: DecisionPolicy,
    #[serde(default = "default_temperature")]
    itr_temperature: f64,
    #[serde(default = "default_dic_threshold")]
    dic_threshold: f64,
    #[serde(default)]
    aliases: BTreeMap<String, BinaryLabel>,
    #[serde(default = "default_lexicon")]
    relation_lexicon: Vec<String>,
    #[serde(default = "default_workers")]
    workers: usize,
    #[serde(default)]
    tasks: BTreeMap<String, Value>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RawBackend {
    Mock {
        fixtures: PathBuf,
        #[serde(default)]
        capabilities: Option<Vec<Capability>>,
        #[serde(default = "default_embedding_dim")]
        embedding_dim: usize,
    },
    Http {
        endpoint: String,
        #[serde(default = "default_retries")]
        retries: u32,
        #[serde(default = "default_backoff_ms")]
        backoff_ms: u64,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default)]
        capabilities: Option<Vec<Capability>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    #[serde(default = "default_shift_low")]
    shift_low: f64,
    #[serde(default = "default_shift_high")]
    shift_high: f64,
    #[serde(default = "default_variants")]
    n_variants: usize,
    #[serde(default)]
    seed: Option<u64>,
}

impl Default for RawNoise {
    fn default() -> Self {
        Self {
            shift_low: default_shift_low(),
            shift_high: default_shift_high(),
            n_variants: default_variants(),
            seed: None,
        }
    }
}

fn default_articles() -> Vec<String> {
    DEFAULT_ARTICLES.iter().map(|s| s.to_string()).collect()
}
fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}
fn default_dic_threshold() -> f64 {
    DEFAULT_DIC_THRESHOLD
}
fn default_lexicon() -> Vec<String> {
    DEFAULT_RELATIONS.iter().map(|s| s.to_string()).collect()
}
fn default_workers() -> usize {
    1
}
fn default_embedding_dim() -> usize {
    DEFAULT_EMBEDDING_DIM
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_timeout_secs() -> u64 {
    60
}
fn default_shift_low() -> f64 {
    NoiseConfig::default().shift_low
}
fn default_shift_high() -> f64 {
    NoiseConfig::default().shift_high
}
fn default_variants() -> usize {
    NoiseConfig::default().n_variants
}

fn ensure(ok: bool, path: &str, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(path, message))
    }
}

fn at(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::InvalidArgument(m) => Error::config(path, m),
        other => Error::config(path, other.to_string()),
    }
}

fn capabilities(raw: Option<Vec<Capability>>, path: &str) -> Result<CapabilitySet> {
    match raw {
        None => Ok(CapabilitySet::all()),
        Some(v) => {
            ensure(!v.is_empty(), path, "at least one capability is required")?;
            Ok(CapabilitySet::only(v))
        }
    }
}

fn parse_task(name: &str, value: Value) -> Result<TaskDefinition> {
    let path = format!("tasks.{name}");
    let is_chain = value.get("steps").is_some();
    let wrap = |e: serde_path_to_error::Error<serde_json::Error>| {
        let inner = e.path().to_string();
        let p = if inner == "." { path.clone() } else { format!("{path}.{inner}") };
        Error::config(p, e.inner().to_string())
    };
    let def = if is_chain {
        let chain: RefinementChain = serde_path_to_error::deserialize(value).map_err(wrap)?;
        chain.validate().map_err(at(&path))?;
        TaskDefinition::Chain(chain)
    } else {
        let task: RecognitionTask = serde_path_to_error::deserialize(value).map_err(wrap)?;
        task.validate().map_err(at(&path))?;
        TaskDefinition::Single(task)
    };
    Ok(def)
}

impl ToolkitConfig {
    /// Defaults around the given backend.
    pub fn with_backend(backend: BackendConfig) -> Self {
        Self {
            backend,
            noise: NoiseConfig::default(),
            seed_from_config: false,
            articles: default_articles(),
            decision_policy: DecisionPolicy::default(),
            itr_temperature: DEFAULT_TEMPERATURE,
            dic_threshold: DEFAULT_DIC_THRESHOLD,
            aliases: AnswerAliases::default(),
            relation_lexicon: RelationLexicon::default(),
            workers: 1,
            tasks: BTreeMap::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json_str(&text, base)
    }

    /// Parses a config document; relative fixture paths resolve against `base_dir`.
    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let raw: RawConfig = serde_path_to_error::deserialize(&mut de)
            .map_err(|e| Error::config(e.path().to_string(), e.inner().to_string()))?;
        Self::from_raw(raw, base_dir)
    }

    fn from_raw(raw: RawConfig, base_dir: &Path) -> Result<Self> {
        ensure(
            raw.schema_version == SCHEMA_VERSION,
            "schema_version",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", raw.schema_version),
        )?;

        let backend = match raw.backend {
            RawBackend::Mock {
                fixtures,
                capabilities: caps,
                embedding_dim,
            } => {
                ensure(embedding_dim > 0, "backend.embedding_dim", "must be positive")?;
                let fixtures = base_dir.join(fixtures);
                MockBackend::from_fixture_file(&fixtures).map_err(|e| match e {
                    Error::Config { path, message } => Error::config(format!("backend.fixtures ({path})"), message),
                    other => Error::config("backend.fixtures", other.to_string()),
                })?;
                BackendConfig::Mock {
                    fixtures,
                    capabilities: capabilities(caps, "backend.capabilities")?,
                    embedding_dim,
                }
            }
            RawBackend::Http {
                endpoint,
                retries,
                backoff_ms,
                timeout_secs,
                capabilities: caps,
            } => {
                ensure(
                    endpoint.starts_with("http://") || endpoint.starts_with("https://"),
                    "backend.endpoint",
                    "must be an http:// or https:// URL",
                )?;
                ensure(retries <= 10, "backend.retries", "must be at most 10")?;
                ensure(timeout_secs > 0, "backend.timeout_secs", "must be positive")?;
                BackendConfig::Http {
                    endpoint,
                    retries,
                    backoff: Duration::from_millis(backoff_ms),
                    timeout: Duration::from_secs(timeout_secs),
                    capabilities: capabilities(caps, "backend.capabilities")?,
                }
            }
        };

        let n = &raw.noise;
        ensure(
            n.shift_low.is_finite() && (-1.0..=1.0).contains(&n.shift_low),
            "noise.shift_low",
            "must lie in [-1, 1]",
        )?;
        ensure(
            n.shift_high.is_finite() && (-1.0..=1.0).contains(&n.shift_high),
            "noise.shift_high",
            "must lie in [-1, 1]",
        )?;
        ensure(n.shift_low <= n.shift_high, "noise.shift_low", "must not exceed noise.shift_high")?;
        ensure(n.n_variants >= 1, "noise.n_variants", "must be at least 1")?;
        let noise = NoiseConfig {
            shift_low: n.shift_low,
            shift_high: n.shift_high,
            n_variants: n.n_variants,
            seed: n.seed.unwrap_or(DEFAULT_SEED),
        };

        ensure(!raw.articles.is_empty(), "articles", "must not be empty")?;
        for (i, a) in raw.articles.iter().enumerate() {
            ensure(!a.trim().is_empty(), &format!("articles[{i}]"), "must not be empty")?;
        }
        raw.decision_policy
            .validate()
            .map_err(at("decision_policy.min_valid_fraction"))?;
        ensure(
            raw.itr_temperature.is_finite() && raw.itr_temperature > 0.0,
            "itr_temperature",
            "must be positive",
        )?;
        ensure(
            (-1.0..=1.0).contains(&raw.dic_threshold),
            "dic_threshold",
            "must lie in [-1, 1]",
        )?;
        ensure((1..=64).contains(&raw.workers), "workers", "must lie in [1, 64]")?;

        let mut aliases = AnswerAliases::new();
        for (k, v) in &raw.aliases {
            aliases.insert(k, *v).map_err(at(&format!("aliases.{k}")))?;
        }
        let relation_lexicon = RelationLexicon::new(&raw.relation_lexicon).map_err(at("relation_lexicon"))?;

        let mut tasks = BTreeMap::new();
        for (name, value) in raw.tasks {
            ensure(!name.trim().is_empty(), "tasks", "task names must not be empty")?;
            let def = parse_task(&name, value)?;
            tasks.insert(name, def);
        }

        Ok(Self {
            backend,
            noise,
            seed_from_config: n.seed.is_some(),
            articles: raw.articles,
            decision_policy: raw.decision_policy,
            itr_temperature: raw.itr_temperature,
            dic_threshold: raw.dic_threshold,
            aliases,
            relation_lexicon,
            workers: raw.workers,
            tasks,
        })
    }

    /// Seed precedence: explicit override, then the document, then the default.
    pub fn with_seed_override(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.noise.seed = s;
        }
        self
    }

    /// Replaces the endpoint of an HTTP backend; mock backends are unaffected.
    pub fn with_endpoint_override(mut self, endpoint: Option<&str>) -> Result<Self> {
        if let (Some(e), BackendConfig::Http { endpoint, .. }) = (endpoint, &mut self.backend) {
            if !(e.starts_with("http://") || e.starts_with("https://")) {
                return Err(Error::config(ENDPOINT_ENV, "must be an http:// or https:// URL"));
            }
            *endpoint = e.to_string();
        }
        Ok(self)
    }

    pub fn gateway(&self) -> Result<Gateway> {
        self.backend.build()
    }

    pub fn extractor(&self, gateway: Gateway) -> Extractor {
        Extractor::new(gateway)
            .with_noise(self.noise.clone())
            .with_policy(self.decision_policy)
            .with_aliases(self.aliases.clone())
            .with_temperature(self.itr_temperature)
            .with_workers(self.workers)
    }

    pub fn recognizer(&self, gateway: Gateway) -> Recognizer {
        Recognizer::new(self.extractor(gateway))
            .with_articles(self.articles.clone())
            .with_lexicon(self.relation_lexicon.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("fx.json"), "[]").unwrap();
        let p = dir.path().to_path_buf();
        (dir, p)
    }

    fn load(doc: Value, dir: &Path) -> Result<ToolkitConfig> {
        ToolkitConfig::from_json_str(&doc.to_string(), dir)
    }

    fn err_path(doc: Value, dir: &Path) -> String {
        match load(doc, dir).unwrap_err() {
            Error::Config { path, .. } => path,
            e => panic!("expected config error, got {e}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let (_d, dir) = base();
        let c = load(
            serde_json::json!({"schema_version":1,"backend":{"type":"mock","fixtures":"fx.json"}}),
            &dir,
        )
        .unwrap();
        assert_eq!(c.noise, NoiseConfig::default());
        assert!(!c.seed_from_config);
        assert_eq!(c.articles, ["a", "the", "this", "that"]);
        assert_eq!(c.dic_threshold, 0.8);
        assert_eq!(c.itr_temperature, 1.0);
        assert_eq!(c.decision_policy.min_valid_fraction, 0.5);
        assert!(c.gateway().is_ok());
    }

    #[test]
    fn seed_precedence() {
        let (_d, dir) = base();
        let doc = serde_json::json!({"schema_version":1,"backend":{"type":"mock","fixtures":"fx.json"},
            "noise":{"seed":99}});
        let c = load(doc, &dir).unwrap();
        assert_eq!(c.noise.seed, 99);
        assert_eq!(c.clone().with_seed_override(Some(5)).noise.seed, 5);
        assert_eq!(c.with_seed_override(None).noise.seed, 99);
    }

    #[test]
    fn out_of_range_fields_report_their_path() {
        let (_d, dir) = base();
        let with = |extra: Value| {
            let mut doc = serde_json::json!({"schema_version":1,"backend":{"type":"mock","fixtures":"fx.json"}});
            for (k, v) in extra.as_object().unwrap() {
                doc[k] = v.clone();
            }
            doc
        };
        assert_eq!(err_path(with(serde_json::json!({"schema_version":2})), &dir), "schema_version");
        assert_eq!(
            err_path(with(serde_json::json!({"noise":{"shift_low":0.3,"shift_high":0.1}})), &dir),
            "noise.shift_low"
        );
        assert_eq!(err_path(with(serde_json::json!({"noise":{"n_variants":0}})), &dir), "noise.n_variants");
        assert_eq!(err_path(with(serde_json::json!({"dic_threshold":1.5})), &dir), "dic_threshold");
        assert_eq!(err_path(with(serde_json::json!({"itr_temperature":0.0})), &dir), "itr_temperature");
        assert_eq!(
            err_path(with(serde_json::json!({"decision_policy":{"min_valid_fraction":2.0}})), &dir),
            "decision_policy.min_valid_fraction"
        );
        assert_eq!(err_path(with(serde_json::json!({"articles":[]})), &dir), "articles");
        assert_eq!(err_path(with(serde_json::json!({"noise":{"sigma":1.0}})), &dir), "noise.sigma");
        assert_eq!(err_path(with(serde_json::json!({"itr_temperature":"hot"})), &dir), "itr_temperature");
        assert_eq!(
            err_path(with(serde_json::json!({"aliases":{"yeah":"MAYBE"}})), &dir),
            "aliases.yeah"
        );
        assert_eq!(
            err_path(with(serde_json::json!({"tasks":{"door":{"kind":"state_binary","method":"bvqa","template":"is the door open?"}}})), &dir),
            "tasks.door"
        );
        assert_eq!(
            err_path(with(serde_json::json!({"tasks":{"tv":{"steps":[{"kind":"location","phrase":"tv","size":3}]}}})), &dir),
            "tasks.tv.steps[0]"
        );
    }

    #[test]
    fn unresolvable_fixtures_fail_the_load() {
        let (_d, dir) = base();
        let p = err_path(
            serde_json::json!({"schema_version":1,"backend":{"type":"mock","fixtures":"missing.json"}}),
            &dir,
        );
        assert!(p.starts_with("backend.fixtures"), "{p}");
        let p = err_path(
            serde_json::json!({"schema_version":1,"backend":{"type":"http","endpoint":"localhost:9"}}),
            &dir,
        );
        assert_eq!(p, "backend.endpoint");
    }

    #[test]
    fn endpoint_override_applies_to_http_only() {
        let (_d, dir) = base();
        let c = load(
            serde_json::json!({"schema_version":1,"backend":{"type":"http","endpoint":"http://a:1"}}),
            &dir,
        )
        .unwrap()
        .with_endpoint_override(Some("http://b:2"))
        .unwrap();
        assert!(matches!(c.backend, BackendConfig::Http { ref endpoint, .. } if endpoint == "http://b:2"));
        let m = load(
            serde_json::json!({"schema_version":1,"backend":{"type":"mock","fixtures":"fx.json"}}),
            &dir,
        )
        .unwrap();
        let before = m.backend.clone();
        assert_eq!(m.with_endpoint_override(Some("http://b:2")).unwrap().backend, before);
    }

    #[test]
    fn tasks_parse_as_single_or_chain() {
        let (_d, dir) = base();
        let c = load(
            serde_json::json!({"schema_version":1,"backend":{"type":"mock","fixtures":"fx.json"},
              "tasks":{
                "door":{"kind":"state_binary","method":"bvqa","template":"is {art} door open?"},
                "tv":{"steps":[{"kind":"location","phrase":"the tv"},
                               {"kind":"object_class","method":"mvqa","choices":["mountain","sea"],
                                "template":"what is shown on {art} screen?"}]}
              }}),
            &dir,
        )
        .unwrap();
        assert!(matches!(c.tasks["door"], TaskDefinition::Single(_)));
        assert!(matches!(c.tasks["tv"], TaskDefinition::Chain(ref ch) if ch.steps.len() == 2));
    }
}
