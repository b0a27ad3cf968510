//! Fixture-table backend for deterministic tests and offline runs.
//!
//! Requests are matched exactly on `(image, task, normalized text)`. The image
//! key is either the image's registered id or `sha256:<content hash>`. An entry
//! may pin a noise `variant`; entries without one apply to every variant of the
//! image. Unmatched requests fail with [`Error::FixtureMiss`].

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Backend, Capability, CapabilitySet};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::text::{normalize_answer, normalized_string};

pub const DEFAULT_EMBEDDING_DIM: usize = 256;

/// One row of a fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEntry {
    pub image_id: String,
    pub task: String,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<usize>,
    pub response: Value,
}

#[derive(Debug, Clone, PartialEq)]
enum Response {
    Answer(String),
    Score(f64),
    Region(Option<[f64; 4]>),
    Caption(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    image: String,
    variant: Option<usize>,
    task: Capability,
    text: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    table: HashMap<Key, Response>,
    capabilities: CapabilitySet,
    embedding_dim: usize,
}

/// FNV-1a, stable across platforms and runs.
fn fnv1a(token: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// L2-normalized bag-of-tokens vector with one hashed bucket per token.
///
/// Text without tokens yields the zero vector.
pub fn hash_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for token in normalize_answer(text) {
        v[(fnv1a(&token) % dim as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

impl MockBackend {
    pub fn builder() -> MockBuilder {
        MockBuilder::default()
    }

    pub fn from_entries(entries: Vec<FixtureEntry>) -> Result<Self> {
        let mut b = Self::builder();
        for (i, e) in entries.into_iter().enumerate() {
            b.insert_entry(e).map_err(|m| Error::config(format!("[{i}]"), m))?;
        }
        Ok(b.build())
    }

    /// Loads a JSON array of [`FixtureEntry`] rows.
    pub fn from_fixture_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        let entries: Vec<FixtureEntry> = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            Error::config(format!("{}:{}", path.display(), e.path()), e.inner().to_string())
        })?;
        Self::from_entries(entries).map_err(|e| match e {
            Error::Config { path: p, message } => {
                Error::config(format!("{}:{p}", path.display()), message)
            }
            other => other,
        })
    }

    pub fn with_capabilities(mut self, caps: CapabilitySet) -> Self {
        self.capabilities = caps;
        self
    }

    pub fn with_embedding_dim(mut self, dim: usize) -> Self {
        self.embedding_dim = dim.max(1);
        self
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn find(&self, image: &str, variant: Option<usize>, task: Capability, text: &Option<String>) -> Option<&Response> {
        let mut key = Key {
            image: image.to_string(),
            variant,
            task,
            text: text.clone(),
        };
        if let Some(r) = self.table.get(&key) {
            return Some(r);
        }
        variant?;
        key.variant = None;
        self.table.get(&key)
    }

    /// Tries the image id first; the content hash is only computed on a miss.
    fn lookup(&self, image: &ImageBuffer, task: Capability, text: Option<&str>) -> Result<&Response> {
        let text = text.map(normalized_string);
        let variant = image.tag().variant;
        if let Some(r) = image.id().and_then(|id| self.find(id, variant, task, &text)) {
            return Ok(r);
        }
        let hash_key = format!("sha256:{}", image.content_hash());
        if let Some(r) = self.find(&hash_key, variant, task, &text) {
            return Ok(r);
        }
        Err(Error::FixtureMiss {
            task: task.to_string(),
            image: image.id().map_or(hash_key, str::to_string),
            text,
        })
    }
}

impl Backend for MockBackend {
    fn capabilities(&self) -> CapabilitySet {
        self.capabilities.clone()
    }

    fn fingerprint(&self) -> String {
        format!("mock-hash-{}", self.embedding_dim)
    }

    fn vqa(&self, image: &ImageBuffer, question: &str) -> Result<String> {
        match self.lookup(image, Capability::Vqa, Some(question))? {
            Response::Answer(a) => Ok(a.clone()),
            other => unreachable!("vqa key holds {other:?}"),
        }
    }

    fn itr_scores(&self, image: &ImageBuffer, choices: &[String]) -> Result<Vec<f64>> {
        choices
            .iter()
            .map(|c| match self.lookup(image, Capability::Itr, Some(c))? {
                Response::Score(s) => Ok(*s),
                other => unreachable!("itr key holds {other:?}"),
            })
            .collect()
    }

    fn ground(&self, image: &ImageBuffer, phrase: &str) -> Result<Option<[f64; 4]>> {
        match self.lookup(image, Capability::Vg, Some(phrase))? {
            Response::Region(r) => Ok(*r),
            other => unreachable!("vg key holds {other:?}"),
        }
    }

    fn caption(&self, image: &ImageBuffer) -> Result<String> {
        match self.lookup(image, Capability::Caption, None)? {
            Response::Caption(c) => Ok(c.clone()),
            other => unreachable!("caption key holds {other:?}"),
        }
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        Ok(hash_embedding(text, self.embedding_dim))
    }
}

#[derive(Debug, Clone)]
pub struct MockBuilder {
    table: HashMap<Key, Response>,
    capabilities: CapabilitySet,
    embedding_dim: usize,
}

impl Default for MockBuilder {
    fn default() -> Self {
        Self {
            table: HashMap::new(),
            capabilities: CapabilitySet::all(),
            embedding_dim: DEFAULT_EMBEDDING_DIM,
        }
    }
}

impl MockBuilder {
    fn put(&mut self, image: &str, variant: Option<usize>, task: Capability, text: Option<&str>, r: Response) {
        self.table.insert(
            Key {
                image: image.to_string(),
                variant,
                task,
                text: text.map(normalized_string),
            },
            r,
        );
    }

    fn insert_entry(&mut self, e: FixtureEntry) -> std::result::Result<(), String> {
        let task = Capability::parse(&e.task).ok_or_else(|| format!("unknown task `{}`", e.task))?;
        let need_text = |t: &Option<String>| {
            t.clone()
                .filter(|s| !s.trim().is_empty())
                .ok_or_else(|| format!("task `{}` requires non-empty `text`", e.task))
        };
        let response = match task {
            Capability::Vqa => {
                need_text(&e.text)?;
                Response::Answer(
                    e.response
                        .as_str()
                        .ok_or("vqa response must be a string")?
                        .to_string(),
                )
            }
            Capability::Itr => {
                need_text(&e.text)?;
                Response::Score(e.response.as_f64().ok_or("itr response must be a number")?)
            }
            Capability::Vg => {
                need_text(&e.text)?;
                if e.response.is_null() {
                    Response::Region(None)
                } else {
                    let arr: Vec<f64> = serde_json::from_value(e.response.clone())
                        .map_err(|_| "vg response must be [x_min, y_min, x_max, y_max] or null")?;
                    let arr: [f64; 4] = arr
                        .try_into()
                        .map_err(|_| "vg response must have exactly four numbers")?;
                    Response::Region(Some(arr))
                }
            }
            Capability::Caption => {
                if e.text.is_some() {
                    return Err("caption entries take no `text`".into());
                }
                Response::Caption(
                    e.response
                        .as_str()
                        .ok_or("caption response must be a string")?
                        .to_string(),
                )
            }
            Capability::Embed => {
                return Err("embed requests are served by the hash embedding, not fixtures".into())
            }
        };
        self.put(&e.image_id, e.variant, task, e.text.as_deref(), response);
        Ok(())
    }

    pub fn vqa(mut self, image: &str, question: &str, answer: &str) -> Self {
        self.put(image, None, Capability::Vqa, Some(question), Response::Answer(answer.into()));
        self
    }

    /// Answer only for one noise variant of `image`.
    pub fn vqa_variant(mut self, image: &str, variant: usize, question: &str, answer: &str) -> Self {
        self.put(image, Some(variant), Capability::Vqa, Some(question), Response::Answer(answer.into()));
        self
    }

    pub fn itr(mut self, image: &str, choice: &str, score: f64) -> Self {
        self.put(image, None, Capability::Itr, Some(choice), Response::Score(score));
        self
    }

    pub fn itr_variant(mut self, image: &str, variant: usize, choice: &str, score: f64) -> Self {
        self.put(image, Some(variant), Capability::Itr, Some(choice), Response::Score(score));
        self
    }

    pub fn ground(mut self, image: &str, phrase: &str, region: [f64; 4]) -> Self {
        self.put(image, None, Capability::Vg, Some(phrase), Response::Region(Some(region)));
        self
    }

    pub fn ground_nothing(mut self, image: &str, phrase: &str) -> Self {
        self.put(image, None, Capability::Vg, Some(phrase), Response::Region(None));
        self
    }

    pub fn caption(mut self, image: &str, caption: &str) -> Self {
        self.put(image, None, Capability::Caption, None, Response::Caption(caption.into()));
        self
    }

    pub fn caption_variant(mut self, image: &str, variant: usize, caption: &str) -> Self {
        self.put(image, Some(variant), Capability::Caption, None, Response::Caption(caption.into()));
        self
    }

    pub fn capabilities(mut self, caps: CapabilitySet) -> Self {
        self.capabilities = caps;
        self
    }

    pub fn embedding_dim(mut self, dim: usize) -> Self {
        self.embedding_dim = dim.max(1);
        self
    }

    pub fn build(self) -> MockBackend {
        MockBackend {
            table: self.table,
            capabilities: self.capabilities,
            embedding_dim: self.embedding_dim,
        }
    }
}
