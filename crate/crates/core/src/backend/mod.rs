//! Capability-based access to vision-language models.
//!
//! A [`Backend`] exposes raw model outputs. [`Gateway`] wraps one and enforces
//! the request preconditions, output contracts and box clamping shared by every
//! implementation, and counts calls per capability for instrumentation.

mod http;
mod mock;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

pub use http::{HttpBackend, HttpOptions};
pub use mock::{hash_embedding, FixtureEntry, MockBackend, MockBuilder, DEFAULT_EMBEDDING_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Vqa,
    Itr,
    Vg,
    Caption,
    Embed,
}

impl Capability {
    pub const ALL: [Capability; 5] = [
        Capability::Vqa,
        Capability::Itr,
        Capability::Vg,
        Capability::Caption,
        Capability::Embed,
    ];

    /// Task name used on the wire and in fixture files.
    pub fn as_str(self) -> &'static str {
        match self {
            Capability::Vqa => "vqa",
            Capability::Itr => "itr",
            Capability::Vg => "vg",
            Capability::Caption => "caption",
            Capability::Embed => "embed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CapabilitySet(BTreeSet<Capability>);

impl CapabilitySet {
    pub fn all() -> Self {
        Self(Capability::ALL.into_iter().collect())
    }

    pub fn only(caps: impl IntoIterator<Item = Capability>) -> Self {
        Self(caps.into_iter().collect())
    }

    pub fn contains(&self, cap: Capability) -> bool {
        self.0.contains(&cap)
    }

    pub fn iter(&self) -> impl Iterator<Item = Capability> + '_ {
        self.0.iter().copied()
    }
}

/// Pixel rectangle `[x_min, x_max) x [y_min, y_max)` returned by grounding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
    pub source_phrase: String,
}

impl GroundingBox {
    pub fn new(x_min: usize, y_min: usize, x_max: usize, y_max: usize, phrase: &str) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
            source_phrase: phrase.to_string(),
        }
    }

    pub fn width(&self) -> usize {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min
    }

    pub fn coords(&self) -> [usize; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    /// Checks the box is non-empty and lies inside a `width x height` image.
    pub fn check_within(&self, width: usize, height: usize) -> Result<()> {
        if self.x_min < self.x_max
            && self.y_min < self.y_max
            && self.x_max <= width
            && self.y_max <= height
        {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "box {:?} is not a valid region of a {width}x{height} image",
                self.coords()
            )))
        }
    }

    /// Translates the box by the origin of an enclosing crop.
    pub fn offset(&self, dx: usize, dy: usize) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
            source_phrase: self.source_phrase.clone(),
        }
    }

    /// Clamps a raw model box to the image, rounding outward to whole pixels.
    ///
    /// Returns `None` when nothing of the box survives.
    pub fn from_raw(raw: [f64; 4], width: usize, height: usize, phrase: &str) -> Result<Option<Self>> {
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Backend(format!("non-finite bounding box {raw:?}")));
        }
        let clamp = |v: f64, hi: usize| v.max(0.0).min(hi as f64) as usize;
        let x_min = clamp(raw[0].floor(), width);
        let y_min = clamp(raw[1].floor(), height);
        let x_max = clamp(raw[2].ceil(), width);
        let y_max = clamp(raw[3].ceil(), height);
        if x_min >= x_max || y_min >= y_max {
            return Ok(None);
        }
        Ok(Some(Self::new(x_min, y_min, x_max, y_max, phrase)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("embedding must have positive dimension"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding contains non-finite values"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Raw access to a vision-language model.
///
/// Implementations only report what the model produced; contracts are
/// enforced by [`Gateway`]. Methods for unsupported capabilities keep the
/// default body.
pub trait Backend: Send + Sync {
    fn capabilities(&self) -> CapabilitySet;

    /// Identifies the model configuration, in particular its embedding space.
    fn fingerprint(&self) -> String;

    fn vqa(&self, _image: &ImageBuffer, _question: &str) -> Result<String> {
        Err(Error::CapabilityUnsupported(Capability::Vqa))
    }

    fn itr_scores(&self, _image: &ImageBuffer, _choices: &[String]) -> Result<Vec<f64>> {
        Err(Error::CapabilityUnsupported(Capability::Itr))
    }

    /// Raw `[x_min, y_min, x_max, y_max]` in pixels, `None` when no region was found.
    fn ground(&self, _image: &ImageBuffer, _phrase: &str) -> Result<Option<[f64; 4]>> {
        Err(Error::CapabilityUnsupported(Capability::Vg))
    }

    fn caption(&self, _image: &ImageBuffer) -> Result<String> {
        Err(Error::CapabilityUnsupported(Capability::Caption))
    }

    fn embed(&self, _text: &str) -> Result<Vec<f64>> {
        Err(Error::CapabilityUnsupported(Capability::Embed))
    }

    fn ping(&self) -> Result<()> {
        Ok(())
    }
}

/// Contract-enforcing front of a [`Backend`]. Cheap to clone; clones share counters.
#[derive(Clone)]
pub struct Gateway {
    inner: Arc<GatewayInner>,
}

struct GatewayInner {
    backend: Box<dyn Backend>,
    calls: [AtomicUsize; 5],
    embedding_dim: OnceLock<usize>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.fingerprint())
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: impl Backend + 'static) -> Self {
        Self::from_boxed(Box::new(backend))
    }

    pub fn from_boxed(backend: Box<dyn Backend>) -> Self {
        Self {
            inner: Arc::new(GatewayInner {
                backend,
                calls: Default::default(),
                embedding_dim: OnceLock::new(),
            }),
        }
    }

    pub fn capabilities(&self) -> CapabilitySet {
        self.inner.backend.capabilities()
    }

    pub fn supports(&self, cap: Capability) -> bool {
        self.capabilities().contains(cap)
    }

    pub fn fingerprint(&self) -> String {
        self.inner.backend.fingerprint()
    }

    /// Number of backend requests issued for `cap` through this gateway.
    pub fn call_count(&self, cap: Capability) -> usize {
        self.inner.calls[cap.index()].load(Ordering::SeqCst)
    }

    pub fn total_calls(&self) -> usize {
        Capability::ALL.iter().map(|c| self.call_count(*c)).sum()
    }

    pub fn ping(&self) -> Result<()> {
        self.inner.backend.ping()
    }

    fn begin(&self, cap: Capability) -> Result<&dyn Backend> {
        if !self.supports(cap) {
            return Err(Error::CapabilityUnsupported(cap));
        }
        self.inner.calls[cap.index()].fetch_add(1, Ordering::SeqCst);
        Ok(self.inner.backend.as_ref())
    }

    /// Free-form answer, returned exactly as the model produced it.
    pub fn vqa_answer(&self, image: &ImageBuffer, question: &str) -> Result<String> {
        if question.trim().is_empty() {
            return Err(Error::invalid("question must not be empty"));
        }
        self.begin(Capability::Vqa)?.vqa(image, question)
    }

    /// One raw similarity score per choice, in input order.
    pub fn itr_scores(&self, image: &ImageBuffer, choices: &[String]) -> Result<Vec<f64>> {
        if choices.is_empty() {
            return Err(Error::invalid("choices must not be empty"));
        }
        let scores = self.begin(Capability::Itr)?.itr_scores(image, choices)?;
        if scores.len() != choices.len() {
            return Err(Error::Backend(format!(
                "expected {} scores, backend returned {}",
                choices.len(),
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Backend("non-finite retrieval score".into()));
        }
        Ok(scores)
    }

    /// Best-matching region for `phrase`, clamped to the image bounds.
    pub fn ground_phrase(&self, image: &ImageBuffer, phrase: &str) -> Result<GroundingBox> {
        if phrase.trim().is_empty() {
            return Err(Error::invalid("grounding phrase must not be empty"));
        }
        let raw = self.begin(Capability::Vg)?.ground(image, phrase)?;
        raw.map(|r| GroundingBox::from_raw(r, image.width(), image.height(), phrase))
            .transpose()?
            .flatten()
            .ok_or_else(|| Error::GroundingEmpty(phrase.to_string()))
    }

    pub fn caption_image(&self, image: &ImageBuffer) -> Result<String> {
        let caption = self.begin(Capability::Caption)?.caption(image)?;
        if caption.trim().is_empty() {
            return Err(Error::Backend("backend returned an empty caption".into()));
        }
        Ok(caption)
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(Error::invalid("text to embed must not be empty"));
        }
        let v = EmbeddingVector::new(self.begin(Capability::Embed)?.embed(text)?)
            .map_err(|e| Error::Backend(e.to_string()))?;
        let dim = *self.inner.embedding_dim.get_or_init(|| v.dimension());
        if dim != v.dimension() {
            return Err(Error::DimensionMismatch(dim, v.dimension()));
        }
        if v.norm() == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(v)
    }
}
