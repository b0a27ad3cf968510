//! Waypoint baselines and caption-difference anomaly checks.
//!
//! Store layout, one directory per store:
//!
//! ```text
//! <store>/waypoints.json      index of live baselines
//! <store>/images/<sha256>.png baseline images, content addressed
//! <store>/audit.jsonl         one line per baseline (re-)recording
//! <store>/reports.jsonl       one line per check
//! ```
//!
//! The store has a single writer. Checks compare against the stored baseline
//! embedding; the baseline image is never re-captioned.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{EmbeddingVector, Gateway};
use crate::error::{Error, Result};
use crate::extract::{check_threshold, cosine_similarity};
use crate::image::ImageBuffer;
use crate::variation::{rgb_shift, NoiseConfig};

const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    System,
    Fixed(DateTime<Utc>),
}

impl Clock {
    pub fn now(&self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Fixed(t) => *t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub id: String,
    pub label: String,
    /// Path of the baseline image relative to the store root.
    pub baseline_image_ref: String,
    pub baseline_caption: String,
    pub baseline_embedding: EmbeddingVector,
    pub backend_fingerprint: String,
    pub recorded_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub waypoint_id: String,
    pub recorded_at: DateTime<Utc>,
    pub baseline_caption: String,
    pub baseline_image_ref: String,
    pub replaced_caption: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub waypoint_id: String,
    pub similarity: f64,
    pub anomalous: bool,
    pub baseline_caption: String,
    pub current_caption: String,
    pub threshold: f64,
    pub checked_at: DateTime<Utc>,
    /// Spread of per-variant similarities when the check was an ensemble.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variants: Option<usize>,
}

/// Outcome for one stop of a patrol route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatrolEntry {
    Report(AnomalyReport),
    Failed {
        waypoint_id: String,
        error: String,
        message: String,
    },
}

impl PatrolEntry {
    pub fn report(&self) -> Option<&AnomalyReport> {
        match self {
            PatrolEntry::Report(r) => Some(r),
            PatrolEntry::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    schema_version: u32,
    waypoints: BTreeMap<String, Waypoint>,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    /// Opens a store, creating its directory layout if needed.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let images = root.join("images");
        fs::create_dir_all(&images).map_err(|source| Error::StoreWrite {
            path: images.clone(),
            source,
        })?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("waypoints.json")
    }

    fn read_index(&self) -> Result<Index> {
        let path = self.index_path();
        match fs::read_to_string(&path) {
            Ok(text) => {
                let index: Index = serde_json::from_str(&text).map_err(|e| Error::StoreRead {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                if index.schema_version != SCHEMA_VERSION {
                    return Err(Error::StoreRead {
                        path,
                        message: format!("unsupported schema_version {}", index.schema_version),
                    });
                }
                Ok(index)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Index {
                schema_version: SCHEMA_VERSION,
                waypoints: BTreeMap::new(),
            }),
            Err(e) => Err(Error::StoreRead {
                path,
                message: e.to_string(),
            }),
        }
    }

    fn write_index(&self, index: &Index) -> Result<()> {
        let path = self.index_path();
        let tmp = self.root.join("waypoints.json.tmp");
        let mut text = serde_json::to_string_pretty(index)?;
        text.push('\n');
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|source| Error::StoreWrite { path, source })
    }

    fn append_line<T: Serialize>(&self, file: &str, value: &T) -> Result<()> {
        let path = self.root.join(file);
        let mut line = serde_json::to_string(value)?;
        line.push('\n');
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .and_then(|mut f| f.write_all(line.as_bytes()))
            .map_err(|source| Error::StoreWrite { path, source })
    }

    fn read_lines<T: for<'de> Deserialize<'de>>(&self, file: &str) -> Result<Vec<T>> {
        let path = self.root.join(file);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => {
                return Err(Error::StoreRead {
                    path,
                    message: e.to_string(),
                })
            }
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l).map_err(|e| Error::StoreRead {
                    path: path.clone(),
                    message: e.to_string(),
                })
            })
            .collect()
    }

    /// Writes the image as PNG under its content hash and returns the relative ref.
    fn put_image(&self, image: &ImageBuffer) -> Result<String> {
        let png = image.encode_png()?;
        let name = format!("images/{}.png", hex::encode(Sha256::digest(&png)));
        let path = self.root.join(&name);
        if !path.exists() {
            fs::write(&path, &png).map_err(|source| Error::StoreWrite { path, source })?;
        }
        Ok(name)
    }

    pub fn waypoint(&self, id: &str) -> Result<Waypoint> {
        self.read_index()?
            .waypoints
            .remove(id)
            .ok_or_else(|| Error::UnknownWaypoint(id.to_string()))
    }

    pub fn waypoints(&self) -> Result<Vec<Waypoint>> {
        Ok(self.read_index()?.waypoints.into_values().collect())
    }

    pub fn audit_log(&self) -> Result<Vec<AuditEntry>> {
        self.read_lines("audit.jsonl")
    }

    pub fn reports(&self) -> Result<Vec<AnomalyReport>> {
        self.read_lines("reports.jsonl")
    }

    pub fn baseline_image(&self, waypoint: &Waypoint) -> Result<ImageBuffer> {
        ImageBuffer::open(self.root.join(&waypoint.baseline_image_ref))
    }
}

/// Records baselines and checks waypoints against them.
#[derive(Debug, Clone)]
pub struct Patrol {
    gateway: Gateway,
    store: Store,
    clock: Clock,
    ensemble: Option<NoiseConfig>,
}

impl Patrol {
    pub fn new(gateway: Gateway, store: Store) -> Self {
        Self {
            gateway,
            store,
            clock: Clock::System,
            ensemble: None,
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    /// Compare every noise variant of the current image and report the mean similarity.
    pub fn with_ensemble(mut self, noise: NoiseConfig) -> Self {
        self.ensemble = Some(noise);
        self
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Captions and embeds `image` and makes it the live baseline of `waypoint_id`.
    pub fn record_baseline(&self, waypoint_id: &str, label: &str, image: &ImageBuffer) -> Result<Waypoint> {
        if waypoint_id.trim().is_empty() {
            return Err(Error::invalid("waypoint id must not be empty"));
        }
        let caption = self.gateway.caption_image(image)?;
        let embedding = self.gateway.embed_text(&caption)?;
        let mut index = self.store.read_index()?;
        let image_ref = self.store.put_image(image)?;
        let waypoint = Waypoint {
            id: waypoint_id.to_string(),
            label: if label.is_empty() { waypoint_id } else { label }.to_string(),
            baseline_image_ref: image_ref.clone(),
            baseline_caption: caption.clone(),
            baseline_embedding: embedding,
            backend_fingerprint: self.gateway.fingerprint(),
            recorded_at: self.clock.now(),
        };
        let replaced = index
            .waypoints
            .insert(waypoint.id.clone(), waypoint.clone())
            .map(|w| w.baseline_caption);
        index.schema_version = SCHEMA_VERSION;
        self.store.write_index(&index)?;
        self.store.append_line(
            "audit.jsonl",
            &AuditEntry {
                waypoint_id: waypoint.id.clone(),
                recorded_at: waypoint.recorded_at,
                baseline_caption: caption,
                baseline_image_ref: image_ref,
                replaced_caption: replaced,
            },
        )?;
        Ok(waypoint)
    }

    fn compare(&self, baseline: &EmbeddingVector, image: &ImageBuffer) -> Result<(String, f64)> {
        let caption = self.gateway.caption_image(image)?;
        let sim = cosine_similarity(baseline, &self.gateway.embed_text(&caption)?)?;
        Ok((caption, sim))
    }

    /// Compares the current view of a waypoint with its baseline and logs the report.
    pub fn check_waypoint(&self, waypoint_id: &str, image: &ImageBuffer, threshold: f64) -> Result<AnomalyReport> {
        check_threshold(threshold)?;
        let wp = self.store.waypoint(waypoint_id)?;
        let current = self.gateway.fingerprint();
        if wp.backend_fingerprint != current {
            return Err(Error::EmbeddingSpaceMismatch {
                baseline: wp.backend_fingerprint,
                current,
            });
        }
        let (current_caption, similarity, similarity_std, variants) = match &self.ensemble {
            None => {
                let (c, s) = self.compare(&wp.baseline_embedding, image)?;
                (c, s, None, None)
            }
            Some(noise) => {
                let runs = (0..noise.n_variants)
                    .map(|i| self.compare(&wp.baseline_embedding, &rgb_shift(image, noise, i)?))
                    .collect::<Result<Vec<_>>>()?;
                let n = runs.len() as f64;
                let mean = runs.iter().map(|r| r.1).sum::<f64>() / n;
                let std = (runs.iter().map(|r| (r.1 - mean).powi(2)).sum::<f64>() / n).sqrt();
                (runs[0].0.clone(), mean, Some(std), Some(runs.len()))
            }
        };
        let report = AnomalyReport {
            waypoint_id: wp.id,
            similarity,
            anomalous: similarity < threshold,
            baseline_caption: wp.baseline_caption,
            current_caption,
            threshold,
            checked_at: self.clock.now(),
            similarity_std,
            variants,
        };
        self.store.append_line("reports.jsonl", &report)?;
        Ok(report)
    }

    /// Checks each stop in order. A failing stop becomes an error entry and
    /// the route continues.
    pub fn patrol(&self, route: &[(String, ImageBuffer)], threshold: f64) -> Result<Vec<PatrolEntry>> {
        check_threshold(threshold)?;
        Ok(route
            .iter()
            .map(|(id, image)| match self.check_waypoint(id, image, threshold) {
                Ok(r) => PatrolEntry::Report(r),
                Err(e) => PatrolEntry::Failed {
                    waypoint_id: id.clone(),
                    error: e.code().to_string(),
                    message: e.to_string(),
                },
            })
            .collect())
    }
}
