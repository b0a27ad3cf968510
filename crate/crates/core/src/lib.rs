//! Turn vision-language model outputs into values a robot can act on:
//! yes/no decisions, small discrete choices, bounding boxes and scene-change
//! scores.
//!
//! Models sit behind a [`backend::Gateway`], either a fixture-driven
//! [`backend::MockBackend`] or an [`backend::HttpBackend`] talking to a model
//! server. [`extract::Extractor`] implements the extraction methods on top of
//! it, [`recognition`] composes them into recognition tasks and [`patrol`]
//! keeps per-waypoint baselines for caption-difference anomaly detection.

pub mod backend;
pub mod cli;
pub mod config;
pub mod error;
pub mod extract;
pub mod image;
pub mod patrol;
pub mod recognition;
pub mod record;
pub mod text;
pub mod variation;

pub use error::{Error, Result};
