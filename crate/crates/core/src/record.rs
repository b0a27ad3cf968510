//! JSONL result log.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::extract::Trial;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub task_name: String,
    pub timestamp: DateTime<Utc>,
    pub inputs_digest: String,
    pub result: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_answers: Option<Vec<Trial>>,
}

/// SHA-256 over length-prefixed parts, hex encoded.
pub fn digest_parts<S: AsRef<[u8]>>(parts: &[S]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        let p = p.as_ref();
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

impl ResultRecord {
    /// The run id is derived from the other fields, so identical runs log identical records.
    pub fn new(task_name: &str, timestamp: DateTime<Utc>, inputs_digest: String, result: Value) -> Self {
        let run_id = digest_parts(&[
            task_name.as_bytes(),
            timestamp.to_rfc3339().as_bytes(),
            inputs_digest.as_bytes(),
        ])[..16]
            .to_string();
        Self {
            schema_version: RECORD_SCHEMA_VERSION,
            run_id,
            task_name: task_name.to_string(),
            timestamp,
            inputs_digest,
            result,
            raw_answers: None,
        }
    }

    pub fn with_raw_answers(mut self, trials: Vec<Trial>) -> Self {
        self.raw_answers = Some(trials);
        self
    }

    pub fn append_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut line = serde_json::to_string(self)?;
        line.push('\n');
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| f.write_all(line.as_bytes()))
            .map_err(|source| Error::StoreWrite {
                path: path.to_path_buf(),
                source,
            })
    }
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
