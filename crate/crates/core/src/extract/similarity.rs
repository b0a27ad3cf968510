use serde::{Deserialize, Serialize};

use crate::backend::EmbeddingVector;
use crate::error::{Error, Result};

/// Cosine of the angle between two embeddings, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dimension() != v.dimension() {
        return Err(Error::DimensionMismatch(u.dimension(), v.dimension()));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = u.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Caption-difference comparison of two scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DicResult {
    pub caption_a: String,
    pub caption_b: String,
    pub similarity: f64,
    pub changed: bool,
    pub threshold: f64,
}

impl DicResult {
    pub fn new(caption_a: String, caption_b: String, similarity: f64, threshold: f64) -> Self {
        Self {
            caption_a,
            caption_b,
            similarity,
            changed: similarity < threshold,
            threshold,
        }
    }
}

pub(crate) fn check_threshold(threshold: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::invalid(format!("threshold {threshold} outside [-1, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let u = ev(&[0.3, -1.2, 4.0]);
        assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&ev(&[1.0, 0.0]), &ev(&[0.0, 1.0])).unwrap(), 0.0);
        let c = cosine_similarity(&ev(&[1.0, 0.0]), &ev(&[1.0, 1.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((c - 0.7071).abs() < 1e-4);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&ev(&[0.0, 0.0]), &ev(&[1.0, 0.0])),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            cosine_similarity(&ev(&[1.0]), &ev(&[1.0, 0.0])),
            Err(Error::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn changed_flag_boundaries() {
        let r = DicResult::new("a".into(), "a".into(), 1.0, 1.0);
        assert!(!r.changed);
        let r = DicResult::new("a".into(), "b".into(), -1.0, -1.0);
        assert!(!r.changed);
        assert!(check_threshold(1.5).is_err());
    }
}
