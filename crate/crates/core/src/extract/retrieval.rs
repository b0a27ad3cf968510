use serde::{Deserialize, Serialize};

use super::answer::argmax_lowest;
use crate::error::{Error, Result};

/// Per-choice probabilities from image-text retrieval scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceDistribution {
    pub choices: Vec<String>,
    /// Raw backend scores; for ensembles, the per-variant mean.
    pub scores: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub selected: usize,
    pub selected_phrase: String,
}

/// Numerically stable `softmax(scores / temperature)`.
pub fn softmax(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let scaled: Vec<f64> = scores.iter().map(|s| s / temperature).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

impl ChoiceDistribution {
    /// Selection uses the raw scores so that it never depends on rounding in the softmax.
    pub fn from_scores(choices: &[String], scores: Vec<f64>, temperature: f64) -> Result<Self> {
        let probabilities = softmax(&scores, temperature)?;
        let selected = argmax_lowest(&scores).expect("non-empty scores");
        Ok(Self {
            choices: choices.to_vec(),
            selected_phrase: choices[selected].clone(),
            scores,
            probabilities,
            selected,
        })
    }

    /// Averages the probabilities of several single-image distributions.
    pub fn mean(parts: &[ChoiceDistribution]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyInput)?;
        let n = parts.len() as f64;
        let k = first.choices.len();
        let mut probabilities = vec![0.0; k];
        let mut scores = vec![0.0; k];
        for p in parts {
            for i in 0..k {
                probabilities[i] += p.probabilities[i] / n;
                scores[i] += p.scores[i] / n;
            }
        }
        let selected = argmax_lowest(&probabilities).expect("non-empty");
        Ok(Self {
            choices: first.choices.clone(),
            selected_phrase: first.choices[selected].clone(),
            scores,
            probabilities,
            selected,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn two_choice_softmax_matches_closed_form() {
        // e^2 / (e^2 + e^0.5) = 1 / (1 + e^-1.5)
        let expected0 = 1.0 / (1.0 + (-1.5f64).exp());
        let d = ChoiceDistribution::from_scores(&names(2), vec![2.0, 0.5], 1.0).unwrap();
        assert!((d.probabilities[0] - expected0).abs() < 1e-12);
        assert!((d.probabilities[0] - 0.8176).abs() < 1e-4);
        assert!((d.probabilities[1] - 0.1824).abs() < 1e-4);
        assert_eq!(d.selected, 0);
    }

    #[test]
    fn equal_scores_are_uniform() {
        let d = ChoiceDistribution::from_scores(&names(4), vec![0.3; 4], 1.0).unwrap();
        assert!(d.probabilities.iter().all(|p| (p - 0.25).abs() < 1e-15));
        assert_eq!(d.selected, 0);
    }

    #[test]
    fn shift_invariance() {
        let a = softmax(&[1.0, -2.0, 0.5], 0.7).unwrap();
        let b = softmax(&[101.0, 98.0, 100.5], 0.7).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_temperature() {
        assert!(softmax(&[1.0], 0.0).is_err());
        assert!(softmax(&[1.0], -1.0).is_err());
        assert!(softmax(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn extreme_scores_do_not_overflow() {
        let p = softmax(&[1000.0, -1000.0], 1.0).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }
}
