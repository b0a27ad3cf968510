//! Classifying raw answers and tallying them into decisions.
//!
//! Everything here is pure and order-independent so that grid queries can
//! complete in any order.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{normalize_answer, normalized_string};

/// Words dropped when deriving match tokens from a choice phrase.
pub const STOP_ARTICLES: [&str; 5] = ["a", "an", "the", "this", "that"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BinaryLabel {
    Yes,
    No,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Decision {
    Yes,
    No,
    Undecided,
}

/// Extra normalized strings accepted as yes or no. Empty by default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerAliases(BTreeMap<String, BinaryLabel>);

impl AnswerAliases {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, alias: &str, label: BinaryLabel) -> Result<()> {
        if label == BinaryLabel::Invalid {
            return Err(Error::invalid("aliases may only map to YES or NO"));
        }
        let key = normalized_string(alias);
        if key.is_empty() {
            return Err(Error::invalid("alias must contain at least one word"));
        }
        self.0.insert(key, label);
        Ok(())
    }

    pub fn with(mut self, alias: &str, label: BinaryLabel) -> Result<Self> {
        self.insert(alias, label)?;
        Ok(self)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, BinaryLabel)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Strict yes/no classification: anything but exactly "yes" or "no" is invalid.
pub fn classify_binary_answer(raw: &str) -> BinaryLabel {
    classify_binary_answer_with(raw, &AnswerAliases::default())
}

pub fn classify_binary_answer_with(raw: &str, aliases: &AnswerAliases) -> BinaryLabel {
    let tokens = normalize_answer(raw);
    match tokens.as_slice() {
        [t] if t == "yes" => BinaryLabel::Yes,
        [t] if t == "no" => BinaryLabel::No,
        _ => aliases
            .0
            .get(&tokens.join(" "))
            .copied()
            .unwrap_or(BinaryLabel::Invalid),
    }
}

/// Ordered candidate phrases with the tokens that identify each in an answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceSet {
    phrases: Vec<String>,
    match_tokens: Vec<Vec<String>>,
}

fn default_match_tokens(phrase: &str) -> Vec<String> {
    let all = normalize_answer(phrase);
    let content: Vec<String> = all
        .iter()
        .filter(|t| !STOP_ARTICLES.contains(&t.as_str()))
        .cloned()
        .collect();
    if content.is_empty() {
        all
    } else {
        content
    }
}

impl ChoiceSet {
    pub fn new<S: AsRef<str>>(phrases: impl IntoIterator<Item = S>) -> Result<Self> {
        let phrases: Vec<String> = phrases.into_iter().map(|p| p.as_ref().to_string()).collect();
        let tokens = phrases.iter().map(|p| default_match_tokens(p)).collect();
        Self::with_match_tokens(phrases, tokens)
    }

    /// Choice set with explicit per-choice match tokens.
    pub fn with_match_tokens(phrases: Vec<String>, match_tokens: Vec<Vec<String>>) -> Result<Self> {
        if phrases.len() < 2 {
            return Err(Error::invalid("a choice set needs at least two phrases"));
        }
        if match_tokens.len() != phrases.len() {
            return Err(Error::invalid("one match-token list is required per choice"));
        }
        let mut seen = HashSet::new();
        for p in &phrases {
            let key = normalized_string(p);
            if key.is_empty() {
                return Err(Error::invalid("choice phrases must not be empty"));
            }
            if !seen.insert(key) {
                return Err(Error::invalid(format!("duplicate choice `{p}`")));
            }
        }
        let match_tokens: Vec<Vec<String>> = match_tokens
            .into_iter()
            .map(|ts| ts.iter().flat_map(|t| normalize_answer(t)).collect())
            .collect();
        if match_tokens.iter().any(Vec::is_empty) {
            return Err(Error::invalid("every choice needs at least one match token"));
        }
        Ok(Self {
            phrases,
            match_tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    pub fn phrase(&self, i: usize) -> &str {
        &self.phrases[i]
    }

    pub fn match_tokens(&self, i: usize) -> &[String] {
        &self.match_tokens[i]
    }

    /// Index of the phrase equal to `label` after normalization.
    pub fn position(&self, label: &str) -> Option<usize> {
        let key = normalized_string(label);
        self.phrases.iter().position(|p| normalized_string(p) == key)
    }
}

/// Index of the single choice whose match tokens all occur in the answer.
///
/// No match and multiple matches are both invalid (`None`).
pub fn match_answer(raw: &str, choices: &ChoiceSet) -> Option<usize> {
    let tokens: HashSet<String> = normalize_answer(raw).into_iter().collect();
    let mut hits = (0..choices.len())
        .filter(|&i| choices.match_tokens(i).iter().all(|t| tokens.contains(t)));
    match (hits.next(), hits.next()) {
        (Some(i), None) => Some(i),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionPolicy {
    /// Minimum share of yes/no answers among all trials needed to decide.
    pub min_valid_fraction: f64,
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        Self {
            min_valid_fraction: 0.5,
        }
    }
}

impl DecisionPolicy {
    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.min_valid_fraction) {
            Ok(())
        } else {
            Err(Error::invalid("min_valid_fraction must lie in [0, 1]"))
        }
    }
}

/// One answered grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub variant: usize,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryTally {
    pub yes: usize,
    pub no: usize,
    pub invalid: usize,
}

impl BinaryTally {
    pub fn total(&self) -> usize {
        self.yes + self.no + self.invalid
    }

    pub fn add(&mut self, label: BinaryLabel) {
        match label {
            BinaryLabel::Yes => self.yes += 1,
            BinaryLabel::No => self.no += 1,
            BinaryLabel::Invalid => self.invalid += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryResult {
    pub decision: Decision,
    pub yes_ratio: f64,
    pub no_ratio: f64,
    pub invalid_ratio: f64,
    /// Absent for single-shot retrieval decisions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tally: Option<BinaryTally>,
    #[serde(skip)]
    pub trials: Vec<Trial>,
}

/// Applies the decision rule to a tally.
///
/// Undecided when valid answers fall below the policy fraction or yes and no
/// tie; otherwise the majority of valid answers.
pub fn decide_binary(tally: &BinaryTally, policy: &DecisionPolicy) -> Decision {
    let total = tally.total();
    let valid = tally.yes + tally.no;
    if total == 0 || (valid as f64) < policy.min_valid_fraction * total as f64 {
        return Decision::Undecided;
    }
    match tally.yes.cmp(&tally.no) {
        std::cmp::Ordering::Greater => Decision::Yes,
        std::cmp::Ordering::Less => Decision::No,
        std::cmp::Ordering::Equal => Decision::Undecided,
    }
}

pub fn aggregate_binary(labels: &[BinaryLabel], policy: &DecisionPolicy) -> Result<BinaryResult> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut tally = BinaryTally::default();
    labels.iter().for_each(|l| tally.add(*l));
    let n = tally.total() as f64;
    Ok(BinaryResult {
        decision: decide_binary(&tally, policy),
        yes_ratio: tally.yes as f64 / n,
        no_ratio: tally.no as f64 / n,
        invalid_ratio: tally.invalid as f64 / n,
        tally: Some(tally),
        trials: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceTally {
    pub per_choice: Vec<usize>,
    pub invalid: usize,
}

impl ChoiceTally {
    pub fn total(&self) -> usize {
        self.per_choice.iter().sum::<usize>() + self.invalid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceResult {
    pub choices: Vec<String>,
    pub per_choice_ratio: Vec<f64>,
    pub invalid_ratio: f64,
    pub selected: Option<usize>,
    pub selected_phrase: Option<String>,
    pub tally: ChoiceTally,
    #[serde(skip)]
    pub trials: Vec<Trial>,
}

/// Lowest index holding the maximum of `values`.
pub(crate) fn argmax_lowest<T: PartialOrd + Copy>(values: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.map_or(true, |b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn aggregate_choices(matches: &[Option<usize>], choices: &ChoiceSet) -> Result<ChoiceResult> {
    if matches.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut tally = ChoiceTally {
        per_choice: vec![0; choices.len()],
        invalid: 0,
    };
    for m in matches {
        match m {
            Some(i) if *i < choices.len() => tally.per_choice[*i] += 1,
            Some(i) => return Err(Error::invalid(format!("choice index {i} out of range"))),
            None => tally.invalid += 1,
        }
    }
    let n = matches.len() as f64;
    let selected = if tally.per_choice.iter().any(|&c| c > 0) {
        argmax_lowest(&tally.per_choice)
    } else {
        None
    };
    Ok(ChoiceResult {
        choices: choices.phrases().to_vec(),
        per_choice_ratio: tally.per_choice.iter().map(|&c| c as f64 / n).collect(),
        invalid_ratio: tally.invalid as f64 / n,
        selected,
        selected_phrase: selected.map(|i| choices.phrase(i).to_string()),
        tally,
        trials: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeformResult {
    pub answer: String,
    pub support: usize,
    pub total: usize,
    pub counts: BTreeMap<String, usize>,
    #[serde(skip)]
    pub trials: Vec<Trial>,
}

/// Most frequent normalized answer; ties go to the lexicographically smallest.
pub fn modal_answer<S: AsRef<str>>(answers: &[S]) -> Result<FreeformResult> {
    if answers.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts = BTreeMap::new();
    for a in answers {
        *counts.entry(normalized_string(a.as_ref())).or_insert(0usize) += 1;
    }
    // BTreeMap iterates in ascending key order, so the first maximum wins ties.
    let (answer, support) = counts
        .iter()
        .fold(None::<(&String, usize)>, |best, (k, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((k, c)),
        })
        .map(|(k, c)| (k.clone(), c))
        .expect("non-empty counts");
    Ok(FreeformResult {
        answer,
        support,
        total: answers.len(),
        counts,
        trials: Vec::new(),
    })
}
