use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::Trial;
use crate::text::{find_subsequence, normalize_answer};

pub const DEFAULT_RELATIONS: [&str; 5] = ["on top of", "in front of", "next to", "under", "on"];

/// Spatial phrases searched longest-first, so "on top of" wins over "on".
#[derive(Debug, Clone, PartialEq)]
pub struct RelationLexicon {
    phrases: Vec<(String, Vec<String>)>,
}

impl Default for RelationLexicon {
    fn default() -> Self {
        Self::new(DEFAULT_RELATIONS).expect("default lexicon is valid")
    }
}

impl RelationLexicon {
    /// Orders phrases by descending token count, keeping input order among equals.
    pub fn new<S: AsRef<str>>(phrases: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for p in phrases {
            let tokens = normalize_answer(p.as_ref());
            if tokens.is_empty() {
                return Err(Error::invalid("relation phrases must not be empty"));
            }
            let key = tokens.join(" ");
            if !seen.insert(key.clone()) {
                return Err(Error::invalid(format!("duplicate relation phrase `{key}`")));
            }
            out.push((key, tokens));
        }
        if out.is_empty() {
            return Err(Error::invalid("relation lexicon must not be empty"));
        }
        out.sort_by(|a, b| b.1.len().cmp(&a.1.len()));
        Ok(Self { phrases: out })
    }

    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        self.phrases.iter().map(|(p, _)| p.as_str())
    }

    /// First lexicon phrase, in search order, occurring in the answer as whole words.
    pub fn find(&self, answer: &str) -> Option<&str> {
        let tokens = normalize_answer(answer);
        self.phrases
            .iter()
            .find(|(_, t)| find_subsequence(&tokens, t).is_some())
            .map(|(p, _)| p.as_str())
    }
}

impl Serialize for RelationLexicon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.phrases())
    }
}

impl<'de> Deserialize<'de> for RelationLexicon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        Self::new(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationResult {
    /// Modal relation; absent when nothing matched or two phrases tie.
    pub relation: Option<String>,
    pub counts: BTreeMap<String, usize>,
    pub unmatched: usize,
    pub total: usize,
    pub tie: bool,
    #[serde(skip)]
    pub trials: Vec<Trial>,
}

pub fn aggregate_relations<S: AsRef<str>>(answers: &[S], lexicon: &RelationLexicon) -> Result<RelationResult> {
    if answers.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts = BTreeMap::new();
    let mut unmatched = 0;
    for a in answers {
        match lexicon.find(a.as_ref()) {
            Some(p) => *counts.entry(p.to_string()).or_insert(0usize) += 1,
            None => unmatched += 1,
        }
    }
    let best = counts.values().copied().max().unwrap_or(0);
    let modal: Vec<&String> = counts.iter().filter(|(_, &c)| c == best).map(|(k, _)| k).collect();
    let tie = modal.len() > 1;
    let relation = match modal.as_slice() {
        [only] => Some((*only).clone()),
        _ => None,
    };
    Ok(RelationResult {
        relation,
        counts,
        unmatched,
        total: answers.len(),
        tie,
        trials: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_order_is_longest_first() {
        let lex = RelationLexicon::default();
        let order: Vec<&str> = lex.phrases().collect();
        assert_eq!(order, ["on top of", "in front of", "next to", "under", "on"]);
        let shuffled = RelationLexicon::new(["on", "under", "next to", "on top of"]).unwrap();
        assert_eq!(shuffled.phrases().next(), Some("on top of"));
    }

    #[test]
    fn longest_match_wins() {
        let lex = RelationLexicon::default();
        assert_eq!(lex.find("the mug is on top of the keyboard"), Some("on top of"));
        assert_eq!(lex.find("The mouse is next to the keyboard."), Some("next to"));
        assert_eq!(lex.find("it is on the desk"), Some("on"));
        assert_eq!(lex.find("one frontier"), None);
    }

    #[test]
    fn aggregation() {
        let lex = RelationLexicon::default();
        let r = aggregate_relations(
            &["next to", "the mouse is next to it", "on the desk", "no idea"],
            &lex,
        )
        .unwrap();
        assert_eq!(r.relation.as_deref(), Some("next to"));
        assert_eq!(r.unmatched, 1);
        let r = aggregate_relations(&["nothing", "at all"], &lex).unwrap();
        assert_eq!(r.relation, None);
        assert!(!r.tie);
        let r = aggregate_relations(&["under", "on"], &lex).unwrap();
        assert_eq!(r.relation, None);
        assert!(r.tie);
    }

    #[test]
    fn lexicon_validation() {
        assert!(RelationLexicon::new(["on", "On"]).is_err());
        assert!(RelationLexicon::new(["", "on"]).is_err());
        assert!(RelationLexicon::new(Vec::<String>::new()).is_err());
        let lex: RelationLexicon = serde_json::from_str(r#"["on","beside"]"#).unwrap();
        assert_eq!(lex.find("beside the lamp"), Some("beside"));
    }
}
