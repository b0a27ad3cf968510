use serde::{Deserialize, Serialize};

use crate::backend::GroundingBox;
use crate::error::{Error, Result};
use crate::extract::{BinaryResult, ChoiceDistribution, ChoiceResult, ChoiceSet, Decision, FreeformResult};
use crate::variation::QuestionTemplate;

use super::relation::RelationResult;

pub const OBJECT_CLASS_TEMPLATE: &str = "what object is included in {art} image?";
pub const RELATION_TEMPLATE: &str = "what is the relative relationship between {art} {a} and the {b}?";

/// Question used for a feature query when the task does not supply one.
pub fn feature_template(attribute: &str) -> String {
    match attribute.trim().to_lowercase().as_str() {
        "size" => "how big is {art} object?".to_string(),
        a => format!("what {a} is {{art}} object?"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bvqa,
    Mvqa,
    Itr,
    Vg,
}

impl Method {
    fn vg() -> Self {
        Method::Vg
    }

    fn mvqa() -> Self {
        Method::Mvqa
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ObjectClass,
    Feature,
    Location,
    StateBinary,
    StateCharacter,
    Affordance,
    Relation,
}

/// A recognition query. Which methods are legal depends on the kind; see [`RecognitionTask::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RecognitionTask {
    ObjectClass {
        method: Method,
        choices: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        template: Option<String>,
    },
    Feature {
        attribute: String,
        method: Method,
        choices: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        template: Option<String>,
    },
    Location {
        #[serde(default = "Method::vg")]
        method: Method,
        phrase: String,
    },
    /// BVQA needs `template`; ITR needs exactly two `choices`, positive first.
    StateBinary {
        method: Method,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        template: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        choices: Option<Vec<String>>,
    },
    StateCharacter {
        #[serde(default = "Method::mvqa")]
        method: Method,
        template: String,
    },
    Affordance {
        #[serde(default = "Method::vg")]
        method: Method,
        object: String,
        part: String,
    },
    Relation {
        #[serde(default = "Method::mvqa")]
        method: Method,
        object_a: String,
        object_b: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        template: Option<String>,
    },
}

impl RecognitionTask {
    pub fn kind(&self) -> TaskKind {
        match self {
            RecognitionTask::ObjectClass { .. } => TaskKind::ObjectClass,
            RecognitionTask::Feature { .. } => TaskKind::Feature,
            RecognitionTask::Location { .. } => TaskKind::Location,
            RecognitionTask::StateBinary { .. } => TaskKind::StateBinary,
            RecognitionTask::StateCharacter { .. } => TaskKind::StateCharacter,
            RecognitionTask::Affordance { .. } => TaskKind::Affordance,
            RecognitionTask::Relation { .. } => TaskKind::Relation,
        }
    }

    pub fn method(&self) -> Method {
        match self {
            RecognitionTask::ObjectClass { method, .. }
            | RecognitionTask::Feature { method, .. }
            | RecognitionTask::Location { method, .. }
            | RecognitionTask::StateBinary { method, .. }
            | RecognitionTask::StateCharacter { method, .. }
            | RecognitionTask::Affordance { method, .. }
            | RecognitionTask::Relation { method, .. } => *method,
        }
    }

    pub fn object_class(method: Method, choices: &[&str]) -> Self {
        RecognitionTask::ObjectClass {
            method,
            choices: choices.iter().map(|c| c.to_string()).collect(),
            template: None,
        }
    }

    pub fn location(phrase: &str) -> Self {
        RecognitionTask::Location {
            method: Method::Vg,
            phrase: phrase.to_string(),
        }
    }

    pub fn mvqa_choice(template: &str, choices: &[&str]) -> Self {
        RecognitionTask::ObjectClass {
            method: Method::Mvqa,
            choices: choices.iter().map(|c| c.to_string()).collect(),
            template: Some(template.to_string()),
        }
    }

    pub fn state_question(template: &str) -> Self {
        RecognitionTask::StateBinary {
            method: Method::Bvqa,
            template: Some(template.to_string()),
            choices: None,
        }
    }

    pub fn state_pair(positive: &str, negative: &str) -> Self {
        RecognitionTask::StateBinary {
            method: Method::Itr,
            template: None,
            choices: Some(vec![positive.to_string(), negative.to_string()]),
        }
    }

    /// Grounding tasks produce a region and may precede other steps in a refinement chain.
    pub fn is_grounding(&self) -> bool {
        self.method() == Method::Vg
    }

    /// Checks that the method is legal for the kind and that the payload is well formed.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind();
        let method = self.method();
        let allowed: &[Method] = match kind {
            TaskKind::ObjectClass | TaskKind::Feature => &[Method::Mvqa, Method::Itr],
            TaskKind::Location | TaskKind::Affordance => &[Method::Vg],
            TaskKind::StateBinary => &[Method::Bvqa, Method::Itr],
            TaskKind::StateCharacter | TaskKind::Relation => &[Method::Mvqa],
        };
        if !allowed.contains(&method) {
            return Err(Error::invalid(format!("method {method:?} is not legal for {kind:?} tasks")));
        }
        let template = |t: &str| QuestionTemplate::new(t).map(|_| ());
        let nonempty = |field: &str, v: &str| {
            if v.trim().is_empty() {
                Err(Error::invalid(format!("`{field}` must not be empty")))
            } else {
                Ok(())
            }
        };
        match self {
            RecognitionTask::ObjectClass { choices, template: t, .. } => {
                ChoiceSet::new(choices)?;
                t.as_deref().map_or(Ok(()), template)
            }
            RecognitionTask::Feature {
                attribute,
                choices,
                template: t,
                ..
            } => {
                nonempty("attribute", attribute)?;
                ChoiceSet::new(choices)?;
                template(t.as_deref().unwrap_or(&feature_template(attribute)))
            }
            RecognitionTask::Location { phrase, .. } => nonempty("phrase", phrase),
            RecognitionTask::StateBinary {
                method,
                template: t,
                choices,
            } => match method {
                Method::Bvqa => template(
                    t.as_deref()
                        .ok_or_else(|| Error::invalid("BVQA state tasks need a `template`"))?,
                ),
                _ => match choices {
                    Some(c) if c.len() == 2 => ChoiceSet::new(c).map(|_| ()),
                    _ => Err(Error::invalid(
                        "ITR state tasks need exactly two `choices`, positive first",
                    )),
                },
            },
            RecognitionTask::StateCharacter { template: t, .. } => template(t),
            RecognitionTask::Affordance { object, part, .. } => {
                nonempty("object", object)?;
                nonempty("part", part)
            }
            RecognitionTask::Relation {
                object_a,
                object_b,
                template: t,
                ..
            } => {
                nonempty("object_a", object_a)?;
                nonempty("object_b", object_b)?;
                template(&relation_question(t.as_deref(), object_a, object_b))
            }
        }
    }
}

pub(crate) fn relation_question(template: Option<&str>, a: &str, b: &str) -> String {
    template
        .unwrap_or(RELATION_TEMPLATE)
        .replace("{a}", a)
        .replace("{b}", b)
}

/// Result of one recognition task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    Choice(ChoiceResult),
    Distribution(ChoiceDistribution),
    Binary(BinaryResult),
    Region(GroundingBox),
    Text(FreeformResult),
    Relation(RelationResult),
}

impl Outcome {
    pub fn region(&self) -> Option<&GroundingBox> {
        match self {
            Outcome::Region(b) => Some(b),
            _ => None,
        }
    }

    /// Label the outcome settles on, if any.
    pub fn label(&self) -> Option<String> {
        match self {
            Outcome::Choice(c) => c.selected_phrase.clone(),
            Outcome::Distribution(d) => Some(d.selected_phrase.clone()),
            Outcome::Binary(b) => match b.decision {
                Decision::Yes => Some("yes".into()),
                Decision::No => Some("no".into()),
                Decision::Undecided => None,
            },
            Outcome::Region(b) => Some(b.source_phrase.clone()),
            Outcome::Text(t) => Some(t.answer.clone()),
            Outcome::Relation(r) => r.relation.clone(),
        }
    }

    /// Share of the evidence supporting `expected`: the choice ratio for
    /// multiple-choice VQA, the probability for retrieval, the yes or no ratio
    /// for binary results and the modal share for free-form answers.
    pub fn correct_rate(&self, expected: &str) -> Option<f64> {
        let key = crate::text::normalized_string(expected);
        let pos = |choices: &[String]| {
            choices
                .iter()
                .position(|c| crate::text::normalized_string(c) == key)
        };
        match self {
            Outcome::Choice(c) => pos(&c.choices).map(|i| c.per_choice_ratio[i]),
            Outcome::Distribution(d) => pos(&d.choices).map(|i| d.probabilities[i]),
            Outcome::Binary(b) => match key.as_str() {
                "yes" => Some(b.yes_ratio),
                "no" => Some(b.no_ratio),
                _ => None,
            },
            Outcome::Text(t) => Some(t.counts.get(&key).copied().unwrap_or(0) as f64 / t.total as f64),
            Outcome::Relation(r) => {
                Some(r.counts.get(&key).copied().unwrap_or(0) as f64 / r.total as f64)
            }
            Outcome::Region(_) => None,
        }
    }
}
