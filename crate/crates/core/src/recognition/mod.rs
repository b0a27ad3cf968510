//! Recognition tasks composed from the extraction methods: object class,
//! features and location, binary and character states, affordances,
//! relations, plus stepwise refinement that grounds, crops and asks again.

mod relation;
mod task;

pub use relation::{aggregate_relations, RelationLexicon, RelationResult, DEFAULT_RELATIONS};
pub use task::{
    feature_template, Method, Outcome, RecognitionTask, TaskKind, OBJECT_CLASS_TEMPLATE,
    RELATION_TEMPLATE,
};

use serde::{Deserialize, Serialize};

use crate::backend::GroundingBox;
use crate::error::{Error, Result};
use crate::extract::{crop, BinaryResult, ChoiceSet, Decision, Extractor, FreeformResult};
use crate::image::ImageBuffer;
use crate::variation::{QuestionTemplate, DEFAULT_ARTICLES};

/// How a binary state is queried.
#[derive(Debug, Clone, PartialEq)]
pub enum StateQuery {
    /// Yes/no question answered over the query grid.
    Question(QuestionTemplate),
    /// Retrieval between a positive and a negative phrase.
    Pair(ChoiceSet),
}

#[derive(Debug, Clone)]
pub struct Recognizer {
    extractor: Extractor,
    articles: Vec<String>,
    lexicon: RelationLexicon,
}

impl Recognizer {
    pub fn new(extractor: Extractor) -> Self {
        Self {
            extractor,
            articles: DEFAULT_ARTICLES.iter().map(|a| a.to_string()).collect(),
            lexicon: RelationLexicon::default(),
        }
    }

    pub fn with_articles(mut self, articles: Vec<String>) -> Self {
        self.articles = articles;
        self
    }

    pub fn with_lexicon(mut self, lexicon: RelationLexicon) -> Self {
        self.lexicon = lexicon;
        self
    }

    pub fn extractor(&self) -> &Extractor {
        &self.extractor
    }

    pub fn template(&self, text: &str) -> Result<QuestionTemplate> {
        QuestionTemplate::with_articles(text, self.articles.iter().cloned())
    }

    fn choose(&self, image: &ImageBuffer, template: &str, choices: &ChoiceSet, method: Method) -> Result<Outcome> {
        match method {
            Method::Mvqa => Ok(Outcome::Choice(
                self.extractor.run_mvqa(image, &self.template(template)?, choices)?,
            )),
            Method::Itr => Ok(Outcome::Distribution(self.extractor.run_itr(image, choices)?)),
            m => Err(Error::invalid(format!("{m:?} cannot answer a multiple-choice query"))),
        }
    }

    pub fn recognize_object_class(&self, image: &ImageBuffer, choices: &ChoiceSet, method: Method) -> Result<Outcome> {
        self.choose(image, OBJECT_CLASS_TEMPLATE, choices, method)
    }

    pub fn recognize_feature(
        &self,
        image: &ImageBuffer,
        attribute: &str,
        choices: &ChoiceSet,
        method: Method,
    ) -> Result<Outcome> {
        self.choose(image, &feature_template(attribute), choices, method)
    }

    /// Phrase may name the class, shape or colour of the object.
    pub fn locate_object(&self, image: &ImageBuffer, phrase: &str) -> Result<GroundingBox> {
        self.extractor.run_vg(image, phrase)
    }

    /// For a retrieval pair the first phrase is "yes": probability above 0.5
    /// decides YES, below decides NO and exactly 0.5 stays undecided.
    pub fn recognize_state(&self, image: &ImageBuffer, query: &StateQuery) -> Result<BinaryResult> {
        match query {
            StateQuery::Question(t) => self.extractor.run_bvqa(image, t),
            StateQuery::Pair(choices) => {
                if choices.len() != 2 {
                    return Err(Error::invalid("state retrieval needs exactly two phrases"));
                }
                let d = self.extractor.run_itr(image, choices)?;
                let (p_yes, p_no) = (d.probabilities[0], d.probabilities[1]);
                let decision = if p_yes > 0.5 {
                    Decision::Yes
                } else if p_yes < 0.5 {
                    Decision::No
                } else {
                    Decision::Undecided
                };
                Ok(BinaryResult {
                    decision,
                    yes_ratio: p_yes,
                    no_ratio: p_no,
                    invalid_ratio: 0.0,
                    tally: None,
                    trials: Vec::new(),
                })
            }
        }
    }

    /// Reads characters (digits, labels) as the modal free-form answer.
    pub fn read_text(&self, image: &ImageBuffer, template: &QuestionTemplate) -> Result<FreeformResult> {
        self.extractor.run_mvqa_freeform(image, template)
    }

    pub fn recognize_affordance(&self, image: &ImageBuffer, object: &str, part: &str) -> Result<GroundingBox> {
        self.extractor.run_vg(image, &format!("{part} of the {object}"))
    }

    pub fn recognize_relation(&self, image: &ImageBuffer, object_a: &str, object_b: &str) -> Result<RelationResult> {
        self.relation_with(image, object_a, object_b, None)
    }

    fn relation_with(
        &self,
        image: &ImageBuffer,
        object_a: &str,
        object_b: &str,
        template: Option<&str>,
    ) -> Result<RelationResult> {
        let question = task::relation_question(template, object_a, object_b);
        let trials = self.extractor.ask_grid(image, &self.template(&question)?)?;
        let answers: Vec<&str> = trials.iter().map(|t| t.answer.as_str()).collect();
        let mut result = aggregate_relations(&answers, &self.lexicon)?;
        result.trials = trials;
        Ok(result)
    }

    pub fn run_task(&self, image: &ImageBuffer, task: &RecognitionTask) -> Result<Outcome> {
        task.validate()?;
        match task {
            RecognitionTask::ObjectClass {
                method,
                choices,
                template,
            } => self.choose(
                image,
                template.as_deref().unwrap_or(OBJECT_CLASS_TEMPLATE),
                &ChoiceSet::new(choices)?,
                *method,
            ),
            RecognitionTask::Feature {
                attribute,
                method,
                choices,
                template,
            } => {
                let t = template.clone().unwrap_or_else(|| feature_template(attribute));
                self.choose(image, &t, &ChoiceSet::new(choices)?, *method)
            }
            RecognitionTask::Location { phrase, .. } => {
                Ok(Outcome::Region(self.locate_object(image, phrase)?))
            }
            RecognitionTask::StateBinary {
                method,
                template,
                choices,
            } => {
                let query = match method {
                    Method::Bvqa => StateQuery::Question(self.template(template.as_deref().unwrap_or_default())?),
                    _ => StateQuery::Pair(ChoiceSet::new(choices.as_deref().unwrap_or_default())?),
                };
                Ok(Outcome::Binary(self.recognize_state(image, &query)?))
            }
            RecognitionTask::StateCharacter { template, .. } => {
                Ok(Outcome::Text(self.read_text(image, &self.template(template)?)?))
            }
            RecognitionTask::Affordance { object, part, .. } => {
                Ok(Outcome::Region(self.recognize_affordance(image, object, part)?))
            }
            RecognitionTask::Relation {
                object_a,
                object_b,
                template,
                ..
            } => Ok(Outcome::Relation(self.relation_with(
                image,
                object_a,
                object_b,
                template.as_deref(),
            )?)),
        }
    }

    /// Runs the chain in order. Each grounding step crops the working image
    /// for the next step; boxes are reported both locally and in
    /// original-image coordinates. An empty grounding ends the chain and the
    /// result is marked incomplete.
    pub fn stepwise_refine(&self, image: &ImageBuffer, chain: &RefinementChain) -> Result<RefinementResult> {
        chain.validate()?;
        let mut working = image.clone();
        let (mut dx, mut dy) = (0, 0);
        let mut steps = Vec::with_capacity(chain.steps.len());
        let mut box_chain = Vec::new();
        let last = chain.steps.len() - 1;
        for (i, task) in chain.steps.iter().enumerate() {
            let outcome = match self.run_task(&working, task) {
                Ok(o) => o,
                Err(Error::GroundingEmpty(phrase)) => {
                    return Ok(RefinementResult {
                        steps,
                        box_chain,
                        complete: false,
                        error: Some(format!("step {i}: no region found for `{phrase}`")),
                    })
                }
                Err(e) => return Err(e),
            };
            let mut global_box = None;
            if let Some(local) = outcome.region() {
                let global = local.offset(dx, dy);
                box_chain.push(global.clone());
                global_box = Some(global);
                if i < last {
                    working = crop(&working, local)?;
                    dx += local.x_min;
                    dy += local.y_min;
                }
            }
            steps.push(StepOutcome {
                index: i,
                outcome,
                global_box,
            });
        }
        Ok(RefinementResult {
            steps,
            box_chain,
            complete: true,
            error: None,
        })
    }
}

/// Ordered recognition steps; every step but the last must be a grounding step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementChain {
    pub steps: Vec<RecognitionTask>,
}

impl RefinementChain {
    pub fn new(steps: Vec<RecognitionTask>) -> Result<Self> {
        let chain = Self { steps };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        let (last, rest) = self
            .steps
            .split_last()
            .ok_or_else(|| Error::invalid("a refinement chain needs at least one step"))?;
        if let Some(i) = rest.iter().position(|s| !s.is_grounding()) {
            return Err(Error::invalid(format!(
                "step {i} is not a grounding step and cannot precede other steps"
            )));
        }
        rest.iter().try_for_each(RecognitionTask::validate)?;
        last.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub index: usize,
    pub outcome: Outcome,
    /// For grounding steps, the box in original-image coordinates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global_box: Option<GroundingBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementResult {
    pub steps: Vec<StepOutcome>,
    /// Grounded boxes, outermost first, in original-image coordinates.
    pub box_chain: Vec<GroundingBox>,
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewpointStats {
    pub rates: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation (divisor N).
    pub std: f64,
}

pub fn viewpoint_stats(rates: &[f64]) -> Result<ViewpointStats> {
    if rates.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::invalid(format!("correct rate {r} outside [0, 1]")));
    }
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok(ViewpointStats {
        rates: rates.to_vec(),
        mean,
        std: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn viewpoint_examples() {
        let s = viewpoint_stats(&[1.0; 5]).unwrap();
        assert_eq!((s.mean, s.std), (1.0, 0.0));
        let s = viewpoint_stats(&[1.0, 0.0]).unwrap();
        assert_eq!((s.mean, s.std), (0.5, 0.5));
        let s = viewpoint_stats(&[0.8]).unwrap();
        assert_eq!((s.mean, s.std), (0.8, 0.0));
        assert!(matches!(viewpoint_stats(&[]), Err(Error::EmptyInput)));
        assert!(viewpoint_stats(&[1.2]).is_err());
    }

    #[test]
    fn chain_shape_rules() {
        let vg = RecognitionTask::location("the tv");
        let ask = RecognitionTask::mvqa_choice("what is shown on {art} screen?", &["mountain", "sea"]);
        assert!(RefinementChain::new(vec![vg.clone(), ask.clone()]).is_ok());
        assert!(RefinementChain::new(vec![ask.clone()]).is_ok());
        assert!(RefinementChain::new(vec![vg.clone(), vg.clone()]).is_ok());
        assert!(RefinementChain::new(vec![ask.clone(), vg]).is_err());
        assert!(RefinementChain::new(vec![]).is_err());
    }
}
