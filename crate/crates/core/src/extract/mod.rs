//! The five extraction methods: binary VQA, multiple-choice VQA, image-text
//! retrieval, visual grounding and caption difference.
//!
//! VQA-based methods query the full [`QueryGrid`](crate::variation::QueryGrid)
//! and aggregate. Any backend error aborts the run and discards the partial
//! tallies.

mod answer;
mod retrieval;
mod similarity;

pub use answer::{
    aggregate_binary, aggregate_choices, classify_binary_answer, classify_binary_answer_with,
    decide_binary, match_answer, modal_answer, AnswerAliases, BinaryLabel, BinaryResult,
    BinaryTally, ChoiceResult, ChoiceSet, ChoiceTally, Decision, DecisionPolicy, FreeformResult,
    Trial, STOP_ARTICLES,
};
pub use retrieval::{softmax, ChoiceDistribution};
pub use similarity::{cosine_similarity, DicResult};

use crate::backend::{Gateway, GroundingBox};
use crate::error::Result;
use crate::image::ImageBuffer;
use crate::variation::{make_query_grid, rgb_shift, NoiseConfig, QuestionTemplate};

pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_DIC_THRESHOLD: f64 = 0.8;

/// Copies the region `bbox` out of `image`.
pub fn crop(image: &ImageBuffer, bbox: &GroundingBox) -> Result<ImageBuffer> {
    bbox.check_within(image.width(), image.height())?;
    Ok(image.sub_image(bbox.x_min, bbox.y_min, bbox.x_max, bbox.y_max))
}

/// Runs extraction methods against one gateway with shared settings.
#[derive(Debug, Clone)]
pub struct Extractor {
    gateway: Gateway,
    noise: NoiseConfig,
    policy: DecisionPolicy,
    aliases: AnswerAliases,
    temperature: f64,
    workers: usize,
}

impl Extractor {
    pub fn new(gateway: Gateway) -> Self {
        Self {
            gateway,
            noise: NoiseConfig::default(),
            policy: DecisionPolicy::default(),
            aliases: AnswerAliases::default(),
            temperature: DEFAULT_TEMPERATURE,
            workers: 1,
        }
    }

    pub fn with_noise(mut self, noise: NoiseConfig) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_policy(mut self, policy: DecisionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_aliases(mut self, aliases: AnswerAliases) -> Self {
        self.aliases = aliases;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    /// Number of threads issuing grid queries. Results do not depend on it.
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Asks every question variant about every noise variant, in grid order.
    pub fn ask_grid(&self, image: &ImageBuffer, template: &QuestionTemplate) -> Result<Vec<Trial>> {
        let grid = make_query_grid(image, template, &self.noise)?;
        let ask = |i: usize| -> Result<Trial> {
            let (img, question) = grid.pair(i);
            Ok(Trial {
                variant: grid.pairs[i].0,
                question: question.to_string(),
                answer: self.gateway.vqa_answer(img, question)?,
            })
        };
        let n = grid.len();
        if self.workers == 1 || n < 2 {
            return (0..n).map(ask).collect();
        }
        let workers = self.workers.min(n);
        let mut slots: Vec<Option<Result<Trial>>> = (0..n).map(|_| None).collect();
        std::thread::scope(|s| {
            let ask = &ask;
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    s.spawn(move || {
                        (w..n)
                            .step_by(workers)
                            .map(|i| (i, ask(i)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("grid worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every grid cell answered"))
            .collect()
    }

    /// Binary VQA over the query grid.
    pub fn run_bvqa(&self, image: &ImageBuffer, template: &QuestionTemplate) -> Result<BinaryResult> {
        self.policy.validate()?;
        let trials = self.ask_grid(image, template)?;
        let labels: Vec<BinaryLabel> = trials
            .iter()
            .map(|t| classify_binary_answer_with(&t.answer, &self.aliases))
            .collect();
        let mut result = aggregate_binary(&labels, &self.policy)?;
        result.trials = trials;
        Ok(result)
    }

    /// Multiple-choice VQA: each grid answer is matched against `choices`.
    pub fn run_mvqa(
        &self,
        image: &ImageBuffer,
        template: &QuestionTemplate,
        choices: &ChoiceSet,
    ) -> Result<ChoiceResult> {
        let trials = self.ask_grid(image, template)?;
        let matches: Vec<Option<usize>> = trials.iter().map(|t| match_answer(&t.answer, choices)).collect();
        let mut result = aggregate_choices(&matches, choices)?;
        result.trials = trials;
        Ok(result)
    }

    /// Grid VQA without a choice set; returns the modal normalized answer.
    pub fn run_mvqa_freeform(&self, image: &ImageBuffer, template: &QuestionTemplate) -> Result<FreeformResult> {
        let trials = self.ask_grid(image, template)?;
        let answers: Vec<&str> = trials.iter().map(|t| t.answer.as_str()).collect();
        let mut result = modal_answer(&answers)?;
        result.trials = trials;
        Ok(result)
    }

    /// Single-shot image-text retrieval over `choices`.
    pub fn run_itr(&self, image: &ImageBuffer, choices: &ChoiceSet) -> Result<ChoiceDistribution> {
        let scores = self.gateway.itr_scores(image, choices.phrases())?;
        ChoiceDistribution::from_scores(choices.phrases(), scores, self.temperature)
    }

    /// Retrieval averaged over the noise variants of `image`.
    pub fn run_itr_ensemble(&self, image: &ImageBuffer, choices: &ChoiceSet) -> Result<ChoiceDistribution> {
        let parts = (0..self.noise.n_variants)
            .map(|i| self.run_itr(&rgb_shift(image, &self.noise, i)?, choices))
            .collect::<Result<Vec<_>>>()?;
        ChoiceDistribution::mean(&parts)
    }

    /// The single best region for `phrase`.
    pub fn run_vg(&self, image: &ImageBuffer, phrase: &str) -> Result<GroundingBox> {
        self.gateway.ground_phrase(image, phrase)
    }

    /// Captions both images and compares the caption embeddings.
    pub fn run_dic(&self, image_a: &ImageBuffer, image_b: &ImageBuffer, threshold: f64) -> Result<DicResult> {
        similarity::check_threshold(threshold)?;
        let caption_a = self.gateway.caption_image(image_a)?;
        let caption_b = self.gateway.caption_image(image_b)?;
        let ea = self.gateway.embed_text(&caption_a)?;
        let eb = self.gateway.embed_text(&caption_b)?;
        let sim = cosine_similarity(&ea, &eb)?;
        Ok(DicResult::new(caption_a, caption_b, sim, threshold))
    }
}

pub(crate) fn check_threshold(threshold: f64) -> Result<()> {
    similarity::check_threshold(threshold)
}
