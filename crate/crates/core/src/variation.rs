//! Perturbed images and article-substituted questions for ensemble queries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

pub const ARTICLE_SLOT: &str = "{art}";
pub const DEFAULT_ARTICLES: [&str; 4] = ["a", "the", "this", "that"];
pub const DEFAULT_SEED: u64 = 17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub shift_low: f64,
    pub shift_high: f64,
    pub n_variants: usize,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            shift_low: -0.1,
            shift_high: 0.1,
            n_variants: 5,
            seed: DEFAULT_SEED,
        }
    }
}

impl NoiseConfig {
    pub fn zero(n_variants: usize) -> Self {
        Self {
            shift_low: 0.0,
            shift_high: 0.0,
            n_variants,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_variants(mut self, n: usize) -> Self {
        self.n_variants = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shift_low.is_finite() && self.shift_high.is_finite()) {
            return Err(Error::invalid("noise shift bounds must be finite"));
        }
        if self.shift_low > self.shift_high {
            return Err(Error::invalid(format!(
                "shift_low {} exceeds shift_high {}",
                self.shift_low, self.shift_high
            )));
        }
        if self.n_variants == 0 {
            return Err(Error::invalid("n_variants must be at least 1"));
        }
        Ok(())
    }

    /// Per-channel shifts of variant `index`, drawn from a generator seeded with `seed ^ index`.
    pub fn shifts(&self, index: usize) -> [f64; 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ index as u64);
        let mut draw = || rng.gen_range(self.shift_low..=self.shift_high);
        [draw(), draw(), draw()]
    }
}

/// Adds one scalar per channel to every pixel, clamping to `[0, 1]`.
pub fn apply_shift(image: &ImageBuffer, shifts: [f64; 3]) -> ImageBuffer {
    image.map_channels(|c, v| (f64::from(v) + shifts[c]).clamp(0.0, 1.0) as f32)
}

/// Noise variant `variant_index` of `image`.
pub fn rgb_shift(image: &ImageBuffer, config: &NoiseConfig, variant_index: usize) -> Result<ImageBuffer> {
    config.validate()?;
    if variant_index >= config.n_variants {
        return Err(Error::invalid(format!(
            "variant index {variant_index} out of range for {} variants",
            config.n_variants
        )));
    }
    let mut tag = image.tag().clone();
    tag.variant = Some(variant_index);
    Ok(apply_shift(image, config.shifts(variant_index)).with_tag(tag))
}

/// Question text with a single `{art}` slot and the articles to fill it with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionTemplate {
    template: String,
    articles: Vec<String>,
}

impl QuestionTemplate {
    pub fn new(template: &str) -> Result<Self> {
        Self::with_articles(template, DEFAULT_ARTICLES)
    }

    pub fn with_articles<S: Into<String>>(
        template: &str,
        articles: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let found = template.matches(ARTICLE_SLOT).count();
        if found != 1 {
            return Err(Error::MalformedTemplate {
                template: template.to_string(),
                found,
            });
        }
        let articles: Vec<String> = articles.into_iter().map(Into::into).collect();
        if articles.is_empty() {
            return Err(Error::invalid("article set must not be empty"));
        }
        Ok(Self {
            template: template.to_string(),
            articles,
        })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn articles(&self) -> &[String] {
        &self.articles
    }

    /// One question per article, in article order.
    pub fn variants(&self) -> Vec<String> {
        self.articles
            .iter()
            .map(|a| self.template.replacen(ARTICLE_SLOT, a, 1))
            .collect()
    }
}

/// Parses `template` with the given articles and returns its question variants.
pub fn article_variants(template: &str, articles: &[String]) -> Result<Vec<String>> {
    Ok(QuestionTemplate::with_articles(template, articles.iter().cloned())?.variants())
}

/// Every (noise image, question) combination, image-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGrid {
    pub images: Vec<ImageBuffer>,
    /// Per-channel shift applied to each image, index-aligned with `images`.
    pub shifts: Vec<[f64; 3]>,
    pub questions: Vec<String>,
    pub pairs: Vec<(usize, usize)>,
}

impl QueryGrid {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair(&self, i: usize) -> (&ImageBuffer, &str) {
        let (img, q) = self.pairs[i];
        (&self.images[img], &self.questions[q])
    }
}

pub fn make_query_grid(
    image: &ImageBuffer,
    template: &QuestionTemplate,
    noise: &NoiseConfig,
) -> Result<QueryGrid> {
    noise.validate()?;
    let images = (0..noise.n_variants)
        .map(|i| rgb_shift(image, noise, i))
        .collect::<Result<Vec<_>>>()?;
    let shifts = (0..noise.n_variants).map(|i| noise.shifts(i)).collect();
    let questions = template.variants();
    let pairs = (0..images.len())
        .flat_map(|i| (0..questions.len()).map(move |q| (i, q)))
        .collect();
    Ok(QueryGrid {
        images,
        shifts,
        questions,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(v: f32) -> ImageBuffer {
        ImageBuffer::filled(5, 4, [v, v, v]).unwrap()
    }

    #[test]
    fn zero_shift_is_identity() {
        let img = ImageBuffer::from_fn(7, 3, |x, y| [x as f32 / 7.0, y as f32 / 3.0, 0.25]).unwrap();
        let out = rgb_shift(&img, &NoiseConfig::zero(1), 0).unwrap();
        assert_eq!(out.data(), img.data());
    }

    #[test]
    fn forced_shift_arithmetic() {
        let out = apply_shift(&gray(0.5), [0.1, -0.1, 0.0]);
        for y in 0..4 {
            for x in 0..5 {
                let p = out.pixel(x, y);
                assert!((p[0] - 0.6).abs() < 1e-6);
                assert!((p[1] - 0.4).abs() < 1e-6);
                assert_eq!(p[2], 0.5);
            }
        }
    }

    #[test]
    fn saturated_channels_clamp() {
        let out = apply_shift(&gray(1.0), [0.05, 0.1, 0.001]);
        assert!(out.data().iter().all(|&v| v == 1.0));
        let out = apply_shift(&gray(0.0), [-0.05, -0.1, -0.001]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn variant_index_out_of_range() {
        assert!(rgb_shift(&gray(0.5), &NoiseConfig::default(), 5).is_err());
    }

    #[test]
    fn rejects_inverted_bounds_and_zero_variants() {
        let mut c = NoiseConfig::default();
        c.shift_low = 0.2;
        assert!(c.validate().is_err());
        assert!(NoiseConfig::default().with_variants(0).validate().is_err());
    }

    #[test]
    fn article_substitution() {
        let t = QuestionTemplate::new("is {art} door open?").unwrap();
        assert_eq!(
            t.variants(),
            vec![
                "is a door open?",
                "is the door open?",
                "is this door open?",
                "is that door open?"
            ]
        );
        assert_eq!(
            article_variants("is {art} door open?", &["the".to_string()]).unwrap(),
            vec!["is the door open?"]
        );
    }

    #[test]
    fn malformed_templates() {
        assert!(matches!(
            QuestionTemplate::new("is the door open?"),
            Err(Error::MalformedTemplate { found: 0, .. })
        ));
        assert!(matches!(
            QuestionTemplate::new("is {art} door next to {art} wall?"),
            Err(Error::MalformedTemplate { found: 2, .. })
        ));
    }

    #[test]
    fn default_grid_has_twenty_pairs_image_major() {
        let t = QuestionTemplate::new("is {art} door open?").unwrap();
        let g = make_query_grid(&gray(0.5), &t, &NoiseConfig::default()).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g.pairs[0], (0, 0));
        assert_eq!(g.pairs[3], (0, 3));
        assert_eq!(g.pairs[4], (1, 0));
        assert_eq!(g.images[2].tag().variant, Some(2));
    }

    #[test]
    fn degenerate_grid() {
        let img = gray(0.5);
        let t = QuestionTemplate::with_articles("is {art} door open?", ["the"]).unwrap();
        let noise = NoiseConfig::default().with_variants(1);
        let g = make_query_grid(&img, &t, &noise).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.images[0].data(), apply_shift(&img, noise.shifts(0)).data());
    }

    #[test]
    fn grid_is_deterministic_and_seed_sensitive() {
        let img = ImageBuffer::from_fn(6, 6, |x, y| [x as f32 / 6.0, 0.5, y as f32 / 6.0]).unwrap();
        let t = QuestionTemplate::new("is {art} cup full?").unwrap();
        let a = make_query_grid(&img, &t, &NoiseConfig::default()).unwrap();
        let b = make_query_grid(&img, &t, &NoiseConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = make_query_grid(&img, &t, &NoiseConfig::default().with_seed(18)).unwrap();
        assert_ne!(a.shifts, c.shifts);
    }
}
