use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::embedding::{normalize, EmbeddingVector};
use crate::error::{Error, Result};
use crate::extraction::{OpinionUnit, Review};
use crate::regression::{FeatureMatrix, FeatureMode, Mention};
use crate::topics::{split_score, Polarity};

/// Mean and variance of a split-scale score drawn uniformly from 1..=5.
const SPLIT_MEAN: f64 = 3.0;
const SPLIT_VAR: f64 = 2.0;

const ASPECTS: [&str; 16] = [
    "service", "food", "price", "ambience", "parking", "cleanliness", "drinks", "dessert", "staff", "wait",
    "portions", "music", "location", "menu", "seating", "delivery",
];
const NEGATIVE_WORDS: [&str; 5] = ["terrible", "slow", "cold", "rude", "overpriced"];
const POSITIVE_WORDS: [&str; 5] = ["great", "friendly", "fresh", "quick", "lovely"];

/// How planted topics map onto embedding centroids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicLayout {
    /// Topics `2a` (negative) and `2a+1` (positive) describe the same aspect
    /// and share a centroid in the general vectors; only the
    /// sentiment-aware vectors tell them apart.
    PolarityPairs,
    /// Every topic has its own centroid in both vector sets.
    Distinct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub reviews: usize,
    /// Even topics are negative, odd topics positive.
    pub topics: usize,
    pub units_per_review: f64,
    pub dim: usize,
    /// Per-coordinate standard deviation of the Gaussian jitter around a centroid.
    pub jitter: f64,
    /// Standard deviation of the rating noise.
    pub noise: f64,
    /// Defaults to the value centring the expected latent rating on 3.
    pub intercept: Option<f64>,
    /// Per-topic coefficients on the split-scale mean score.
    pub betas: Option<Vec<f64>>,
    pub layout: TopicLayout,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            reviews: 5000,
            topics: 8,
            units_per_review: 5.65,
            dim: 32,
            jitter: 0.04,
            noise: 0.85,
            intercept: None,
            betas: None,
            layout: TopicLayout::PolarityPairs,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid("synthetic spec", msg.to_string()));
        if self.topics < 2 {
            return bad("need at least 2 topics");
        }
        if self.reviews == 0 {
            return bad("need at least one review");
        }
        if !(self.units_per_review >= 1.0) || !self.units_per_review.is_finite() {
            return bad("units_per_review must be at least 1");
        }
        if !(self.jitter >= 0.0 && self.noise >= 0.0) || !self.jitter.is_finite() || !self.noise.is_finite() {
            return bad("jitter and noise must be finite and non-negative");
        }
        if self.betas.as_ref().is_some_and(|b| b.len() != self.topics) {
            return bad("betas must have one entry per topic");
        }
        if self.topics > self.dim {
            return Err(Error::InfeasibleSeparation {
                topics: self.topics,
                dim: self.dim,
            });
        }
        Ok(())
    }

    pub fn polarity(topic: usize) -> Polarity {
        if topic % 2 == 0 {
            Polarity::Negative
        } else {
            Polarity::Positive
        }
    }

    fn aspect(&self, topic: usize) -> usize {
        match self.layout {
            TopicLayout::PolarityPairs => topic / 2,
            TopicLayout::Distinct => topic,
        }
    }

    pub fn planted_betas(&self) -> Vec<f64> {
        self.betas.clone().unwrap_or_else(|| {
            (0..self.topics)
                .map(|k| {
                    let step = 0.05 * ((k / 2) % 4) as f64;
                    match Self::polarity(k) {
                        Polarity::Negative => -(0.35 - step),
                        _ => 0.3 - step,
                    }
                })
                .collect()
        })
    }

    fn poisson_rate(&self) -> f64 {
        self.units_per_review - 1.0
    }

    pub fn planted_intercept(&self) -> f64 {
        self.intercept.unwrap_or_else(|| {
            let p = 1.0 / self.topics as f64;
            let mention = 1.0 - zero_count_probability(p, self.poisson_rate());
            3.0 - self.planted_betas().iter().map(|b| b * SPLIT_MEAN * mention).sum::<f64>()
        })
    }
}

/// `P(m = 0)` for a topic chosen with probability `p` per unit when the unit
/// count is `1 + Poisson(rate)`: `E[(1-p)^N] = (1-p)·exp(-rate·p)`.
fn zero_count_probability(p: f64, rate: f64) -> f64 {
    (1.0 - p) * (-rate * p).exp()
}

/// `E[1/m · 1{m>0}]` for `m ~ Binomial(N, p)`, `N = 1 + Poisson(rate)`.
fn expected_inverse_count(p: f64, rate: f64) -> f64 {
    let n_max = (rate + 12.0 * rate.sqrt() + 40.0).ceil() as usize;
    let mut total = 0.0;
    let mut poisson = (-rate).exp();
    for n in 1..=n_max {
        if n > 1 {
            poisson *= rate / (n - 1) as f64;
        }
        let mut binom = (1.0 - p).powi(n as i32);
        let mut inner = 0.0;
        for m in 1..=n {
            binom *= (n - m + 1) as f64 / m as f64 * p / (1.0 - p);
            inner += binom / m as f64;
        }
        total += poisson * inner;
    }
    total
}

/// Variance of the planted signal `Σ βk·s̄k` and the resulting population
/// R² against the noisy latent rating, for uniform topic choice.
pub fn analytic_r2(spec: &SyntheticSpec) -> (f64, f64) {
    let t = spec.topics;
    let p = 1.0 / t as f64;
    let rate = spec.poisson_rate();
    let p_zero = zero_count_probability(p, rate);
    let p_mention = 1.0 - p_zero;
    let p_both_zero = (1.0 - 2.0 * p) * (-rate * 2.0 * p).exp();
    let p_both = 1.0 - 2.0 * p_zero + p_both_zero;
    let var = SPLIT_VAR * expected_inverse_count(p, rate) + SPLIT_MEAN.powi(2) * p_mention * (1.0 - p_mention);
    let cov = SPLIT_MEAN.powi(2) * (p_both - p_mention * p_mention);
    let betas = spec.planted_betas();
    let mut signal = 0.0;
    for j in 0..t {
        for k in 0..t {
            signal += betas[j] * betas[k] * if j == k { var } else { cov };
        }
    }
    let noise = spec.noise * spec.noise;
    (signal, if signal + noise > 0.0 { signal / (signal + noise) } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SyntheticSpec,
    pub intercept: f64,
    pub betas: Vec<f64>,
    pub topic_polarity: Vec<Polarity>,
    pub topic_aspect: Vec<String>,
    pub signal_variance: f64,
    pub analytic_r2: f64,
    pub mean_units_per_review: f64,
    /// Planted topic of each unit, aligned with the unit list.
    pub unit_topics: Vec<usize>,
    /// Noisy continuous rating before rounding, aligned with the review list.
    pub latent_ratings: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub reviews: Vec<Review>,
    pub units: Vec<OpinionUnit>,
    /// Polarity-blind vectors (paired topics share a centroid).
    pub vectors: Vec<EmbeddingVector>,
    /// Sentiment-aware vectors (one centroid per topic).
    pub sentiment_vectors: Vec<EmbeddingVector>,
    pub truth: GroundTruth,
}

impl SyntheticCorpus {
    /// Features on the planted assignment, with split-scale scores and the
    /// latent rating as target.
    pub fn planted_features(&self, mode: FeatureMode) -> Result<FeatureMatrix> {
        let mentions = self.units.iter().zip(&self.truth.unit_topics).map(|(u, &t)| Mention {
            review_id: &u.review_id,
            topic: t as i32,
            score: f64::from(split_score(u.sentiment).1),
        });
        FeatureMatrix::build(&self.reviews, self.truth.betas.len(), mentions, mode)?
            .with_target(self.truth.latent_ratings.clone())
    }

    /// Writes reviews, units, both vector sets and the ground truth into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::jsonl::write(&dir.join("reviews.jsonl"), &self.reviews)?;
        crate::jsonl::write(&dir.join("units.jsonl"), &self.units)?;
        crate::jsonl::write(&dir.join("vectors.jsonl"), &self.vectors)?;
        crate::jsonl::write(&dir.join("sentiment_vectors.jsonl"), &self.sentiment_vectors)?;
        crate::jsonl::write_json(&dir.join("ground_truth.json"), &self.truth)
    }
}

fn orthonormal_basis(count: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

fn embed(centroid: &[f64], jitter: &[f64], unit_id: &str) -> EmbeddingVector {
    let mut values: Vec<f32> = centroid.iter().zip(jitter).map(|(c, j)| (c + j) as f32).collect();
    normalize(&mut values);
    EmbeddingVector {
        unit_id: unit_id.to_string(),
        values,
    }
}

/// Draws a planted corpus: unit counts `1 + Poisson(mean − 1)`, topics chosen
/// uniformly, sentiments uniform on 1–5 (negative topics) or 6–10 (positive),
/// and a latent rating `β0 + Σ βk·s̄k + ε` over split-scale topic means.
/// Stars are the latent rating clamped to 1–5 and rounded.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let basis = orthonormal_basis(spec.topics, spec.dim, &mut rng);
    let betas = spec.planted_betas();
    let intercept = spec.planted_intercept();
    let rate = spec.poisson_rate();
    let poisson = (rate > 0.0).then(|| Poisson::new(rate).expect("positive rate"));
    let jitter = Normal::new(0.0, spec.jitter).expect("validated jitter");
    let noise = Normal::new(0.0, spec.noise).expect("validated noise");
    let width = spec.reviews.to_string().len();

    let aspect_name = |a: usize| ASPECTS.get(a).map_or_else(|| format!("aspect{a}"), |s| s.to_string());
    let mut reviews = Vec::with_capacity(spec.reviews);
    let mut units = Vec::new();
    let mut vectors = Vec::new();
    let mut sentiment_vectors = Vec::new();
    let mut unit_topics = Vec::new();
    let mut latent_ratings = Vec::with_capacity(spec.reviews);

    for r in 0..spec.reviews {
        let review_id = format!("r{r:0width$}");
        let count = 1 + poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        let mut sums = vec![0.0; spec.topics];
        let mut counts = vec![0usize; spec.topics];
        let mut sentences = Vec::with_capacity(count);
        for i in 0..count {
            let topic = rng.random_range(0..spec.topics);
            let polarity = SyntheticSpec::polarity(topic);
            let sentiment: u8 = match polarity {
                Polarity::Negative => rng.random_range(1..=5),
                _ => rng.random_range(6..=10),
            };
            let aspect = aspect_name(spec.aspect(topic));
            let words = if polarity == Polarity::Negative { &NEGATIVE_WORDS } else { &POSITIVE_WORDS };
            let adjective = words[rng.random_range(0..words.len())];
            let excerpt = format!("the {aspect} was {adjective}");
            let unit_id = format!("{review_id}#{i}");
            let noise_vec: Vec<f64> = (0..spec.dim).map(|_| jitter.sample(&mut rng)).collect();
            vectors.push(embed(&basis[spec.aspect(topic)], &noise_vec, &unit_id));
            sentiment_vectors.push(embed(&basis[topic], &noise_vec, &unit_id));
            sums[topic] += f64::from(split_score(sentiment).1);
            counts[topic] += 1;
            sentences.push(format!("The {aspect} was {adjective}."));
            units.push(OpinionUnit {
                unit_id,
                review_id: review_id.clone(),
                label: aspect,
                excerpt,
                sentiment,
            });
            unit_topics.push(topic);
        }
        let signal = intercept
            + (0..spec.topics)
                .filter(|&k| counts[k] > 0)
                .map(|k| betas[k] * sums[k] / counts[k] as f64)
                .sum::<f64>();
        let latent = signal + noise.sample(&mut rng);
        latent_ratings.push(latent);
        reviews.push(Review {
            review_id,
            text: sentences.join(" "),
            stars: latent.clamp(1.0, 5.0).round() as u8,
            tags: Default::default(),
        });
    }

    let (signal_variance, r2) = analytic_r2(spec);
    let truth = GroundTruth {
        spec: spec.clone(),
        intercept,
        betas,
        topic_polarity: (0..spec.topics).map(SyntheticSpec::polarity).collect(),
        topic_aspect: (0..spec.topics).map(|k| aspect_name(spec.aspect(k))).collect(),
        signal_variance,
        analytic_r2: r2,
        mean_units_per_review: units.len() as f64 / spec.reviews as f64,
        unit_topics,
        latent_ratings,
    };
    Ok(SyntheticCorpus {
        reviews,
        units,
        vectors,
        sentiment_vectors,
        truth,
    })
}
