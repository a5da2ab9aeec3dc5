use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::Review;
use crate::topics::{split_score, Polarity, TopicModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Mean sentiment of the review's units in the topic, 0 if none.
    WithSentiment,
    /// 1 if the review mentions the topic, else 0.
    WithoutSentiment,
}

/// One unit's contribution to a review's features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mention<'a> {
    pub review_id: &'a str,
    /// Topic id; negative values are outliers and are ignored.
    pub topic: i32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub mode: FeatureMode,
    pub review_ids: Vec<String>,
    /// Topic id of each column.
    pub topic_ids: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl FeatureMatrix {
    /// One row per review in input order, one column per topic `0..topic_count`.
    pub fn build<'a>(
        reviews: &[Review],
        topic_count: usize,
        mentions: impl IntoIterator<Item = Mention<'a>>,
        mode: FeatureMode,
    ) -> Result<Self> {
        if reviews.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let row_of: HashMap<&str, usize> = reviews
            .iter()
            .enumerate()
            .map(|(i, r)| (r.review_id.as_str(), i))
            .collect();
        let mut sums = vec![vec![0.0; topic_count]; reviews.len()];
        let mut counts = vec![vec![0u32; topic_count]; reviews.len()];
        for m in mentions {
            if m.topic < 0 {
                continue;
            }
            let topic = m.topic as usize;
            if topic >= topic_count {
                return Err(Error::invalid(
                    "feature input",
                    format!("topic {topic} out of range for {topic_count} topics"),
                ));
            }
            let row = *row_of.get(m.review_id).ok_or_else(|| {
                Error::invalid("feature input", format!("unit refers to unknown review {}", m.review_id))
            })?;
            sums[row][topic] += m.score;
            counts[row][topic] += 1;
        }
        let rows = sums
            .into_iter()
            .zip(counts)
            .map(|(s, c)| {
                s.into_iter()
                    .zip(c)
                    .map(|(sum, n)| match (n, mode) {
                        (0, _) => 0.0,
                        (_, FeatureMode::WithoutSentiment) => 1.0,
                        (n, FeatureMode::WithSentiment) => sum / n as f64,
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            mode,
            review_ids: reviews.iter().map(|r| r.review_id.clone()).collect(),
            topic_ids: (0..topic_count).collect(),
            rows,
            target: reviews.iter().map(|r| f64::from(r.stars)).collect(),
        })
    }

    /// Replaces the star-rating target, e.g. with a continuous latent rating.
    pub fn with_target(mut self, target: Vec<f64>) -> Result<Self> {
        if target.len() != self.rows.len() {
            return Err(Error::invalid(
                "feature target",
                format!("{} values for {} rows", target.len(), self.rows.len()),
            ));
        }
        self.target = target;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.topic_ids.len()
    }
}

/// Features for every review against a fitted topic model. Under sentiment
/// splitting each unit contributes its 1–5 split-scale score.
pub fn build_features(reviews: &[Review], model: &TopicModel, mode: FeatureMode) -> Result<FeatureMatrix> {
    let topics = model.topics();
    let mentions = model.units.iter().map(|u| {
        let score = match usize::try_from(u.topic).ok().map(|t| topics[t].polarity) {
            Some(Polarity::Negative | Polarity::Positive) => f64::from(split_score(u.sentiment).1),
            _ => f64::from(u.sentiment),
        };
        Mention {
            review_id: &u.review_id,
            topic: u.topic,
            score,
        }
    });
    FeatureMatrix::build(reviews, topics.len(), mentions, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn review(id: &str, stars: u8) -> Review {
        Review {
            review_id: id.into(),
            text: "x".into(),
            stars,
            tags: Default::default(),
        }
    }

    fn m(review_id: &str, topic: i32, score: f64) -> Mention<'_> {
        Mention { review_id, topic, score }
    }

    #[test]
    fn averages_and_zero_fill() {
        let reviews = [review("a", 4), review("b", 2)];
        let mentions = [m("a", 0, 8.0), m("a", 0, 4.0), m("b", 1, 3.0), m("b", -1, 9.0)];
        let fm = FeatureMatrix::build(&reviews, 2, mentions, FeatureMode::WithSentiment).unwrap();
        assert_eq!(fm.rows, [[6.0, 0.0], [0.0, 3.0]]);
        assert_eq!(fm.target, [4.0, 2.0]);
        let ind = FeatureMatrix::build(&reviews, 2, mentions, FeatureMode::WithoutSentiment).unwrap();
        assert_eq!(ind.rows, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn all_outlier_review_is_zero_row() {
        let reviews = [review("a", 3)];
        let fm = FeatureMatrix::build(&reviews, 3, [m("a", -1, 7.0)], FeatureMode::WithSentiment).unwrap();
        assert_eq!(fm.rows, [[0.0; 3]]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            FeatureMatrix::build(&[], 1, [], FeatureMode::WithSentiment),
            Err(Error::EmptyCorpus)
        ));
        let reviews = [review("a", 3)];
        assert!(FeatureMatrix::build(&reviews, 1, [m("zz", 0, 1.0)], FeatureMode::WithSentiment).is_err());
        assert!(FeatureMatrix::build(&reviews, 1, [m("a", 1, 1.0)], FeatureMode::WithSentiment).is_err());
        let fm = FeatureMatrix::build(&reviews, 1, [], FeatureMode::WithSentiment).unwrap();
        assert!(fm.clone().with_target(vec![1.0, 2.0]).is_err());
        assert_eq!(fm.with_target(vec![2.5]).unwrap().target, [2.5]);
    }
}
