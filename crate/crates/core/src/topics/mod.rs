//! Clustering opinion-unit vectors into topics.

mod hdbscan;
mod keywords;
mod merge;
mod model;
mod pca;
mod split;

use serde::{Deserialize, Serialize};

pub use hdbscan::{hdbscan, HdbscanParams};
pub use keywords::{tokenize, topic_keywords, Keyword};
pub use merge::{reduce_topics, MergeStep};
pub use model::{
    data_digest, fit_topic_model, model_header, representative_units, AssignedUnit, ModelHeader, PolarMerge, TopicModel,
    TopicModelConfig, TopicSummaries,
};
pub use pca::{reduce_dims, Reduction};
pub use split::{split_by_sentiment, split_score, unsplit_score, SplitCorpus, SplitUnit};

/// How topic and sentiment information are combined when clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// General-purpose embeddings.
    M1,
    /// Sentiment-aware embeddings (same algorithm, different vectors).
    M2,
    /// Split by sentiment, then cluster each split separately.
    M3,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Method::M1),
            "m2" => Ok(Method::M2),
            "m3" => Ok(Method::M3),
            other => Err(format!("unknown method {other:?} (expected m1, m2 or m3)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Negative,
    Positive,
    Unsplit,
}

/// Per-unit topic labels, index-aligned with the unit list; −1 is an outlier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<i32>,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<i32>) -> Self {
        Self { labels }
    }

    /// One past the largest topic id.
    pub fn topic_count(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.topic_count()];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }

    pub fn members(&self, topic: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == topic as i32)
            .map(|(i, _)| i)
    }

    pub fn outlier_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }

    /// Share of units not assigned to any topic.
    pub fn outlier_rate(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.outlier_count() as f64 / self.labels.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: usize,
    pub size: usize,
    pub polarity: Polarity,
    pub keywords: Vec<String>,
    pub representative_units: Vec<String>,
    /// `"label: excerpt"` of each representative unit.
    pub representative_texts: Vec<String>,
    pub centroid: Vec<f64>,
}

impl Topic {
    /// Short display name built from the top keywords.
    pub fn name(&self) -> String {
        if self.keywords.is_empty() {
            format!("topic {}", self.topic_id)
        } else {
            self.keywords.iter().take(3).cloned().collect::<Vec<_>>().join(", ")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outlier_rates() {
        assert_eq!(ClusterAssignment::new(vec![0, 1, 0]).outlier_rate(), 0.0);
        assert_eq!(ClusterAssignment::new(vec![-1, -1]).outlier_rate(), 1.0);
        let mut labels = vec![0; 100];
        labels[..17].fill(-1);
        assert!((ClusterAssignment::new(labels).outlier_rate() - 0.17).abs() < 1e-15);
    }

    #[test]
    fn sizes_and_members() {
        let a = ClusterAssignment::new(vec![1, -1, 0, 1]);
        assert_eq!(a.topic_count(), 2);
        assert_eq!(a.sizes(), [1, 2]);
        assert_eq!(a.members(1).collect::<Vec<_>>(), [0, 3]);
        assert_eq!(ClusterAssignment::new(vec![-1]).topic_count(), 0);
    }
}
