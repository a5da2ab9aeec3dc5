use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    hdbscan, reduce_dims, reduce_topics, split_by_sentiment, topic_keywords, ClusterAssignment,
    HdbscanParams, MergeStep, Method, Polarity, Topic,
};
use crate::embedding::{cosine, EmbeddingVector};
use crate::error::{Error, Result};
use crate::extraction::OpinionUnit;
use crate::hash::{config_hash, sha256_hex, short_id};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicModelConfig {
    pub method: Method,
    /// Target topic count.
    #[serde(alias = "K")]
    pub k: usize,
    pub min_cluster_size: usize,
    /// Defaults to `min_cluster_size`.
    pub min_samples: Option<usize>,
    pub reduced_dim: usize,
    pub seed: u64,
    /// Topics per sentiment split under M3; defaults to `ceil(k / 2)`.
    pub topics_per_split: Option<usize>,
    pub keywords: usize,
    pub representatives: usize,
}

impl Default for TopicModelConfig {
    fn default() -> Self {
        Self {
            method: Method::M1,
            k: 20,
            min_cluster_size: 50,
            min_samples: None,
            reduced_dim: 5,
            seed: 0,
            topics_per_split: None,
            keywords: 10,
            representatives: 5,
        }
    }
}

impl TopicModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("topic model config", "k must be at least 1"));
        }
        if self.min_cluster_size < 2 {
            return Err(Error::invalid(
                "topic model config",
                "min_cluster_size must be at least 2",
            ));
        }
        if self.min_samples == Some(0) {
            return Err(Error::invalid("topic model config", "min_samples must be positive"));
        }
        if self.reduced_dim == 0 {
            return Err(Error::invalid("topic model config", "reduced_dim must be positive"));
        }
        if self.topics_per_split == Some(0) {
            return Err(Error::invalid(
                "topic model config",
                "topics_per_split must be positive",
            ));
        }
        Ok(())
    }

    fn hdbscan_params(&self) -> HdbscanParams {
        HdbscanParams {
            min_cluster_size: self.min_cluster_size,
            min_samples: self.min_samples.unwrap_or(self.min_cluster_size),
        }
    }

    fn split_k(&self) -> usize {
        self.topics_per_split.unwrap_or(self.k.div_ceil(2))
    }
}

/// A unit's placement in the model, with its original 1–10 sentiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedUnit {
    pub unit_id: String,
    pub review_id: String,
    pub topic: i32,
    pub sentiment: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub model_id: String,
    pub config_hash: String,
    pub data_digest: String,
    pub config: TopicModelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummaries {
    pub outlier_rate: f64,
    pub merge_log: Vec<PolarMerge>,
    pub degenerate_reduction: bool,
    pub topics: Vec<Topic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarMerge {
    pub polarity: Polarity,
    #[serde(flatten)]
    pub step: MergeStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub header: ModelHeader,
    pub units: Vec<AssignedUnit>,
    pub summaries: TopicSummaries,
}

impl TopicModel {
    pub fn id(&self) -> &str {
        &self.header.model_id
    }

    pub fn config(&self) -> &TopicModelConfig {
        &self.header.config
    }

    pub fn topics(&self) -> &[Topic] {
        &self.summaries.topics
    }

    pub fn assignment(&self) -> ClusterAssignment {
        ClusterAssignment::new(self.units.iter().map(|u| u.topic).collect())
    }

    pub fn polarity_of(&self, topic: usize) -> Polarity {
        self.summaries.topics[topic].polarity
    }

    /// Writes `config.json`, `assignments.jsonl` and `topics.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::jsonl::write_json(&dir.join("config.json"), &self.header)?;
        crate::jsonl::write(&dir.join("assignments.jsonl"), &self.units)?;
        crate::jsonl::write_json(&dir.join("topics.json"), &self.summaries)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Self {
            header: crate::jsonl::read_json(&dir.join("config.json"))?,
            units: crate::jsonl::read(&dir.join("assignments.jsonl"))?,
            summaries: crate::jsonl::read_json(&dir.join("topics.json"))?,
        })
    }
}

/// Digest of the clustering inputs; part of every model's config hash.
pub fn data_digest(units: &[OpinionUnit], vectors: &[EmbeddingVector]) -> Result<String> {
    let mut bytes = crate::jsonl::to_string(units)?.into_bytes();
    bytes.extend(crate::jsonl::to_string(vectors)?.into_bytes());
    Ok(sha256_hex(&bytes))
}

/// The header a model fitted on these inputs will carry; its id is known
/// before any clustering runs.
pub fn model_header(units: &[OpinionUnit], vectors: &[EmbeddingVector], config: &TopicModelConfig) -> Result<ModelHeader> {
    let data_digest = data_digest(units, vectors)?;
    let config_hash = config_hash(&(&data_digest, config));
    Ok(ModelHeader {
        model_id: short_id(&config_hash),
        config_hash,
        data_digest,
        config: config.clone(),
    })
}

struct Partition {
    polarity: Polarity,
    /// Indices into the full unit list.
    members: Vec<usize>,
    k: usize,
}

struct PartitionResult {
    assignment: ClusterAssignment,
    merges: Vec<MergeStep>,
    degenerate: bool,
}

/// Reduces, clusters and summarises the units.
///
/// `vectors` are matched to units by `unit_id`. M1 and M2 cluster all units
/// together; M3 clusters the negative and positive splits independently and
/// numbers negative topics first.
pub fn fit_topic_model(
    units: &[OpinionUnit],
    vectors: &[EmbeddingVector],
    config: &TopicModelConfig,
) -> Result<TopicModel> {
    config.validate()?;
    if units.is_empty() {
        return Err(Error::invalid("topic model input", "no opinion units"));
    }
    let by_id: HashMap<&str, &EmbeddingVector> =
        vectors.iter().map(|v| (v.unit_id.as_str(), v)).collect();
    let embedded: Vec<Vec<f64>> = units
        .iter()
        .map(|u| {
            by_id
                .get(u.unit_id.as_str())
                .map(|v| v.to_f64())
                .ok_or_else(|| Error::invalid("topic model input", format!("no vector for unit {}", u.unit_id)))
        })
        .collect::<Result<_>>()?;
    let dim = crate::embedding::check_vectors(vectors)?;

    let partitions = match config.method {
        Method::M1 | Method::M2 => vec![Partition {
            polarity: Polarity::Unsplit,
            members: (0..units.len()).collect(),
            k: config.k,
        }],
        Method::M3 => {
            let split = split_by_sentiment(units);
            vec![
                Partition {
                    polarity: Polarity::Negative,
                    members: split.negative.iter().map(|u| u.index).collect(),
                    k: config.split_k(),
                },
                Partition {
                    polarity: Polarity::Positive,
                    members: split.positive.iter().map(|u| u.index).collect(),
                    k: config.split_k(),
                },
            ]
        }
    };

    let results: Vec<Result<PartitionResult>> = partitions
        .iter()
        .map(|p| cluster_partition(&embedded, p, config))
        .collect();

    let mut labels = vec![-1i32; units.len()];
    let mut polarities = Vec::new();
    let mut merge_log = Vec::new();
    let mut degenerate = false;
    for (partition, result) in partitions.iter().zip(results) {
        let result = result?;
        let offset = polarities.len() as i32;
        for (&unit, &label) in partition.members.iter().zip(&result.assignment.labels) {
            if label >= 0 {
                labels[unit] = label + offset;
            }
        }
        polarities.extend(std::iter::repeat_n(partition.polarity, result.assignment.topic_count()));
        merge_log.extend(result.merges.into_iter().map(|step| PolarMerge {
            polarity: partition.polarity,
            step,
        }));
        degenerate |= result.degenerate;
    }
    let assignment = ClusterAssignment::new(labels);
    let topics = summarise(units, &embedded, dim, &assignment, &polarities, config);

    let header = model_header(units, vectors, config)?;
    let assigned = units
        .iter()
        .zip(&assignment.labels)
        .map(|(u, &topic)| AssignedUnit {
            unit_id: u.unit_id.clone(),
            review_id: u.review_id.clone(),
            topic,
            sentiment: u.sentiment,
        })
        .collect();
    Ok(TopicModel {
        header,
        units: assigned,
        summaries: TopicSummaries {
            outlier_rate: assignment.outlier_rate(),
            merge_log,
            degenerate_reduction: degenerate,
            topics,
        },
    })
}

fn cluster_partition(
    embedded: &[Vec<f64>],
    partition: &Partition,
    config: &TopicModelConfig,
) -> Result<PartitionResult> {
    let n = partition.members.len();
    if n < config.min_cluster_size {
        return Ok(PartitionResult {
            assignment: ClusterAssignment::new(vec![-1; n]),
            merges: Vec::new(),
            degenerate: false,
        });
    }
    let vectors: Vec<Vec<f64>> = partition.members.iter().map(|&i| embedded[i].clone()).collect();
    let dim = vectors[0].len();
    let target = config.reduced_dim.min(dim).min(n);
    let reduction = reduce_dims(&vectors, target, config.seed)?;
    let clustered = hdbscan(&reduction.points, config.hdbscan_params());
    let (assignment, merges) = reduce_topics(&clustered, &vectors, partition.k);
    Ok(PartitionResult {
        assignment,
        merges,
        degenerate: reduction.degenerate,
    })
}

fn summarise(
    units: &[OpinionUnit],
    embedded: &[Vec<f64>],
    dim: usize,
    assignment: &ClusterAssignment,
    polarities: &[Polarity],
    config: &TopicModelConfig,
) -> Vec<Topic> {
    let count = polarities.len();
    let texts: Vec<Vec<String>> = (0..count)
        .map(|t| assignment.members(t).map(|i| units[i].text()).collect())
        .collect();
    let keywords = topic_keywords(&texts, config.keywords);

    (0..count)
        .map(|t| {
            let members: Vec<usize> = assignment.members(t).collect();
            let mut centroid = vec![0.0; dim];
            for &i in &members {
                for (c, x) in centroid.iter_mut().zip(&embedded[i]) {
                    *c += x;
                }
            }
            if !members.is_empty() {
                centroid.iter_mut().for_each(|c| *c /= members.len() as f64);
            }
            let ids: Vec<&str> = members.iter().map(|&i| units[i].unit_id.as_str()).collect();
            let vecs: Vec<&[f64]> = members.iter().map(|&i| embedded[i].as_slice()).collect();
            let reps = representative_units(&ids, &vecs, &centroid, config.representatives);
            let lookup: HashMap<&str, usize> = ids.iter().copied().zip(members.iter().copied()).collect();
            let rep_texts = reps.iter().map(|id| units[lookup[id.as_str()]].text()).collect();
            Topic {
                topic_id: t,
                size: members.len(),
                polarity: polarities[t],
                keywords: keywords[t].iter().map(|k| k.term.clone()).collect(),
                representative_units: reps,
                representative_texts: rep_texts,
                centroid,
            }
        })
        .collect()
}

/// The `n` members closest to `centroid` by cosine, closest first; ties break
/// on unit id.
pub fn representative_units(ids: &[&str], vectors: &[&[f64]], centroid: &[f64], n: usize) -> Vec<String> {
    let mut ranked: Vec<(f64, &str)> = ids
        .iter()
        .zip(vectors)
        .map(|(&id, v)| (1.0 - cosine(v, centroid), id))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    ranked.into_iter().take(n).map(|(_, id)| id.to_string()).collect()
}
