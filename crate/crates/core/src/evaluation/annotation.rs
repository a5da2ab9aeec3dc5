use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AnnotationRecord;
use crate::error::{Error, Result};
use crate::extraction::OpinionUnit;
use crate::topics::TopicModel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub evaluators: usize,
    pub per_topic: usize,
    /// Units per topic shown to every evaluator.
    pub overlap: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            evaluators: 3,
            per_topic: 20,
            overlap: 5,
            seed: 0,
        }
    }
}

/// One workbook line. `topic_name` and `error` are left blank for the
/// evaluator to fill in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkbookRow {
    pub topic_id: usize,
    pub evaluator_id: String,
    pub unit_id: String,
    pub label: String,
    pub excerpt: String,
    pub topic_name: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSample {
    pub topic_id: usize,
    pub overlap_unit_ids: Vec<String>,
    /// The topic had fewer than `per_topic` units and was sampled whole.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationWorkbook {
    pub config: SampleConfig,
    pub topics: Vec<TopicSample>,
    pub rows: Vec<WorkbookRow>,
}

pub fn evaluator_id(i: usize) -> String {
    format!("evaluator_{}", i + 1)
}

/// Seeded per-topic samples. Each evaluator sees `per_topic` units, the first
/// `overlap` of which are shared by all evaluators; the rest are disjoint
/// across evaluators while the topic is large enough, and drawn
/// independently otherwise.
pub fn sample_for_annotation(
    model: &TopicModel,
    units: &[OpinionUnit],
    config: &SampleConfig,
) -> Result<AnnotationWorkbook> {
    if config.evaluators == 0 || config.per_topic == 0 || config.overlap > config.per_topic {
        return Err(Error::invalid(
            "sample config",
            "need at least one evaluator and 0 < overlap <= per_topic",
        ));
    }
    let by_id: HashMap<&str, &OpinionUnit> = units.iter().map(|u| (u.unit_id.as_str(), u)).collect();
    let mut members: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for u in &model.units {
        if let Ok(t) = usize::try_from(u.topic) {
            members.entry(t).or_default().push(&u.unit_id);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let evaluators: Vec<String> = (0..config.evaluators).map(evaluator_id).collect();
    let mut topics = Vec::new();
    let mut rows = Vec::new();
    for (topic, mut ids) in members {
        ids.shuffle(&mut rng);
        let exhaustive = ids.len() < config.per_topic;
        let per_eval: Vec<Vec<&str>> = if exhaustive {
            vec![ids.clone(); config.evaluators]
        } else {
            let (shared, rest) = ids.split_at(config.overlap);
            let extra = config.per_topic - config.overlap;
            let disjoint = rest.len() >= extra * config.evaluators;
            (0..config.evaluators)
                .map(|e| {
                    let mut picked = shared.to_vec();
                    if disjoint {
                        picked.extend_from_slice(&rest[e * extra..(e + 1) * extra]);
                    } else {
                        picked.extend(rest.choose_multiple(&mut rng, extra).copied());
                    }
                    picked
                })
                .collect()
        };
        let overlap = if exhaustive { ids.len() } else { config.overlap };
        topics.push(TopicSample {
            topic_id: topic,
            overlap_unit_ids: per_eval[0][..overlap].iter().map(|s| s.to_string()).collect(),
            exhaustive,
        });
        for (ev, picked) in evaluators.iter().zip(per_eval) {
            for id in picked {
                let unit = by_id
                    .get(id)
                    .ok_or_else(|| Error::invalid("annotation sample", format!("unit {id} not in corpus")))?;
                rows.push(WorkbookRow {
                    topic_id: topic,
                    evaluator_id: ev.clone(),
                    unit_id: id.to_string(),
                    label: unit.label.clone(),
                    excerpt: unit.excerpt.clone(),
                    topic_name: String::new(),
                    error: String::new(),
                });
            }
        }
    }
    Ok(AnnotationWorkbook {
        config: config.clone(),
        topics,
        rows,
    })
}

pub fn workbook_to_csv(rows: &[WorkbookRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

pub fn write_workbook_csv(rows: &[WorkbookRow], path: &Path) -> Result<()> {
    std::fs::write(path, workbook_to_csv(rows)?).map_err(|e| Error::io(path, e))
}

fn is_flagged(cell: &str) -> bool {
    !matches!(cell.trim().to_ascii_lowercase().as_str(), "" | "0" | "no" | "false" | "n")
}

/// Reads a filled-in workbook back into one record per (evaluator, topic).
/// A unit is an error when its `error` cell is non-blank (other than a
/// negative such as `0` or `no`); the first non-blank `topic_name` wins.
pub fn read_annotations_csv(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut grouped: BTreeMap<(String, usize), AnnotationRecord> = BTreeMap::new();
    for row in r.deserialize() {
        let row: WorkbookRow = row?;
        let rec = grouped
            .entry((row.evaluator_id.clone(), row.topic_id))
            .or_insert_with(|| AnnotationRecord {
                evaluator_id: row.evaluator_id.clone(),
                topic_id: row.topic_id,
                topic_name: String::new(),
                sampled_unit_ids: Vec::new(),
                error_unit_ids: Vec::new(),
            });
        if rec.topic_name.is_empty() {
            rec.topic_name = row.topic_name.trim().to_string();
        }
        if is_flagged(&row.error) {
            rec.error_unit_ids.push(row.unit_id.clone());
        }
        rec.sampled_unit_ids.push(row.unit_id);
    }
    Ok(grouped.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_parsing() {
        for yes in ["x", "1", "yes", "Error", " X "] {
            assert!(is_flagged(yes));
        }
        for no in ["", " ", "0", "no", "FALSE"] {
            assert!(!is_flagged(no));
        }
    }
}
