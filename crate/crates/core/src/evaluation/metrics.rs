use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topics::TopicModel;

/// Share of units carrying the topic's dominant polarity (positive iff > 5).
pub fn sentiment_precision(sentiments: &[u8]) -> Result<f64> {
    if sentiments.is_empty() {
        return Err(Error::invalid("sentiment precision", "topic has no units"));
    }
    let pos = sentiments.iter().filter(|&&s| s > 5).count() as f64 / sentiments.len() as f64;
    Ok(pos.max(1.0 - pos))
}

/// One evaluator's judgement of one topic sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub evaluator_id: String,
    pub topic_id: usize,
    #[serde(default)]
    pub topic_name: String,
    pub sampled_unit_ids: Vec<String>,
    #[serde(default)]
    pub error_unit_ids: Vec<String>,
}

impl AnnotationRecord {
    pub fn validate(&self) -> Result<()> {
        if self.sampled_unit_ids.is_empty() {
            return Err(Error::invalid(
                "annotation record",
                format!("evaluator {} topic {}: no sampled units", self.evaluator_id, self.topic_id),
            ));
        }
        let sampled: BTreeSet<&str> = self.sampled_unit_ids.iter().map(String::as_str).collect();
        if let Some(bad) = self.error_unit_ids.iter().find(|id| !sampled.contains(id.as_str())) {
            return Err(Error::invalid(
                "annotation record",
                format!(
                    "evaluator {} topic {}: error id {bad} was not sampled",
                    self.evaluator_id, self.topic_id
                ),
            ));
        }
        Ok(())
    }

    fn error_set(&self) -> BTreeSet<&str> {
        self.error_unit_ids.iter().map(String::as_str).collect()
    }

    fn precision(&self) -> f64 {
        let sampled = self.sampled_unit_ids.len();
        (sampled - self.error_set().len()) as f64 / sampled as f64
    }
}

/// How per-evaluator precisions combine into a topic precision.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean of per-evaluator precisions.
    #[default]
    Mean,
    /// Total correct over total sampled across evaluators.
    Pooled,
}

/// Per-topic precision from annotation records.
pub fn topic_precision(records: &[AnnotationRecord], aggregation: Aggregation) -> Result<BTreeMap<usize, f64>> {
    let mut by_topic: BTreeMap<usize, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records {
        r.validate()?;
        by_topic.entry(r.topic_id).or_default().push(r);
    }
    Ok(by_topic
        .into_iter()
        .map(|(topic, recs)| {
            let value = match aggregation {
                Aggregation::Mean => recs.iter().map(|r| r.precision()).sum::<f64>() / recs.len() as f64,
                Aggregation::Pooled => {
                    let sampled: usize = recs.iter().map(|r| r.sampled_unit_ids.len()).sum();
                    let errors: usize = recs.iter().map(|r| r.error_set().len()).sum();
                    (sampled - errors) as f64 / sampled as f64
                }
            };
            (topic, value)
        })
        .collect())
}

/// Share of overlap units on which every evaluator made the same fits/error
/// judgement. A unit counts as an error for an evaluator iff listed.
pub fn inter_rater_agreement(records: &[AnnotationRecord], overlap_unit_ids: &[String]) -> Result<f64> {
    if overlap_unit_ids.is_empty() {
        return Err(Error::invalid("agreement", "no overlap units"));
    }
    for r in records {
        r.validate()?;
    }
    let evaluators: BTreeSet<&str> = records.iter().map(|r| r.evaluator_id.as_str()).collect();
    if evaluators.is_empty() {
        return Err(Error::invalid("agreement", "no annotation records"));
    }
    let mut agreed = 0;
    for unit in overlap_unit_ids {
        let mut judgements = Vec::with_capacity(evaluators.len());
        for &ev in &evaluators {
            let record = records
                .iter()
                .find(|r| r.evaluator_id == ev && r.sampled_unit_ids.contains(unit))
                .ok_or_else(|| {
                    Error::invalid("agreement", format!("evaluator {ev} has no judgement for unit {unit}"))
                })?;
            judgements.push(record.error_unit_ids.contains(unit));
        }
        if judgements.iter().all(|&j| j == judgements[0]) {
            agreed += 1;
        }
    }
    Ok(agreed as f64 / overlap_unit_ids.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicPrecision {
    pub topic_id: usize,
    pub size: usize,
    pub sentiment_precision: f64,
    pub topic_precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub topics: Vec<TopicPrecision>,
    pub mean_sentiment_precision: f64,
    pub mean_topic_precision: Option<f64>,
    /// Share of annotated topics with topic precision of at least 0.9.
    pub share_topic_precision_at_least_90: Option<f64>,
    pub outlier_rate: f64,
}

/// Sentiment precision for every non-empty topic, plus topic precision where
/// annotations are supplied.
pub fn precision_report(
    model: &TopicModel,
    annotations: &[AnnotationRecord],
    aggregation: Aggregation,
) -> Result<PrecisionReport> {
    let annotated = topic_precision(annotations, aggregation)?;
    let mut sentiments: Vec<Vec<u8>> = vec![Vec::new(); model.topics().len()];
    for u in &model.units {
        if let Ok(t) = usize::try_from(u.topic) {
            sentiments[t].push(u.sentiment);
        }
    }
    let topics: Vec<TopicPrecision> = sentiments
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(t, s)| {
            Ok(TopicPrecision {
                topic_id: t,
                size: s.len(),
                sentiment_precision: sentiment_precision(s)?,
                topic_precision: annotated.get(&t).copied(),
            })
        })
        .collect::<Result<_>>()?;
    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let sp: Vec<f64> = topics.iter().map(|t| t.sentiment_precision).collect();
    let tp: Vec<f64> = topics.iter().filter_map(|t| t.topic_precision).collect();
    Ok(PrecisionReport {
        mean_sentiment_precision: mean(&sp).unwrap_or(0.0),
        mean_topic_precision: mean(&tp),
        share_topic_precision_at_least_90: (!tp.is_empty())
            .then(|| tp.iter().filter(|&&p| p >= 0.9).count() as f64 / tp.len() as f64),
        outlier_rate: model.assignment().outlier_rate(),
        topics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(ev: &str, topic: usize, sampled: &[&str], errors: &[&str]) -> AnnotationRecord {
        AnnotationRecord {
            evaluator_id: ev.into(),
            topic_id: topic,
            topic_name: String::new(),
            sampled_unit_ids: sampled.iter().map(|s| s.to_string()).collect(),
            error_unit_ids: errors.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("u{i}")).collect()
    }

    #[test]
    fn sentiment_precision_cases() {
        let mut s = vec![8u8; 18];
        s.extend([3, 4]);
        assert!((sentiment_precision(&s).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(sentiment_precision(&[1, 5, 2]).unwrap(), 1.0);
        let half: Vec<u8> = (0..20).map(|i| if i < 10 { 9 } else { 2 }).collect();
        assert_eq!(sentiment_precision(&half).unwrap(), 0.5);
        assert!(sentiment_precision(&[]).is_err());
    }

    #[test]
    fn topic_precision_cases() {
        let sampled = ids(20);
        let s: Vec<&str> = sampled.iter().map(String::as_str).collect();
        let a = rec("a", 0, &s, &["u1", "u2"]);
        assert!((topic_precision(&[a.clone()], Aggregation::Mean).unwrap()[&0] - 0.9).abs() < 1e-15);
        let b = rec("b", 0, &s, &["u1", "u2", "u3", "u4"]);
        assert!((topic_precision(&[a, b], Aggregation::Mean).unwrap()[&0] - 0.85).abs() < 1e-15);
        assert_eq!(topic_precision(&[rec("a", 1, &s, &[])], Aggregation::Mean).unwrap()[&1], 1.0);
    }

    #[test]
    fn pooled_differs_from_mean_on_unequal_samples() {
        let a = rec("a", 0, &["x", "y"], &["x"]);
        let b = rec("b", 0, &["x", "y", "z", "w"], &[]);
        assert_eq!(topic_precision(&[a.clone(), b.clone()], Aggregation::Mean).unwrap()[&0], 0.75);
        assert_eq!(topic_precision(&[a, b], Aggregation::Pooled).unwrap()[&0], 5.0 / 6.0);
    }

    #[test]
    fn error_outside_sample_is_rejected() {
        let err = topic_precision(&[rec("ann", 4, &["x"], &["y"])], Aggregation::Mean).unwrap_err();
        assert!(err.to_string().contains("ann"));
    }

    #[test]
    fn agreement_cases() {
        let overlap = ids(4);
        let s: Vec<&str> = overlap.iter().map(String::as_str).collect();
        let recs = [rec("a", 0, &s, &["u0"]), rec("b", 0, &s, &["u1"])];
        // u0 and u1 disagree, u2 and u3 agree.
        assert_eq!(inter_rater_agreement(&recs, &overlap).unwrap(), 0.5);
        let complementary = [rec("a", 0, &s, &["u0", "u1"]), rec("b", 0, &s, &["u2", "u3"])];
        assert_eq!(inter_rater_agreement(&complementary, &overlap).unwrap(), 0.0);
        let missing = [rec("a", 0, &s, &[]), rec("b", 0, &["u0"], &[])];
        assert!(inter_rater_agreement(&missing, &overlap).is_err());
    }

    proptest! {
        #[test]
        fn sentiment_precision_at_least_half(s in proptest::collection::vec(1u8..=10, 1..50)) {
            let p = sentiment_precision(&s).unwrap();
            prop_assert!((0.5..=1.0).contains(&p));
        }

        #[test]
        fn metrics_permutation_invariant(errs in proptest::collection::vec(any::<bool>(), 1..30), rot in 0usize..30) {
            let all = ids(errs.len());
            let errors: Vec<String> = all.iter().zip(&errs).filter(|(_, &e)| e).map(|(u, _)| u.clone()).collect();
            let mut shuffled = all.clone();
            shuffled.rotate_left(rot % all.len());
            let a = AnnotationRecord { evaluator_id: "a".into(), topic_id: 0, topic_name: String::new(), sampled_unit_ids: all.clone(), error_unit_ids: errors.clone() };
            let b = AnnotationRecord { sampled_unit_ids: shuffled.clone(), ..a.clone() };
            let pa = topic_precision(&[a.clone()], Aggregation::Mean).unwrap();
            let pb = topic_precision(&[b.clone()], Aggregation::Mean).unwrap();
            prop_assert_eq!(pa, pb);
            let c = AnnotationRecord { evaluator_id: "c".into(), error_unit_ids: vec![], ..a.clone() };
            prop_assert_eq!(
                inter_rater_agreement(&[a, c.clone()], &all).unwrap(),
                inter_rater_agreement(&[b, c], &shuffled).unwrap()
            );
        }
    }
}
