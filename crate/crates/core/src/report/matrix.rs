use serde::{Deserialize, Serialize};

use super::TopicImpactRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrant {
    /// Frequent and hurts the rating.
    Urgent,
    /// Infrequent and hurts the rating.
    Monitor,
    /// Frequent and helps the rating.
    Maintain,
    /// Infrequent and helps the rating.
    Promote,
}

impl Quadrant {
    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::Urgent => "urgent",
            Quadrant::Monitor => "monitor",
            Quadrant::Maintain => "maintain",
            Quadrant::Promote => "promote",
        }
    }

    pub fn of(high_frequency: bool, beta: f64) -> Self {
        match (high_frequency, beta < 0.0) {
            (true, true) => Quadrant::Urgent,
            (false, true) => Quadrant::Monitor,
            (true, false) => Quadrant::Maintain,
            (false, false) => Quadrant::Promote,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencySplit {
    #[default]
    Median,
    Mean,
}

impl std::str::FromStr for FrequencySplit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "median" => Ok(FrequencySplit::Median),
            "mean" => Ok(FrequencySplit::Mean),
            other => Err(format!("unknown frequency split {other:?} (expected median or mean)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityPoint {
    pub topic_id: usize,
    pub name: String,
    pub frequency: usize,
    pub beta: f64,
    pub quadrant: Quadrant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityMatrix {
    pub split: FrequencySplit,
    /// Topics at or above this frequency count as frequent.
    pub threshold: f64,
    pub points: Vec<PriorityPoint>,
}

/// Places every significant row by frequency against the split threshold and
/// by the sign of β.
pub fn priority_matrix(rows: &[TopicImpactRow], split: FrequencySplit) -> Result<PriorityMatrix> {
    let significant: Vec<&TopicImpactRow> = rows.iter().filter(|r| r.is_significant()).collect();
    if significant.is_empty() {
        return Err(Error::invalid("priority matrix", "no significant topics"));
    }
    let mut sizes: Vec<f64> = significant.iter().map(|r| r.size as f64).collect();
    sizes.sort_by(f64::total_cmp);
    let threshold = match split {
        FrequencySplit::Median => {
            let mid = sizes.len() / 2;
            if sizes.len() % 2 == 1 {
                sizes[mid]
            } else {
                (sizes[mid - 1] + sizes[mid]) / 2.0
            }
        }
        FrequencySplit::Mean => sizes.iter().sum::<f64>() / sizes.len() as f64,
    };
    let points = significant
        .iter()
        .map(|r| {
            let beta = r.beta.expect("significant rows have a coefficient");
            PriorityPoint {
                topic_id: r.topic_id,
                name: r.name.clone(),
                frequency: r.size,
                beta,
                quadrant: Quadrant::of(r.size as f64 >= threshold, beta),
            }
        })
        .collect();
    Ok(PriorityMatrix {
        split,
        threshold,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topics::Polarity;

    fn row(topic_id: usize, size: usize, beta: f64, p: f64) -> TopicImpactRow {
        TopicImpactRow {
            topic_id,
            name: format!("t{topic_id}"),
            keywords: vec![],
            polarity: Polarity::Unsplit,
            beta: Some(beta),
            p: Some(p),
            beta_display: String::new(),
            size,
            representative: None,
        }
    }

    #[test]
    fn quadrants_by_median() {
        let rows = [row(0, 100, -1.0, 0.01), row(1, 10, 0.5, 0.01), row(2, 50, -0.2, 0.01), row(3, 500, 0.3, 0.9)];
        let m = priority_matrix(&rows, FrequencySplit::Median).unwrap();
        assert_eq!(m.threshold, 50.0);
        let q: Vec<Quadrant> = m.points.iter().map(|p| p.quadrant).collect();
        assert_eq!(q, [Quadrant::Urgent, Quadrant::Promote, Quadrant::Urgent]);
        assert!(m.points.iter().all(|p| p.topic_id != 3));
    }

    #[test]
    fn single_topic_is_high_frequency() {
        let m = priority_matrix(&[row(0, 7, -0.4, 0.0)], FrequencySplit::Median).unwrap();
        assert_eq!(m.points[0].quadrant, Quadrant::Urgent);
        let m = priority_matrix(&[row(0, 7, 0.4, 0.0)], FrequencySplit::Median).unwrap();
        assert_eq!(m.points[0].quadrant, Quadrant::Maintain);
    }

    #[test]
    fn low_frequency_quadrants() {
        let rows = [row(0, 10, -1.0, 0.0), row(1, 90, 1.0, 0.0), row(2, 11, 2.0, 0.0)];
        let m = priority_matrix(&rows, FrequencySplit::Mean).unwrap();
        assert_eq!(m.points[0].quadrant, Quadrant::Monitor);
        assert_eq!(m.points[2].quadrant, Quadrant::Promote);
    }

    #[test]
    fn no_significant_rows() {
        assert!(priority_matrix(&[row(0, 1, 1.0, 0.3)], FrequencySplit::Median).is_err());
    }
}
