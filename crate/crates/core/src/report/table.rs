use serde::{Deserialize, Serialize};

use super::NOT_SIGNIFICANT_ABOVE;
use crate::regression::FitArtifact;
use crate::topics::{Polarity, TopicModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicImpactRow {
    pub topic_id: usize,
    pub name: String,
    pub keywords: Vec<String>,
    pub polarity: Polarity,
    /// `None` when the topic's column was dropped from the fit.
    pub beta: Option<f64>,
    pub p: Option<f64>,
    /// β to three significant figures, `n.s.` when p > .05, `dropped` without a fit.
    pub beta_display: String,
    pub size: usize,
    pub representative: Option<String>,
}

impl TopicImpactRow {
    pub fn is_significant(&self) -> bool {
        self.p.is_some_and(|p| p <= NOT_SIGNIFICANT_ABOVE)
    }
}

/// Formats to three significant figures, e.g. `-1.21`, `0.0456`, `123`.
pub fn format_sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = |v: f64| 2 - v.abs().log10().floor() as i32;
    let d = decimals(x);
    let scale = 10f64.powi(d);
    let rounded = (x * scale).round() / scale;
    let d = decimals(rounded);
    if d >= 0 {
        format!("{:.*}", d as usize, rounded)
    } else {
        format!("{rounded:.0}")
    }
}

fn block(row: &TopicImpactRow) -> u8 {
    match row.polarity {
        Polarity::Negative => 0,
        Polarity::Positive => 1,
        Polarity::Unsplit if row.beta.unwrap_or(0.0) < 0.0 => 0,
        Polarity::Unsplit => 1,
    }
}

/// Rows ranked by influence on the rating: the negative block ascending by
/// β, then the positive block descending, with non-significant rows last in
/// each block. Unsplit topics are blocked by the sign of β. Ties go to the
/// lower topic id.
pub fn impact_table(model: &TopicModel, fit: &FitArtifact) -> Vec<TopicImpactRow> {
    let mut rows: Vec<TopicImpactRow> = model
        .topics()
        .iter()
        .map(|t| {
            let coef = fit.coefficient(t.topic_id);
            let beta = coef.map(|c| c.beta);
            let p = coef.map(|c| c.p);
            let beta_display = match (beta, p) {
                (Some(_), Some(p)) if p > NOT_SIGNIFICANT_ABOVE => "n.s.".to_string(),
                (Some(b), _) => format_sig3(b),
                _ => "dropped".to_string(),
            };
            TopicImpactRow {
                topic_id: t.topic_id,
                name: t.name(),
                keywords: t.keywords.clone(),
                polarity: t.polarity,
                beta,
                p,
                beta_display,
                size: t.size,
                representative: t.representative_texts.first().cloned(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        let key = |r: &TopicImpactRow| (block(r), !r.is_significant());
        key(a).cmp(&key(b)).then_with(|| {
            if !a.is_significant() {
                return a.topic_id.cmp(&b.topic_id);
            }
            let (x, y) = (a.beta.unwrap_or(0.0), b.beta.unwrap_or(0.0));
            let ord = if block(a) == 0 { x.total_cmp(&y) } else { y.total_cmp(&x) };
            ord.then(a.topic_id.cmp(&b.topic_id))
        })
    });
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_significant_figures() {
        assert_eq!(format_sig3(-1.2149), "-1.21");
        assert_eq!(format_sig3(0.045_61), "0.0456");
        assert_eq!(format_sig3(123.4), "123");
        assert_eq!(format_sig3(1234.0), "1230");
        assert_eq!(format_sig3(9.996), "10.0");
        assert_eq!(format_sig3(-0.3), "-0.300");
        assert_eq!(format_sig3(0.0), "0");
    }
}
