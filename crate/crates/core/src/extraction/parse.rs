use serde::Serialize;
use serde_json::Value;

use super::OpinionUnit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseWarning {
    /// Score fell outside 1-10 and was clamped.
    ClampedScore { index: usize, raw: f64, clamped: u8 },
    /// Entry had an empty label and was dropped.
    EmptyLabel { index: usize },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedExtraction {
    pub units: Vec<OpinionUnit>,
    pub warnings: Vec<ParseWarning>,
}

/// Parses an LLM response into opinion units.
///
/// The response may wrap the array in prose or a code fence; the first
/// non-empty JSON array whose every element is a `[label, excerpt, score]`
/// triple wins. Unit ids are `{review_id}#{position}`.
pub fn parse_extraction(raw: &str, review_id: &str) -> Result<ParsedExtraction> {
    let triples = find_triples(raw).ok_or(Error::UnparseableResponse)?;
    let mut parsed = ParsedExtraction::default();
    for (index, (label, excerpt, score)) in triples.into_iter().enumerate() {
        if label.trim().is_empty() {
            parsed.warnings.push(ParseWarning::EmptyLabel { index });
            continue;
        }
        let rounded = score.round();
        let clamped = rounded.clamp(1.0, 10.0) as u8;
        if rounded < 1.0 || rounded > 10.0 {
            tracing::warn!(review_id, index, score, "sentiment score clamped to 1-10");
            parsed.warnings.push(ParseWarning::ClampedScore {
                index,
                raw: score,
                clamped,
            });
        }
        parsed.units.push(OpinionUnit {
            unit_id: format!("{review_id}#{index}"),
            review_id: review_id.to_string(),
            label: label.trim().to_string(),
            excerpt: excerpt.trim().to_string(),
            sentiment: clamped,
        });
    }
    Ok(parsed)
}

type Triple = (String, String, f64);

fn find_triples(raw: &str) -> Option<Vec<Triple>> {
    let mut saw_empty = false;
    for (start, _) in raw.match_indices('[') {
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        let Some(Ok(Value::Array(items))) = stream.next() else {
            continue;
        };
        if items.is_empty() {
            saw_empty = true;
            continue;
        }
        if let Some(triples) = items.iter().map(as_triple).collect::<Option<Vec<_>>>() {
            return Some(triples);
        }
    }
    saw_empty.then(Vec::new)
}

fn as_triple(value: &Value) -> Option<Triple> {
    let Value::Array(parts) = value else {
        return None;
    };
    let [label, excerpt, score] = parts.as_slice() else {
        return None;
    };
    let score = match score {
        Value::Number(n) => n.as_f64()?,
        Value::String(s) => s.trim().parse::<f64>().ok()?,
        _ => return None,
    };
    if !score.is_finite() {
        return None;
    }
    Some((
        label.as_str()?.to_string(),
        excerpt.as_str()?.to_string(),
        score,
    ))
}
