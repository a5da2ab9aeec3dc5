//! Review ingestion and LLM-based opinion-unit extraction.

mod cache;
mod corpus;
mod llm;
mod parse;
mod prompt;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::ResponseCache;
pub use corpus::{extract_corpus, ExtractedCorpus, ExtractionStats, ReviewFailure};
pub use llm::{ChatTransport, HttpChatClient};
pub use parse::{parse_extraction, ParseWarning, ParsedExtraction};
pub use prompt::{build_prompt, PROMPT_EXAMPLE_OUTPUT};

pub const DEFAULT_OVERALL_LABEL: &str = "overall experience";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub text: String,
    pub stars: u8,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

impl Review {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.stars) {
            return Err(Error::invalid(
                "review",
                format!("{}: stars must be 1-5, got {}", self.review_id, self.stars),
            ));
        }
        if self.text.trim().is_empty() {
            return Err(Error::invalid(
                "review",
                format!("{}: empty text", self.review_id),
            ));
        }
        Ok(())
    }
}

/// One aspect-level opinion extracted from a review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionUnit {
    pub unit_id: String,
    pub review_id: String,
    pub label: String,
    pub excerpt: String,
    /// 1 = very negative, 10 = very positive.
    pub sentiment: u8,
}

impl OpinionUnit {
    /// The string handed to embedding providers and keyword extraction.
    pub fn text(&self) -> String {
        format!("{}: {}", self.label, self.excerpt)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub endpoint_url: String,
    pub model: String,
    pub api_key_env: String,
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub backoff_base: Duration,
    pub cache_dir: Option<PathBuf>,
    pub overall_label: String,
    pub parallelism: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "gpt-4".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            cache_dir: None,
            overall_label: DEFAULT_OVERALL_LABEL.into(),
            parallelism: 4,
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

/// Drops units labelled as the overall experience (case-insensitive exact match).
pub fn filter_overall(units: Vec<OpinionUnit>, overall_label: &str) -> Vec<OpinionUnit> {
    let wanted = overall_label.trim().to_lowercase();
    units
        .into_iter()
        .filter(|u| u.label.trim().to_lowercase() != wanted)
        .collect()
}

/// Loads reviews and enforces the per-review invariants and id uniqueness.
pub fn read_reviews(path: &Path) -> Result<Vec<Review>> {
    let reviews: Vec<Review> = crate::jsonl::read(path)?;
    validate_reviews(&reviews)?;
    Ok(reviews)
}

pub fn validate_reviews(reviews: &[Review]) -> Result<()> {
    let mut seen = HashSet::with_capacity(reviews.len());
    for review in reviews {
        review.validate()?;
        if !seen.insert(review.review_id.as_str()) {
            return Err(Error::invalid(
                "review",
                format!("duplicate review_id {}", review.review_id),
            ));
        }
    }
    Ok(())
}

/// Checks sentiment range and that each unit points at a known review.
pub fn validate_units(units: &[OpinionUnit], reviews: &[Review]) -> Result<()> {
    let ids: HashSet<&str> = reviews.iter().map(|r| r.review_id.as_str()).collect();
    for unit in units {
        if !(1..=10).contains(&unit.sentiment) {
            return Err(Error::invalid(
                "opinion unit",
                format!("{}: sentiment {} outside 1-10", unit.unit_id, unit.sentiment),
            ));
        }
        if unit.label.trim().is_empty() {
            return Err(Error::invalid(
                "opinion unit",
                format!("{}: empty label", unit.unit_id),
            ));
        }
        if !ids.contains(unit.review_id.as_str()) {
            return Err(Error::invalid(
                "opinion unit",
                format!("{}: unknown review {}", unit.unit_id, unit.review_id),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(label: &str) -> OpinionUnit {
        OpinionUnit {
            unit_id: label.into(),
            review_id: "r".into(),
            label: label.into(),
            excerpt: "x".into(),
            sentiment: 5,
        }
    }

    #[test]
    fn overall_filter_is_case_insensitive() {
        let units = vec![
            unit("Overall Experience"),
            unit("Service"),
            unit("overall experience"),
        ];
        let kept = filter_overall(units, DEFAULT_OVERALL_LABEL);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].label, "Service");
    }

    #[test]
    fn overall_filter_without_matches_is_identity() {
        let units = vec![unit("Food"), unit("Service")];
        assert_eq!(filter_overall(units.clone(), DEFAULT_OVERALL_LABEL), units);
    }

    #[test]
    fn overall_filter_is_idempotent() {
        let units = vec![unit("Overall experience"), unit("Food"), unit("Parking")];
        let once = filter_overall(units, DEFAULT_OVERALL_LABEL);
        let twice = filter_overall(once.clone(), DEFAULT_OVERALL_LABEL);
        assert_eq!(once, twice);
    }

    #[test]
    fn review_invariants() {
        let mut review = Review {
            review_id: "a".into(),
            text: "ok".into(),
            stars: 3,
            tags: BTreeMap::new(),
        };
        assert!(review.validate().is_ok());
        review.stars = 6;
        assert!(review.validate().is_err());
        review.stars = 0;
        assert!(review.validate().is_err());
        review.stars = 2;
        review.text = "  ".into();
        assert!(review.validate().is_err());
    }

    #[test]
    fn duplicate_review_ids_rejected() {
        let r = Review {
            review_id: "a".into(),
            text: "ok".into(),
            stars: 3,
            tags: BTreeMap::new(),
        };
        assert!(validate_reviews(&[r.clone(), r]).is_err());
    }
}
