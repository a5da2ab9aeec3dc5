//! Sentiment splitting: negative (≤ 5) and positive (> 5) units are clustered
//! separately, and positive scores are shifted down onto the same 1–5 scale.

use serde::{Deserialize, Serialize};

use super::Polarity;
use crate::extraction::OpinionUnit;

/// A unit's position in the input slice and its score on the split scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitUnit {
    pub index: usize,
    pub score: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitCorpus {
    pub negative: Vec<SplitUnit>,
    pub positive: Vec<SplitUnit>,
}

/// Maps a 1–10 sentiment to its split and its 1–5 score within that split.
pub fn split_score(sentiment: u8) -> (Polarity, u8) {
    if sentiment > 5 {
        (Polarity::Positive, sentiment - 5)
    } else {
        (Polarity::Negative, sentiment)
    }
}

/// Inverse of [`split_score`].
pub fn unsplit_score(polarity: Polarity, score: u8) -> u8 {
    match polarity {
        Polarity::Positive => score + 5,
        Polarity::Negative | Polarity::Unsplit => score,
    }
}

pub fn split_by_sentiment(units: &[OpinionUnit]) -> SplitCorpus {
    let mut split = SplitCorpus::default();
    for (index, unit) in units.iter().enumerate() {
        let (polarity, score) = split_score(unit.sentiment);
        let entry = SplitUnit { index, score };
        match polarity {
            Polarity::Positive => split.positive.push(entry),
            _ => split.negative.push(entry),
        }
    }
    split
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn unit(sentiment: u8) -> OpinionUnit {
        OpinionUnit {
            unit_id: format!("u{sentiment}"),
            review_id: "r".into(),
            label: "x".into(),
            excerpt: "y".into(),
            sentiment,
        }
    }

    #[test]
    fn boundary_scores() {
        assert_eq!(split_score(6), (Polarity::Positive, 1));
        assert_eq!(split_score(10), (Polarity::Positive, 5));
        assert_eq!(split_score(5), (Polarity::Negative, 5));
        assert_eq!(split_score(1), (Polarity::Negative, 1));
    }

    #[test]
    fn empty_input_gives_empty_splits() {
        assert_eq!(split_by_sentiment(&[]), SplitCorpus::default());
    }

    #[test]
    fn positive_rescale_is_a_bijection() {
        let images: Vec<u8> = (6..=10).map(|s| split_score(s).1).collect();
        assert_eq!(images, [1, 2, 3, 4, 5]);
        for s in 1..=10 {
            let (p, score) = split_score(s);
            assert_eq!(unsplit_score(p, score), s);
        }
    }

    proptest! {
        #[test]
        fn split_conserves_units(scores in prop::collection::vec(1u8..=10, 0..200)) {
            let units: Vec<_> = scores.iter().map(|&s| unit(s)).collect();
            let split = split_by_sentiment(&units);
            prop_assert_eq!(split.negative.len() + split.positive.len(), units.len());
            let mut seen: Vec<usize> = split.negative.iter().chain(&split.positive).map(|u| u.index).collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..units.len()).collect::<Vec<_>>());
            prop_assert!(split.negative.iter().chain(&split.positive).all(|u| (1..=5).contains(&u.score)));
        }
    }
}
