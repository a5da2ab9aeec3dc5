use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{build_prompt, filter_overall, parse_extraction, ChatTransport, ExtractionConfig};
use super::{OpinionUnit, ParseWarning, ResponseCache, Review};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewFailure {
    pub review_id: String,
    pub attempts: u32,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub reviews: usize,
    pub reviews_failed: usize,
    pub network_calls: usize,
    pub cache_hits: usize,
    pub units_parsed: usize,
    pub overall_removed: usize,
    pub units_kept: usize,
    /// Kept units per successfully processed review.
    pub mean_units_per_review: f64,
    pub clamped_scores: usize,
    pub dropped_entries: usize,
    pub excerpts_not_in_review: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedCorpus {
    pub units: Vec<OpinionUnit>,
    pub failures: Vec<ReviewFailure>,
    pub stats: ExtractionStats,
}

struct ReviewOutcome {
    units: Vec<OpinionUnit>,
    parsed: usize,
    warnings: Vec<ParseWarning>,
}

/// Runs extraction over every review with at most `config.parallelism`
/// requests in flight. Output order follows input order regardless of
/// scheduling, so a warm cache reproduces the corpus exactly.
pub fn extract_corpus(
    reviews: &[Review],
    config: &ExtractionConfig,
    transport: &dyn ChatTransport,
) -> Result<ExtractedCorpus> {
    let cache = config
        .cache_dir
        .as_ref()
        .map(ResponseCache::open)
        .transpose()?;
    let calls = AtomicUsize::new(0);
    let hits = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<std::result::Result<ReviewOutcome, ReviewFailure>>>> =
        reviews.iter().map(|_| Mutex::new(None)).collect();

    let workers = config.parallelism.clamp(1, reviews.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(review) = reviews.get(i) else { break };
                let outcome =
                    extract_one(review, config, transport, cache.as_ref(), &calls, &hits);
                *slots[i].lock().expect("slot lock") = Some(outcome);
            });
        }
    });

    let mut corpus = ExtractedCorpus {
        units: Vec::new(),
        failures: Vec::new(),
        stats: ExtractionStats {
            reviews: reviews.len(),
            network_calls: calls.into_inner(),
            cache_hits: hits.into_inner(),
            ..Default::default()
        },
    };
    for (review, slot) in reviews.iter().zip(slots) {
        match slot.into_inner().expect("slot lock").expect("every slot filled") {
            Ok(outcome) => {
                let stats = &mut corpus.stats;
                stats.units_parsed += outcome.parsed;
                stats.overall_removed += outcome.parsed
                    - outcome.units.len()
                    - count_dropped(&outcome.warnings);
                for w in &outcome.warnings {
                    match w {
                        ParseWarning::ClampedScore { .. } => stats.clamped_scores += 1,
                        ParseWarning::EmptyLabel { .. } => stats.dropped_entries += 1,
                    }
                }
                let haystack = review.text.to_lowercase();
                stats.excerpts_not_in_review += outcome
                    .units
                    .iter()
                    .filter(|u| !haystack.contains(&u.excerpt.to_lowercase()))
                    .count();
                corpus.units.extend(outcome.units);
            }
            Err(failure) => corpus.failures.push(failure),
        }
    }
    let stats = &mut corpus.stats;
    stats.reviews_failed = corpus.failures.len();
    stats.units_kept = corpus.units.len();
    let ok = stats.reviews - stats.reviews_failed;
    stats.mean_units_per_review = if ok == 0 {
        0.0
    } else {
        stats.units_kept as f64 / ok as f64
    };

    if !reviews.is_empty() && corpus.failures.len() == reviews.len() {
        return Err(Error::AllReviewsFailed(reviews.len()));
    }
    Ok(corpus)
}

fn count_dropped(warnings: &[ParseWarning]) -> usize {
    warnings
        .iter()
        .filter(|w| matches!(w, ParseWarning::EmptyLabel { .. }))
        .count()
}

fn extract_one(
    review: &Review,
    config: &ExtractionConfig,
    transport: &dyn ChatTransport,
    cache: Option<&ResponseCache>,
    calls: &AtomicUsize,
    hits: &AtomicUsize,
) -> std::result::Result<ReviewOutcome, ReviewFailure> {
    let prompt = build_prompt(review);
    let key = ResponseCache::key(&prompt);

    if let Some(raw) = cache.and_then(|c| c.get(&key)) {
        if let Ok(parsed) = parse_extraction(&raw, &review.review_id) {
            hits.fetch_add(1, Ordering::Relaxed);
            return Ok(outcome(parsed, config));
        }
    }

    let mut last_error = String::new();
    let mut attempts = 0;
    for attempt in 0..=config.max_retries {
        if attempt > 0 {
            let factor = 1u32 << (attempt - 1).min(16);
            std::thread::sleep(config.backoff_base * factor);
        }
        attempts += 1;
        calls.fetch_add(1, Ordering::Relaxed);
        let raw = match transport.complete(&prompt) {
            Ok(raw) => raw,
            Err(e) => {
                last_error = e.to_string();
                continue;
            }
        };
        match parse_extraction(&raw, &review.review_id) {
            Ok(parsed) => {
                if let Some(cache) = cache {
                    if let Err(e) = cache.put(&key, &raw) {
                        tracing::warn!(error = %e, "failed to cache extraction response");
                    }
                }
                return Ok(outcome(parsed, config));
            }
            Err(e) => last_error = e.to_string(),
        }
    }
    tracing::warn!(review_id = %review.review_id, error = %last_error, "extraction failed");
    Err(ReviewFailure {
        review_id: review.review_id.clone(),
        attempts,
        error: last_error,
    })
}

fn outcome(parsed: super::ParsedExtraction, config: &ExtractionConfig) -> ReviewOutcome {
    let parsed_count = parsed.units.len() + count_dropped(&parsed.warnings);
    ReviewOutcome {
        units: filter_overall(parsed.units, &config.overall_label),
        parsed: parsed_count,
        warnings: parsed.warnings,
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;
    use crate::extraction::PROMPT_EXAMPLE_OUTPUT;

    fn review(id: &str, text: &str) -> Review {
        Review {
            review_id: id.into(),
            text: text.into(),
            stars: 3,
            tags: Default::default(),
        }
    }

    fn config(cache: Option<&std::path::Path>) -> ExtractionConfig {
        ExtractionConfig {
            max_retries: 2,
            backoff_base: Duration::from_millis(1),
            cache_dir: cache.map(Into::into),
            parallelism: 3,
            ..Default::default()
        }
    }

    fn echo_transport(prompt: &str) -> Result<String> {
        let input = prompt.rsplit_once("Input: ").unwrap().1;
        let text = input.trim_end_matches("\n\nOutput:");
        Ok(format!(
            "```json\n[[\"Overall experience\",\"fine\",6],[\"Food\",{:?},7],[\"Service\",\"slow\",3]]\n```",
            text
        ))
    }

    #[test]
    fn warm_cache_skips_network_and_reproduces_units() {
        let dir = tempfile::tempdir().unwrap();
        let reviews = [review("a", "good food"), review("b", "nice place")];
        let calls = AtomicUsize::new(0);
        let counting = |p: &str| {
            calls.fetch_add(1, Ordering::SeqCst);
            echo_transport(p)
        };
        let cfg = config(Some(dir.path()));
        let first = extract_corpus(&reviews, &cfg, &counting).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        assert_eq!(first.stats.network_calls, 2);

        let second = extract_corpus(&reviews, &cfg, &counting).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        assert_eq!(second.stats.network_calls, 0);
        assert_eq!(second.stats.cache_hits, 2);
        assert_eq!(first.units, second.units);
    }

    #[test]
    fn one_failing_review_is_recorded_and_skipped() {
        let reviews = [
            review("a", "good food"),
            review("bad", "POISON"),
            review("c", "ok"),
        ];
        let transport = |p: &str| {
            if p.contains("POISON") {
                Err(Error::Transport("boom".into()))
            } else {
                echo_transport(p)
            }
        };
        let corpus = extract_corpus(&reviews, &config(None), &transport).unwrap();
        assert_eq!(corpus.failures.len(), 1);
        assert_eq!(corpus.failures[0].review_id, "bad");
        assert_eq!(corpus.failures[0].attempts, 3);
        let ids: std::collections::BTreeSet<_> =
            corpus.units.iter().map(|u| u.review_id.as_str()).collect();
        assert_eq!(ids.into_iter().collect::<Vec<_>>(), ["a", "c"]);
        assert_eq!(corpus.stats.overall_removed, 2);
        assert_eq!(corpus.stats.mean_units_per_review, 2.0);
    }

    #[test]
    fn all_failures_is_a_corpus_error() {
        let reviews = [review("a", "x")];
        let transport = |_: &str| -> Result<String> { Ok("no idea".into()) };
        assert!(matches!(
            extract_corpus(&reviews, &config(None), &transport),
            Err(Error::AllReviewsFailed(1))
        ));
    }

    #[test]
    fn parse_failure_is_retried() {
        let reviews = [review("a", "x")];
        let attempts = AtomicUsize::new(0);
        let transport = |_: &str| {
            if attempts.fetch_add(1, Ordering::SeqCst) == 0 {
                Ok("garbage".to_string())
            } else {
                Ok(PROMPT_EXAMPLE_OUTPUT.to_string())
            }
        };
        let corpus = extract_corpus(&reviews, &config(None), &transport).unwrap();
        assert_eq!(corpus.units.len(), 8);
        assert_eq!(corpus.stats.network_calls, 2);
        assert!(corpus.stats.excerpts_not_in_review > 0);
    }

    #[test]
    fn sentiments_in_range_and_reviews_resolve() {
        let reviews = [review("a", "good food"), review("b", "nice")];
        let corpus = extract_corpus(&reviews, &config(None), &echo_transport).unwrap();
        crate::extraction::validate_units(&corpus.units, &reviews).unwrap();
    }
}
