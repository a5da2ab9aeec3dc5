//! Class-based TF-IDF topic keywords.

use std::collections::{BTreeMap, HashMap};

/// Lowercases, splits on anything that is not alphanumeric and drops
/// single-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyword {
    pub term: String,
    pub weight: f64,
}

/// Ranks terms per topic by `tf(t, topic) * ln(1 + A / f(t))`, where `A` is
/// the mean token count per topic and `f(t)` the term's frequency across all
/// topics. Ties break alphabetically.
pub fn topic_keywords<S: AsRef<str>>(docs_per_topic: &[Vec<S>], top_n: usize) -> Vec<Vec<Keyword>> {
    let counts: Vec<BTreeMap<String, usize>> = docs_per_topic
        .iter()
        .map(|docs| {
            let mut c = BTreeMap::new();
            for doc in docs {
                for tok in tokenize(doc.as_ref()) {
                    *c.entry(tok).or_insert(0) += 1;
                }
            }
            c
        })
        .collect();
    let mut across: HashMap<&str, usize> = HashMap::new();
    let mut total = 0usize;
    for c in &counts {
        for (term, &n) in c {
            *across.entry(term.as_str()).or_insert(0) += n;
            total += n;
        }
    }
    let topics = counts.len().max(1);
    let avg = total as f64 / topics as f64;

    counts
        .iter()
        .map(|c| {
            let mut ranked: Vec<Keyword> = c
                .iter()
                .map(|(term, &tf)| Keyword {
                    term: term.clone(),
                    weight: tf as f64 * (1.0 + avg / across[term.as_str()] as f64).ln(),
                })
                .collect();
            ranked.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.term.cmp(&b.term)));
            ranked.truncate(top_n);
            ranked
        })
        .collect()
}
