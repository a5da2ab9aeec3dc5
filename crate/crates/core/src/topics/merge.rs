use serde::{Deserialize, Serialize};

use super::ClusterAssignment;
use crate::embedding::cosine;

/// One topic-count reduction step, in the ids of the input assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStep {
    pub source: i32,
    pub target: i32,
}

/// Repeatedly folds the smallest topic into the topic whose centroid is most
/// cosine-similar until at most `k` topics remain. Surviving topics are then
/// renumbered densely in their original order; outliers are untouched.
pub fn reduce_topics(
    assignment: &ClusterAssignment,
    vectors: &[Vec<f64>],
    k: usize,
) -> (ClusterAssignment, Vec<MergeStep>) {
    let k = k.max(1);
    let count = assignment.topic_count();
    let dim = vectors.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; count];
    let mut sizes = vec![0usize; count];
    for (&label, v) in assignment.labels.iter().zip(vectors) {
        if label >= 0 {
            let t = label as usize;
            sizes[t] += 1;
            for (s, x) in sums[t].iter_mut().zip(v) {
                *s += x;
            }
        }
    }

    let mut alive: Vec<bool> = sizes.iter().map(|&s| s > 0).collect();
    let mut redirect: Vec<usize> = (0..count).collect();
    let mut log = Vec::new();
    while alive.iter().filter(|&&a| a).count() > k {
        let smallest = (0..count)
            .filter(|&t| alive[t])
            .min_by_key(|&t| (sizes[t], t))
            .expect("more than k topics alive");
        let target = (0..count)
            .filter(|&t| alive[t] && t != smallest)
            .max_by(|&a, &b| {
                cosine(&sums[smallest], &sums[a])
                    .total_cmp(&cosine(&sums[smallest], &sums[b]))
                    .then(b.cmp(&a))
            })
            .expect("at least two topics alive");
        let moved = std::mem::take(&mut sums[smallest]);
        for (s, x) in sums[target].iter_mut().zip(&moved) {
            *s += x;
        }
        sizes[target] += sizes[smallest];
        alive[smallest] = false;
        for r in redirect.iter_mut().filter(|r| **r == smallest) {
            *r = target;
        }
        log.push(MergeStep {
            source: smallest as i32,
            target: target as i32,
        });
    }

    let mut dense = vec![-1i32; count];
    let mut next = 0;
    for t in 0..count {
        if alive[t] {
            dense[t] = next;
            next += 1;
        }
    }
    let labels = assignment
        .labels
        .iter()
        .map(|&l| if l < 0 { -1 } else { dense[redirect[l as usize]] })
        .collect();
    (ClusterAssignment::new(labels), log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_when_already_small_enough() {
        let a = ClusterAssignment::new((0..40).map(|i| i % 20).collect());
        let vecs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, 1.0]).collect();
        let (out, log) = reduce_topics(&a, &vecs, 20);
        assert_eq!(out, a);
        assert!(log.is_empty());
    }

    #[test]
    fn smallest_goes_to_most_similar_centroid() {
        // A = topic 0 around (1, 0.1), B = topic 1 around (1, -0.1):
        // A and B are the closest pair. C = topic 2 (smallest) around
        // (0.8, 0.6). Hand-computed centroid cosines:
        //   cos(C, A) = (0.8 + 0.06) / (1 * |(1, 0.1)|) = 0.86 / 1.004988 = 0.85573
        //   cos(C, B) = (0.8 - 0.06) / 1.004988 = 0.73633
        //   cos(A, B) = (1 - 0.01) / 1.01 = 0.98020
        let mut labels = Vec::new();
        let mut vecs = Vec::new();
        for _ in 0..5 {
            labels.push(0);
            vecs.push(vec![1.0, 0.1]);
            labels.push(1);
            vecs.push(vec![1.0, -0.1]);
        }
        for _ in 0..3 {
            labels.push(2);
            vecs.push(vec![0.8, 0.6]);
        }
        labels.push(-1);
        vecs.push(vec![0.0, 1.0]);
        let (out, log) = reduce_topics(&ClusterAssignment::new(labels), &vecs, 2);
        assert_eq!(log, [MergeStep { source: 2, target: 0 }]);
        assert_eq!(out.topic_count(), 2);
        assert!(out.labels[10..13].iter().all(|&l| l == 0));
        assert_eq!(*out.labels.last().unwrap(), -1);
    }

    #[test]
    fn k_one_collapses_everything_but_outliers() {
        let labels = vec![0, 1, 2, 3, -1, 2, 1];
        let vecs: Vec<Vec<f64>> = (0..7).map(|i| vec![1.0, i as f64]).collect();
        let (out, log) = reduce_topics(&ClusterAssignment::new(labels), &vecs, 1);
        assert_eq!(out.labels, vec![0, 0, 0, 0, -1, 0, 0]);
        assert_eq!(log.len(), 3);
    }
}
