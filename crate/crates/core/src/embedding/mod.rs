//! One vector per opinion unit, from a remote endpoint or a precomputed file.

mod provider;
mod store;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use provider::{embed_units, embed_with, HttpEmbedder, ProviderConfig, ProviderSource, TextEmbedder};
pub use store::{load_vectors, save_vectors, VectorFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub unit_id: String,
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Scales to unit L2 norm. Zero vectors are left untouched.
pub fn normalize(values: &mut [f32]) {
    let norm = values
        .iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt();
    if norm > 0.0 {
        for v in values.iter_mut() {
            *v = (f64::from(*v) / norm) as f32;
        }
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Enforces one shared dimension and finite values.
pub fn check_vectors(vectors: &[EmbeddingVector]) -> Result<usize> {
    let Some(first) = vectors.first() else {
        return Ok(0);
    };
    let dim = first.dim();
    if dim == 0 {
        return Err(Error::invalid("embedding", "zero-length vector"));
    }
    for (index, v) in vectors.iter().enumerate() {
        if v.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: v.dim(),
                index,
            });
        }
        if v.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(
                "embedding",
                format!("non-finite value in vector for {}", v.unit_id),
            ));
        }
    }
    Ok(dim)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn cosine_of_normalized_vectors_is_bounded(
            a in prop::collection::vec(-100.0f32..100.0, 8),
            b in prop::collection::vec(-100.0f32..100.0, 8),
        ) {
            let (mut a, mut b) = (a, b);
            normalize(&mut a);
            normalize(&mut b);
            let a: Vec<f64> = a.iter().map(|&x| x.into()).collect();
            let b: Vec<f64> = b.iter().map(|&x| x.into()).collect();
            let c = cosine(&a, &b);
            prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&c));
        }
    }

    #[test]
    fn mixed_dims_rejected() {
        let vs = [
            EmbeddingVector { unit_id: "a".into(), values: vec![1.0, 0.0] },
            EmbeddingVector { unit_id: "b".into(), values: vec![1.0] },
        ];
        assert!(matches!(check_vectors(&vs), Err(Error::DimMismatch { index: 1, .. })));
    }
}
