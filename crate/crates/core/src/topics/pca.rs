//! PCA projection used as the dimensionality-reduction step before clustering.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub points: Vec<Vec<f64>>,
    /// Set when every input vector was identical; `points` are then all zero.
    pub degenerate: bool,
}

/// Projects mean-centred vectors onto their top `reduced_dim` principal axes.
///
/// The axes are the right singular vectors of the centred data, obtained from
/// the eigen-decomposition of its scatter matrix. Each axis is oriented so its
/// largest-magnitude loading is positive. `_seed` is accepted so stochastic
/// reducers can share the signature; PCA itself is deterministic.
pub fn reduce_dims(vectors: &[Vec<f64>], reduced_dim: usize, _seed: u64) -> Result<Reduction> {
    let n = vectors.len();
    let dim = vectors.first().map_or(0, Vec::len);
    if reduced_dim == 0 || reduced_dim > dim {
        return Err(Error::invalid(
            "reduced_dim",
            format!("{reduced_dim} must be in 1..={dim}"),
        ));
    }
    if n < reduced_dim {
        return Err(Error::invalid(
            "reduction input",
            format!("{n} vectors cannot span {reduced_dim} dimensions"),
        ));
    }

    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    if vectors.iter().all(|v| v == &vectors[0]) {
        tracing::warn!(n, "all vectors identical; reduction is degenerate");
        return Ok(Reduction {
            points: vec![vec![0.0; reduced_dim]; n],
            degenerate: true,
        });
    }

    let centred = DMatrix::from_fn(n, dim, |i, j| vectors[i][j] - mean[j]);
    let scatter = centred.tr_mul(&centred);
    let eigen = SymmetricEigen::new(scatter);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .total_cmp(&eigen.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut basis = DMatrix::zeros(dim, reduced_dim);
    for (col, &axis) in order.iter().take(reduced_dim).enumerate() {
        let v = eigen.eigenvectors.column(axis);
        let pivot = (0..dim)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .expect("dim > 0");
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        basis.set_column(col, &(v * sign));
    }

    let projected = centred * basis;
    let points = (0..n)
        .map(|i| projected.row(i).iter().copied().collect())
        .collect();
    Ok(Reduction {
        points,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};

    use super::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn collinear_points_keep_distances_and_match_svd() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 2.5, 4.0, 7.0]
            .iter()
            .map(|&t| vec![1.0 + 3.0 * t, -2.0 + 4.0 * t])
            .collect();
        let r = reduce_dims(&pts, 1, 0).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let d0 = dist(&pts[i], &pts[j]);
                let d1 = (r.points[i][0] - r.points[j][0]).abs();
                assert!((d0 - d1).abs() < 1e-9);
            }
        }
        // Oracle: thin SVD of the centred data; first left singular vector
        // times its singular value is the first principal coordinate.
        let n = pts.len();
        let mean = [
            pts.iter().map(|p| p[0]).sum::<f64>() / n as f64,
            pts.iter().map(|p| p[1]).sum::<f64>() / n as f64,
        ];
        let x = DMatrix::from_fn(n, 2, |i, j| pts[i][j] - mean[j]);
        let svd = x.svd(true, true);
        let v_t = svd.v_t.unwrap();
        let (k, _) = v_t.row(0).iamax_full();
        let sign = v_t[(0, k)].signum();
        let u = svd.u.unwrap();
        for i in 0..n {
            let oracle = u[(i, 0)] * svd.singular_values[0] * sign;
            assert!((oracle - r.points[i][0]).abs() < 1e-9);
        }
    }

    #[test]
    fn full_rank_projection_is_a_rotation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..6).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let r = reduce_dims(&pts, 6, 0).unwrap();
        for i in 0..pts.len() {
            for j in 0..i {
                assert!((dist(&pts[i], &pts[j]) - dist(&r.points[i], &r.points[j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_and_identical_input_flagged() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64 % 7.0, 1.0]).collect();
        assert_eq!(reduce_dims(&pts, 2, 5).unwrap(), reduce_dims(&pts, 2, 5).unwrap());
        let same = vec![vec![0.3, 0.4, 0.5]; 10];
        let r = reduce_dims(&same, 2, 0).unwrap();
        assert!(r.degenerate);
        assert!(r.points.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let pts = vec![vec![0.0, 1.0]; 3];
        assert!(reduce_dims(&pts, 3, 0).is_err());
        assert!(reduce_dims(&pts[..1], 2, 0).is_err());
    }
}
