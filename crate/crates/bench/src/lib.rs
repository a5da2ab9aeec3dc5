//! Seeded fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// `per_blob` Gaussian points around each of `blobs` centres spaced 10 apart
/// along the first axis, in `dim` dimensions.
pub fn blob_points(blobs: usize, per_blob: usize, dim: usize, sigma: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    (0..blobs)
        .flat_map(|b| std::iter::repeat(b).take(per_blob))
        .map(|b| {
            (0..dim)
                .map(|j| normal.sample(&mut rng) + if j == 0 { 10.0 * b as f64 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Random design rows in [1, 5] with a linear target plus unit noise.
pub fn regression_design(n: usize, p: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let betas: Vec<f64> = (0..p).map(|j| if j % 2 == 0 { 0.3 } else { -0.2 }).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(1.0..=5.0)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|r| 3.0 + r.iter().zip(&betas).map(|(x, b)| x * b).sum::<f64>() + normal.sample(&mut rng))
        .collect();
    (rows, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_centred_on_their_offsets() {
        let pts = blob_points(3, 200, 4, 0.5, 1);
        assert_eq!(pts.len(), 600);
        for (b, chunk) in pts.chunks(200).enumerate() {
            let mean = chunk.iter().map(|p| p[0]).sum::<f64>() / 200.0;
            assert!((mean - 10.0 * b as f64).abs() < 0.15, "{mean}");
        }
    }
}
