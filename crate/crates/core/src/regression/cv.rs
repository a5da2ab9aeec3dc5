use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ols_fit, FeatureMatrix, SIGNIFICANCE_LEVEL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    /// `None` when the hold-out target is constant.
    pub r_squared: Option<f64>,
    pub rmse: f64,
    pub significant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Mean over folds with a defined R².
    pub mean_r_squared: Option<f64>,
    pub mean_rmse: f64,
    pub mean_significant: f64,
    /// Folds excluded from the R² mean because their target was constant.
    pub constant_target_folds: Vec<usize>,
}

/// Seeded shuffle of `0..n` cut into `k` folds whose sizes differ by at most one.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    folds
}

/// Fits on all folds but one and scores the held-out fold, for each fold.
pub fn kfold_cv(matrix: &FeatureMatrix, k: usize, seed: u64) -> Result<CrossValReport> {
    let n = matrix.n_rows();
    if k < 2 || n < 2 * k {
        return Err(Error::InsufficientData { n, params: 2 * k.max(2) });
    }
    let folds = fold_indices(n, k, seed);
    let results: Vec<FoldResult> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let mut in_test = vec![false; n];
            test.iter().for_each(|&i| in_test[i] = true);
            let (train_x, train_y): (Vec<Vec<f64>>, Vec<f64>) = (0..n)
                .filter(|&i| !in_test[i])
                .map(|i| (matrix.rows[i].clone(), matrix.target[i]))
                .unzip();
            let fit = ols_fit(&train_x, &train_y)?;
            let y: Vec<f64> = test.iter().map(|&i| matrix.target[i]).collect();
            let pred: Vec<f64> = test.iter().map(|&i| fit.predict(&matrix.rows[i])).collect();
            let sse: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b).powi(2)).sum();
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            Ok(FoldResult {
                fold: f,
                train_size: train_y.len(),
                test_size: y.len(),
                r_squared: (sst > 0.0).then(|| 1.0 - sse / sst),
                rmse: (sse / y.len() as f64).sqrt(),
                significant: fit.significant_count(SIGNIFICANCE_LEVEL),
            })
        })
        .collect::<Result<_>>()?;

    let defined: Vec<f64> = results.iter().filter_map(|r| r.r_squared).collect();
    Ok(CrossValReport {
        k,
        seed,
        mean_r_squared: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
        mean_rmse: results.iter().map(|r| r.rmse).sum::<f64>() / k as f64,
        mean_significant: results.iter().map(|r| r.significant as f64).sum::<f64>() / k as f64,
        constant_target_folds: results.iter().filter(|r| r.r_squared.is_none()).map(|r| r.fold).collect(),
        folds: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::FeatureMode;
    use proptest::prelude::*;

    fn matrix(rows: Vec<Vec<f64>>, target: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix {
            mode: FeatureMode::WithSentiment,
            review_ids: (0..rows.len()).map(|i| i.to_string()).collect(),
            topic_ids: (0..rows[0].len()).collect(),
            rows,
            target,
        }
    }

    #[test]
    fn ten_rows_five_folds_of_two() {
        let folds = fold_indices(10, 5, 3);
        assert!(folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn realizable_model_has_unit_r2() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, ((i * 7) % 11) as f64]).collect();
        let y = rows.iter().map(|r| 1.5 + 0.5 * r[0] - 2.0 * r[1]).collect();
        let report = kfold_cv(&matrix(rows, y), 5, 1).unwrap();
        assert!((report.mean_r_squared.unwrap() - 1.0).abs() < 1e-9);
        assert!(report.constant_target_folds.is_empty());
    }

    #[test]
    fn constant_fold_is_flagged() {
        // Target is constant on every row except one, so most hold-out folds are constant.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let mut y = vec![3.0; 10];
        y[4] = 5.0;
        let report = kfold_cv(&matrix(rows, y), 5, 0).unwrap();
        assert_eq!(report.constant_target_folds.len(), 4);
        assert!(report.mean_r_squared.is_some());
    }

    #[test]
    fn too_few_rows() {
        let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
        assert!(kfold_cv(&matrix(rows, vec![0.0; 9]), 5, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition(n in 1usize..200, k in 1usize..12, seed in any::<u64>()) {
            let folds = fold_indices(n, k, seed);
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut all = folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
