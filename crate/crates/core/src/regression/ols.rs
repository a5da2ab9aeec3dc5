use serde::{Deserialize, Serialize};

use super::student_t::two_sided_p;
use crate::error::{Error, Result};

/// A column whose residual norm falls below this fraction of its original
/// norm during factorisation is treated as linearly dependent.
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub beta: f64,
    pub se: f64,
    /// Infinite when the standard error is zero; serialized as `"inf"`/`"-inf"`.
    #[serde(with = "extended_f64")]
    pub t: f64,
    pub p: f64,
}

impl Estimate {
    fn new(beta: f64, se: f64, df: usize) -> Result<Self> {
        let t = if se > 0.0 {
            beta / se
        } else if beta == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(beta)
        };
        Ok(Self {
            beta,
            se,
            t,
            p: two_sided_p(t, df as f64)?,
        })
    }
}

/// Least-squares fit of `y = β0 + Σ βj·x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub intercept: Estimate,
    /// One entry per feature column; `None` where the column was dropped.
    pub coefficients: Vec<Option<Estimate>>,
    /// Feature columns dropped as all-zero or linearly dependent.
    pub dropped: Vec<usize>,
    pub n: usize,
    pub df: usize,
    pub sse: f64,
    /// `None` when the target is constant.
    pub r_squared: Option<f64>,
    pub rmse: f64,
}

impl RegressionFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept.beta
            + self
                .coefficients
                .iter()
                .zip(row)
                .filter_map(|(c, x)| c.map(|c| c.beta * x))
                .sum::<f64>()
    }

    pub fn significant_count(&self, level: f64) -> usize {
        self.coefficients.iter().flatten().filter(|c| c.p < level).count()
    }
}

/// Fits by Householder QR with column pivoting. The intercept is always the
/// first pivot; remaining columns are chosen by largest residual norm and
/// factorisation stops when every remaining column is numerically dependent.
///
/// `rows` holds feature values only; the intercept column is added here.
pub fn ols_fit(rows: &[Vec<f64>], y: &[f64]) -> Result<RegressionFit> {
    let n = rows.len();
    if n != y.len() {
        return Err(Error::invalid("regression input", format!("{n} rows but {} targets", y.len())));
    }
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::invalid("regression input", "rows have differing lengths"));
    }
    if rows.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression input", "non-finite value"));
    }

    // Column-major working copy: column 0 is the intercept.
    let cols = p + 1;
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(cols);
    a.push(vec![1.0; n]);
    for j in 0..p {
        a.push(rows.iter().map(|r| r[j]).collect());
    }
    let original_norm: Vec<f64> = a.iter().map(|c| norm(c)).collect();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut qty = y.to_vec();

    let mut rank = 0;
    for k in 0..cols.min(n) {
        let pivot = if k == 0 {
            Some(0)
        } else {
            (k..cols)
                .filter_map(|j| {
                    let residual = norm(&a[j][k..]);
                    let scale = original_norm[perm[j]];
                    (scale > 0.0 && residual > RANK_TOLERANCE * scale).then_some((residual, j))
                })
                .max_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)))
                .map(|(_, j)| j)
        };
        let Some(j) = pivot else { break };
        a.swap(k, j);
        perm.swap(k, j);

        let alpha = -norm(&a[k][k..]).copysign(a[k][k]);
        let mut v = a[k][k..].to_vec();
        v[0] -= alpha;
        let vv = dot(&v, &v);
        if vv > 0.0 {
            for col in a.iter_mut().skip(k + 1).chain(std::iter::once(&mut qty)) {
                let f = 2.0 * dot(&v, &col[k..]) / vv;
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
        }
        a[k][k] = alpha;
        a[k][k + 1..].fill(0.0);
        rank = k + 1;
    }

    if rank <= 1 {
        return Err(Error::RankZero);
    }
    if n <= rank {
        return Err(Error::InsufficientData { n, params: rank });
    }
    let df = n - rank;

    // R[i][j] = a[j][i] for i <= j < rank.
    let mut b = vec![0.0; rank];
    for i in (0..rank).rev() {
        let s: f64 = (i + 1..rank).map(|j| a[j][i] * b[j]).sum();
        b[i] = (qty[i] - s) / a[i][i];
    }
    // Inverse of R, row-major upper triangular.
    let mut rinv = vec![vec![0.0; rank]; rank];
    for j in 0..rank {
        rinv[j][j] = 1.0 / a[j][j];
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|m| a[m][i] * rinv[m][j]).sum();
            rinv[i][j] = -s / a[i][i];
        }
    }

    let mut beta = vec![0.0; cols];
    for (k, &col) in perm.iter().take(rank).enumerate() {
        beta[col] = b[k];
    }
    let fitted: Vec<f64> = rows
        .iter()
        .map(|r| beta[0] + r.iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>())
        .collect();
    let sse: f64 = y.iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum();
    let sigma2 = sse / df as f64;
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();

    let mut estimates: Vec<Option<Estimate>> = vec![None; cols];
    for k in 0..rank {
        let se = (sigma2 * rinv[k].iter().map(|v| v * v).sum::<f64>()).sqrt();
        estimates[perm[k]] = Some(Estimate::new(b[k], se, df)?);
    }
    let mut dropped: Vec<usize> = perm[rank..].iter().map(|c| c - 1).collect();
    dropped.sort_unstable();

    Ok(RegressionFit {
        intercept: estimates[0].expect("intercept is always the first pivot"),
        coefficients: estimates[1..].to_vec(),
        dropped,
        n,
        df,
        sse,
        r_squared: (sst > 0.0).then(|| 1.0 - sse / sst),
        rmse: (sse / n as f64).sqrt(),
    })
}

pub(crate) mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("invalid number {other:?}"))),
            },
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
