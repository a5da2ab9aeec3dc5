use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx).
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta, evaluated by modified Lentz.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..20_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` for `a, b > 0`, `x ∈ [0, 1]`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// `P(T > t)` for Student's t with `df` degrees of freedom.
pub fn t_sf(t: f64, df: f64) -> Result<f64> {
    if !(df >= 1.0) {
        return Err(Error::Domain(format!("degrees of freedom must be at least 1, got {df}")));
    }
    if t.is_nan() {
        return Err(Error::Domain("t statistic is NaN".into()));
    }
    let tail = if t.is_infinite() {
        0.0
    } else {
        0.5 * regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    };
    Ok(if t >= 0.0 { tail } else { 1.0 - tail })
}

/// Two-sided p-value `2 · P(T > |t|)`.
pub fn two_sided_p(t: f64, df: f64) -> Result<f64> {
    Ok((2.0 * t_sf(t.abs(), df)?).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn t_sf_at_zero_is_half() {
        for df in [1.0, 2.5, 10.0, 1e4] {
            assert_eq!(t_sf(0.0, df).unwrap(), 0.5);
        }
    }

    #[test]
    fn cauchy_closed_form() {
        // df = 1 is the Cauchy distribution: sf(t) = 1/2 − atan(t)/π.
        for t in [0.3, 1.0, 4.0, 30.0] {
            let expected = 0.5 - f64::atan(t) / std::f64::consts::PI;
            assert!((t_sf(t, 1.0).unwrap() - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn df2_closed_form() {
        // df = 2: sf(t) = 1/2 − t / (2 sqrt(2 + t²)).
        for t in [0.5f64, 2.0, 9.0] {
            let expected = 0.5 - t / (2.0 * (2.0 + t * t).sqrt());
            assert!((t_sf(t, 2.0).unwrap() - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn domain_and_infinite() {
        assert!(matches!(t_sf(1.0, 0.5), Err(Error::Domain(_))));
        assert!(t_sf(1.0, f64::NAN).is_err());
        assert_eq!(t_sf(f64::INFINITY, 3.0).unwrap(), 0.0);
        assert_eq!(t_sf(f64::NEG_INFINITY, 3.0).unwrap(), 1.0);
        assert_eq!(two_sided_p(f64::INFINITY, 3.0).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn symmetry(t in -50.0f64..50.0, df in 1.0f64..500.0) {
            let a = t_sf(-t, df).unwrap();
            let b = 1.0 - t_sf(t, df).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn p_in_unit_interval_and_monotone(t in 0.0f64..20.0, dt in 0.0f64..5.0, df in 1.0f64..200.0) {
            let p1 = two_sided_p(t, df).unwrap();
            let p2 = two_sided_p(t + dt, df).unwrap();
            prop_assert!((0.0..=1.0).contains(&p1));
            prop_assert!(p2 <= p1 + 1e-15);
        }
    }
}
