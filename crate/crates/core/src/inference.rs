//! p-values, the Student-t distribution, and binomial proportion intervals.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::lm::{self, FitResult};
use crate::schemes::NullDistribution;

/// Draws within this relative distance of `|t_obs|` count as ties, so that
/// values equal up to rounding are counted as "at least as extreme".
pub const TIE_TOLERANCE: f64 = 1e-12;

const BETA_CF_MAX_ITER: usize = 50_000;
const BETA_CF_EPS: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub method: String,
    pub t_obs: f64,
    pub p_value: f64,
    /// Number of null draws; 0 for the classical t-test.
    pub permutations: usize,
    pub seed: Option<u64>,
}

/// Two-sided permutation p-value of `t_obs` against `null`.
///
/// Sampled distributions use `(1 + #{|t*| >= |t_obs|}) / (B + 1)`. A fully
/// enumerated distribution already contains the identity permutation, so its
/// p-value is the exact proportion `#{|t*| >= |t_obs|} / B`.
pub fn permutation_p_value(t_obs: f64, null: &NullDistribution) -> Result<f64> {
    p_value_from_draws(t_obs, &null.t_stars, null.exhaustive)
}

pub fn p_value_from_draws(t_obs: f64, draws: &[f64], exhaustive: bool) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let threshold = t_obs.abs() * (1.0 - TIE_TOLERANCE);
    let extreme = draws.iter().filter(|t| t.abs() >= threshold).count();
    let b = draws.len();
    Ok(if exhaustive {
        extreme as f64 / b as f64
    } else {
        (extreme + 1) as f64 / (b + 1) as f64
    })
}

/// Regularized incomplete beta `I_x(a, b)`, with `y = 1 - x` supplied by the
/// caller so that neither tail loses precision to cancellation.
fn beta_reg(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * y.ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, y) / b
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let tiny = f64::MIN_POSITIVE / f64::EPSILON;
    let guard = |v: f64| if v.abs() < tiny { tiny } else { v };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < BETA_CF_EPS {
            break;
        }
    }
    h
}

/// `P(|T| >= |t|)` for `T ~ t(df)`, i.e. `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn t_two_sided(t: f64, df: usize) -> f64 {
    let nu = df as f64;
    let t2 = t * t;
    beta_reg(nu / 2.0, 0.5, nu / (nu + t2), t2 / (nu + t2)).clamp(0.0, 1.0)
}

/// Student-t cumulative distribution function.
pub fn t_cdf(t: f64, df: usize) -> f64 {
    assert!(df >= 1, "t_cdf needs df >= 1");
    let tail = 0.5 * t_two_sided(t, df);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Classical two-sided t-test of `coefficient[index] = 0`.
pub fn ols_p_value(fit: &FitResult, index: usize) -> Result<f64> {
    let t = lm::t_statistic(fit, index, 0.0)?;
    Ok(t_two_sided(t, fit.df))
}

/// Wilson score interval for `successes / trials` at confidence `level`.
///
/// With `trials == 0` the interval is `(0, 1)`.
pub fn proportion_ci(successes: usize, trials: usize, level: f64) -> (f64, f64) {
    assert!(successes <= trials, "successes exceed trials");
    assert!(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (low, high)
}
