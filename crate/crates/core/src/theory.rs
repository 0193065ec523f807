//! Numerical checks of two approximations behind the residual schemes.
//!
//! * Under reduced-model residual permutation, `y* = ŷ_reduced + r∘π`
//!   inherits correlation with `x2` through `x1`:
//!   `ρ(y*, x2) ≈ b1·ρ(x1,x2)·sd(x1) / sqrt(2·b1·[(b1 - β12)·var(x1) - β21·cov(x1,x2)] + var(y))`.
//! * Under full-model residual permutation the slope draws `b*` and the
//!   residual-bootstrap draws `b⁺` share the mean `b`, with
//!   `var(b⁺) = (1 - 1/n)·var(b*)`.
//! * The ter Braak statistic `(b* - b)/SE*` should follow the same law as
//!   `(b - β)/SE` across repeated samples.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lm::{self, X2};
use crate::rng::{self, derive_seed};
use crate::schemes::{self, Permutation, PermutationScheme};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoInputs {
    /// Slope of the reduced model `y ~ x1`.
    pub b1: f64,
    pub beta12: f64,
    pub beta21: f64,
    pub var_x1: f64,
    pub var_x2: f64,
    pub var_y: f64,
    pub rho_x1x2: f64,
}

impl RhoInputs {
    /// Plug-in values from a dataset: the reduced slope, full-model slopes
    /// standing in for `β12` and `β21`, and sample moments.
    pub fn estimate(data: &Dataset) -> Result<Self> {
        let reduced = lm::fit_reduced(data)?;
        let full = lm::fit_full(data)?;
        Ok(RhoInputs {
            b1: reduced.coefficients[1],
            beta12: full.coefficients[1],
            beta21: full.coefficients[X2],
            var_x1: stats::variance(data.x1()),
            var_x2: stats::variance(data.x2()),
            var_y: stats::variance(data.y()),
            rho_x1x2: stats::pearson(data.x1(), data.x2()),
        })
    }

    /// Approximate `var(y*)`.
    pub fn radicand(&self) -> f64 {
        let cov12 = self.rho_x1x2 * (self.var_x1 * self.var_x2).sqrt();
        2.0 * self.b1 * ((self.b1 - self.beta12) * self.var_x1 - self.beta21 * cov12) + self.var_y
    }
}

/// Approximate correlation between reduced-residual `y*` and `x2`.
pub fn rho_ystar_x2(inputs: &RhoInputs) -> Result<f64> {
    let ok = inputs.var_x1 > 0.0 && inputs.var_x2 > 0.0 && inputs.var_y > 0.0 && inputs.rho_x1x2.abs() <= 1.0;
    if !ok {
        return Err(Error::InvalidConfig(
            "variances must be positive and |rho_x1x2| <= 1".into(),
        ));
    }
    let radicand = inputs.radicand();
    if !(radicand > 0.0) {
        return Err(Error::InvalidRegime { radicand });
    }
    Ok(inputs.b1 * inputs.rho_x1x2 * inputs.var_x1.sqrt() / radicand.sqrt())
}

/// Average sample correlation between `x2` and `b` reduced-residual `y*` vectors.
pub fn monte_carlo_rho(data: &Dataset, b: usize, seed: u64) -> Result<f64> {
    if b == 0 {
        return Err(Error::NoPermutations);
    }
    let reduced = lm::fit_reduced(data)?;
    let n = data.len();
    let rhos: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|i| {
            let perm = Permutation::random(n, &mut rng::stream(seed, i as u64));
            let y_star: Vec<f64> = perm
                .indices()
                .iter()
                .zip(&reduced.fitted)
                .map(|(&j, f)| f + reduced.residuals[j])
                .collect();
            stats::pearson(&y_star, data.x2())
        })
        .collect();
    Ok(rhos.iter().sum::<f64>() / b as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub mean_perm: f64,
    pub mean_boot: f64,
    pub var_perm: f64,
    pub var_boot: f64,
    pub n: usize,
    /// Draws per method.
    pub b: usize,
    /// Original-data estimate the draws are centered on.
    pub b21: f64,
}

impl MomentCheck {
    /// Monte Carlo standard errors of `(mean_perm, mean_boot)`.
    pub fn mean_standard_errors(&self) -> (f64, f64) {
        let b = self.b as f64;
        ((self.var_perm / b).sqrt(), (self.var_boot / b).sqrt())
    }

    pub fn variance_ratio(&self) -> f64 {
        self.var_boot / self.var_perm
    }

    /// `1 - 1/n`.
    pub fn expected_ratio(&self) -> f64 {
        1.0 - 1.0 / self.n as f64
    }
}

/// Mean and `n - 1` variance, computed about the first value so that a
/// constant sample has variance exactly zero.
fn mean_var(v: &[f64]) -> (f64, f64) {
    let shift = v[0];
    let m = v.len() as f64;
    let s1: f64 = v.iter().map(|x| x - shift).sum();
    let s2: f64 = v.iter().map(|x| (x - shift) * (x - shift)).sum();
    let var = if v.len() > 1 {
        ((s2 - s1 * s1 / m) / (m - 1.0)).max(0.0)
    } else {
        0.0
    };
    (shift + s1 / m, var)
}

/// Full-residual permutation draws of `b2*` against residual-bootstrap draws `b2⁺`.
pub fn terbraak_moment_check(data: &Dataset, b: usize, seed: u64) -> Result<MomentCheck> {
    if b == 0 {
        return Err(Error::NoPermutations);
    }
    let full = lm::fit_full(data)?;
    let n = data.len();
    let refit = |resampled: Vec<usize>| -> Result<f64> {
        let y: Vec<f64> = resampled
            .iter()
            .zip(&full.fitted)
            .map(|(&j, f)| f + full.residuals[j])
            .collect();
        Ok(lm::ols(&y, &[data.x1(), data.x2()])?.coefficients[X2])
    };
    let perm_seed = derive_seed(seed, "perm", 0);
    let boot_seed = derive_seed(seed, "boot", 0);
    let perm = (0..b)
        .into_par_iter()
        .map(|i| {
            let p = Permutation::random(n, &mut rng::stream(perm_seed, i as u64));
            refit(p.indices().to_vec()).map_err(|e| e.at_draw(i))
        })
        .collect::<Result<Vec<f64>>>()?;
    let boot = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(boot_seed, i as u64);
            refit((0..n).map(|_| r.random_range(0..n)).collect()).map_err(|e| e.at_draw(i))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean_perm, var_perm) = mean_var(&perm);
    let (mean_boot, var_boot) = mean_var(&boot);
    Ok(MomentCheck {
        mean_perm,
        mean_boot,
        var_perm,
        var_boot,
        n,
        b,
        b21: full.coefficients[X2],
    })
}

/// Generator for `y = beta0 + beta12·x1 + beta21·x2 + sigma·e` in which the
/// sample correlation of `x1` and `x2` equals `rho` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelatedDesign {
    pub n: usize,
    pub rho: f64,
    pub beta0: f64,
    pub beta12: f64,
    pub beta21: f64,
    pub sigma: f64,
}

impl CorrelatedDesign {
    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        if self.n < 4 || self.rho.abs() > 1.0 {
            return Err(Error::InvalidConfig("need n >= 4 and |rho| <= 1".into()));
        }
        let mut rng = rng::stream(seed, 0);
        let mut normals = |k: usize| -> Vec<f64> { (0..k).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let a = standardize(&normals(self.n));
        let z = standardize(&normals(self.n));
        // Remove the component of z along a, then restandardize.
        let proj = stats::dot(&z, &a) / stats::dot(&a, &a);
        let z_perp: Vec<f64> = z.iter().zip(&a).map(|(zi, ai)| zi - proj * ai).collect();
        let z_perp = standardize(&z_perp);
        let s = (1.0 - self.rho * self.rho).sqrt();
        let x2: Vec<f64> = a.iter().zip(&z_perp).map(|(ai, zi)| self.rho * ai + s * zi).collect();
        let e = normals(self.n);
        let y: Vec<f64> = (0..self.n)
            .map(|i| self.beta0 + self.beta12 * a[i] + self.beta21 * x2[i] + self.sigma * e[i])
            .collect();
        Dataset::new(y, a, x2)
    }
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let m = stats::mean(v);
    let sd = stats::variance(v).sqrt();
    v.iter().map(|x| (x - m) / sd).collect()
}

/// Kolmogorov–Smirnov distance between the full-residual permutation
/// distribution of `(b* - b)/SE*` on one dataset and the sampling
/// distribution of `(b - β21)/SE` over `draws` fresh datasets.
pub fn cdf_agreement(design: &CorrelatedDesign, draws: usize, seed: u64) -> Result<f64> {
    let observed = design.generate(derive_seed(seed, "observed", 0))?;
    let null = schemes::null_distribution(
        PermutationScheme::FullResiduals,
        &observed,
        draws,
        derive_seed(seed, "perm", 0),
    )?;
    let sampling = (0..draws)
        .into_par_iter()
        .map(|k| {
            let d = design.generate(derive_seed(seed, "sample", k as u64))?;
            lm::t_statistic(&lm::fit_full(&d)?, X2, design.beta21)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(stats::ks_two_sample(&null.t_stars, &sampling))
}

/// One verification check and whether it met its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub tolerance_rho: f64,
    pub tolerance_var: f64,
    pub tolerance_ks: f64,
    pub rho_grid: Vec<f64>,
    pub rho_n: usize,
    pub rho_draws: usize,
    pub moment_n: usize,
    pub moment_draws: usize,
    /// Multiple of the Monte Carlo standard error allowed for the means.
    pub moment_se_multiple: f64,
    pub cdf_n: usize,
    pub cdf_draws: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 1,
            tolerance_rho: 0.05,
            tolerance_var: 0.05,
            tolerance_ks: 0.05,
            rho_grid: vec![0.0, 0.3, -0.3, 0.8, -0.8],
            rho_n: 5000,
            rho_draws: 2000,
            moment_n: 50,
            moment_draws: 20_000,
            moment_se_multiple: 4.0,
            cdf_n: 100,
            cdf_draws: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub options: VerifyOptions,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Formula-vs-simulation agreement for `ρ(y*, x2)` at one `ρ(x1, x2)`.
/// The nominal `rho` is plugged into the formula, which is exact for data
/// from [`CorrelatedDesign`].
pub fn rho_check(rho: f64, n: usize, draws: usize, seed: u64) -> Result<(f64, f64)> {
    let design = CorrelatedDesign {
        n,
        rho,
        beta0: 0.0,
        beta12: 1.0,
        beta21: 0.0,
        sigma: 1.0,
    };
    let data = design.generate(derive_seed(seed, "rho-data", rho.to_bits()))?;
    let inputs = RhoInputs {
        rho_x1x2: rho,
        ..RhoInputs::estimate(&data)?
    };
    let formula = rho_ystar_x2(&inputs)?;
    let simulated = monte_carlo_rho(&data, draws, derive_seed(seed, "rho-perm", rho.to_bits()))?;
    Ok((formula, simulated))
}

pub fn verify(options: &VerifyOptions) -> Result<VerificationReport> {
    let mut checks = Vec::new();
    for &rho in &options.rho_grid {
        let (formula, simulated) = rho_check(rho, options.rho_n, options.rho_draws, options.seed)?;
        checks.push(Check {
            name: format!("rho(y*, x2) formula vs simulation at rho(x1, x2) = {rho}"),
            value: formula,
            reference: simulated,
            tolerance: options.tolerance_rho,
            pass: (formula - simulated).abs() <= options.tolerance_rho,
        });
        if rho == 0.0 {
            checks.push(Check {
                name: "rho(y*, x2) formula at rho(x1, x2) = 0".into(),
                value: formula,
                reference: 0.0,
                tolerance: 0.0,
                pass: formula == 0.0,
            });
        }
    }

    let moment_design = CorrelatedDesign {
        n: options.moment_n,
        rho: 0.3,
        beta0: 1.0,
        beta12: 1.0,
        beta21: 0.5,
        sigma: 1.0,
    };
    let data = moment_design.generate(derive_seed(options.seed, "moment-data", 0))?;
    let m = terbraak_moment_check(&data, options.moment_draws, derive_seed(options.seed, "moment", 0))?;
    let (se_perm, se_boot) = m.mean_standard_errors();
    let k = options.moment_se_multiple;
    checks.push(Check {
        name: "permutation mean of b2* equals b2".into(),
        value: m.mean_perm,
        reference: m.b21,
        tolerance: k * se_perm,
        pass: (m.mean_perm - m.b21).abs() <= k * se_perm,
    });
    checks.push(Check {
        name: "bootstrap mean of b2+ equals b2".into(),
        value: m.mean_boot,
        reference: m.b21,
        tolerance: k * se_boot,
        pass: (m.mean_boot - m.b21).abs() <= k * se_boot,
    });
    checks.push(Check {
        name: "var(b2+) / var(b2*) equals 1 - 1/n".into(),
        value: m.variance_ratio(),
        reference: m.expected_ratio(),
        tolerance: options.tolerance_var,
        pass: (m.variance_ratio() - m.expected_ratio()).abs() <= options.tolerance_var,
    });

    let cdf_design = CorrelatedDesign {
        n: options.cdf_n,
        rho: 0.3,
        beta0: 1.0,
        beta12: 1.0,
        beta21: 0.5,
        sigma: 1.0,
    };
    let ks = cdf_agreement(&cdf_design, options.cdf_draws, derive_seed(options.seed, "cdf", 0))?;
    checks.push(Check {
        name: "KS distance, permutation t* vs sampling t".into(),
        value: ks,
        reference: 0.0,
        tolerance: options.tolerance_ks,
        pass: ks < options.tolerance_ks,
    });

    Ok(VerificationReport {
        options: options.clone(),
        checks,
    })
}
