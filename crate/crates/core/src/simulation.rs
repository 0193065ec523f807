//! Monte Carlo estimation of Type I error rates for the treatment test when
//! subjects are clustered in families.
//!
//! Each simulated dataset has two treatment groups of `n_per_group`
//! subjects. A `singleton_fraction` of each group are singletons; the rest
//! form pairs that share a random family intercept `u ~ N(0, sigma_u²)`.
//! In the homogeneous layout both members of a pair sit in the same group;
//! in the heterogeneous layout each pair has one exposed and one control
//! member. The response is
//! `y = beta0 + beta1·x1 + beta2·x2 + u + e` with `x1 ~ N(0, 1)`.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{self, ClusterStructure, Scenario};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::inference;
use crate::lm::{self, X2};
use crate::rng::{self, derive_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical t-test from the OLS fit.
    #[serde(alias = "lm", alias = "ols")]
    OlsT,
    /// Unrestricted treatment permutation, ignoring families.
    #[serde(alias = "naive")]
    NaivePermutation,
    /// Treatment permutation restricted to the true family structure.
    #[serde(alias = "correct")]
    CorrectPermutation,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::OlsT => "lm",
            Method::NaivePermutation => "naive permutation",
            Method::CorrectPermutation => "correct permutation",
        }
    }
}

/// Distribution of the subject-level error `e`, scaled to standard deviation `sigma_e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorDistribution {
    #[default]
    Normal,
    /// Centered unit exponential (skewness 2).
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Row label; defaults to `"<method> <scenario>"`.
    pub label: Option<String>,
    pub n_per_group: usize,
    pub scenario: Scenario,
    pub singleton_fraction: f64,
    pub method: Method,
    pub simulations: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub sigma_u: f64,
    pub sigma_e: f64,
    pub errors: ErrorDistribution,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            label: None,
            n_per_group: 20,
            scenario: Scenario::Independent,
            singleton_fraction: 0.5,
            method: Method::OlsT,
            simulations: 2000,
            permutations: 2000,
            alpha: 0.05,
            beta0: 0.0,
            beta1: 1.0,
            beta2: 0.0,
            sigma_u: 2.0,
            sigma_e: 1.0,
            errors: ErrorDistribution::Normal,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("{} {}", self.method.label(), self.scenario))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("{}: {msg}", self.label())));
        if self.beta2 != 0.0 {
            return bad("beta2 must be 0 when estimating Type I error");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.simulations == 0 || self.permutations == 0 {
            return bad("simulations and permutations must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.singleton_fraction) {
            return bad("singleton_fraction must lie in [0, 1]");
        }
        if !(self.sigma_u >= 0.0 && self.sigma_e >= 0.0) {
            return bad("standard deviations must be nonnegative");
        }
        self.layout().map(|_| ())
    }

    /// Number of singletons per treatment group.
    fn singles_per_group(&self) -> usize {
        match self.scenario {
            Scenario::Independent => self.n_per_group,
            _ => (self.n_per_group as f64 * self.singleton_fraction).round() as usize,
        }
    }

    /// Family index and treatment of every subject, exposed group first.
    pub fn layout(&self) -> Result<Vec<(usize, u8)>> {
        let n = self.n_per_group;
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "{}: n_per_group must be at least 2",
                self.label()
            )));
        }
        let singles = self.singles_per_group();
        let paired = n - singles;
        let mut rows = Vec::with_capacity(2 * n);
        let mut family = 0;
        for treatment in [1u8, 0] {
            for _ in 0..singles {
                rows.push((family, treatment));
                family += 1;
            }
        }
        match self.scenario {
            Scenario::Independent => {}
            Scenario::Homogeneous => {
                if paired % 2 != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "{}: {paired} paired subjects per group cannot form whole families",
                        self.label()
                    )));
                }
                for treatment in [1u8, 0] {
                    for _ in 0..paired / 2 {
                        rows.push((family, treatment));
                        rows.push((family, treatment));
                        family += 1;
                    }
                }
            }
            Scenario::Heterogeneous => {
                for _ in 0..paired {
                    rows.push((family, 1));
                    rows.push((family, 0));
                    family += 1;
                }
            }
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Conservative,
    Matches,
    Anticonservative,
}

impl Classification {
    /// Where `alpha` falls relative to the interval `(low, high)`.
    pub fn of(alpha: f64, ci: (f64, f64)) -> Self {
        if ci.1 < alpha {
            Classification::Conservative
        } else if ci.0 > alpha {
            Classification::Anticonservative
        } else {
            Classification::Matches
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Conservative => "conservative",
            Classification::Matches => "matches desired alpha level",
            Classification::Anticonservative => "anticonservative",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub label: String,
    pub method: Method,
    pub scenario: Scenario,
    pub simulations: usize,
    pub permutations: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub ci: (f64, f64),
    pub classification: Classification,
}

/// Confidence level of the interval reported with each rejection rate.
pub const CI_LEVEL: f64 = 0.95;

fn error_draw<R: Rng + ?Sized>(dist: ErrorDistribution, rng: &mut R) -> f64 {
    match dist {
        ErrorDistribution::Normal => StandardNormal.sample(rng),
        ErrorDistribution::Exponential => {
            let e: f64 = Exp1.sample(rng);
            e - 1.0
        }
    }
}

/// One dataset under the configured layout, with family labels attached.
pub fn generate_dataset<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<Dataset> {
    let rows = config.layout()?;
    let families = rows.iter().map(|r| r.0).max().map_or(0, |m| m + 1);
    let u: Vec<f64> = (0..families)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            config.sigma_u * z
        })
        .collect();
    let mut y = Vec::with_capacity(rows.len());
    let mut x1 = Vec::with_capacity(rows.len());
    let mut x2 = Vec::with_capacity(rows.len());
    for &(fam, treat) in &rows {
        let x: f64 = StandardNormal.sample(rng);
        let e = config.sigma_e * error_draw(config.errors, rng);
        let t = f64::from(treat);
        y.push(config.beta0 + config.beta1 * x + config.beta2 * t + u[fam] + e);
        x1.push(x);
        x2.push(t);
    }
    let ids = rows.iter().map(|r| format!("f{:05}", r.0)).collect();
    Dataset::new(y, x1, x2)?.with_families(ids)
}

fn p_value(config: &SimConfig, data: &Dataset, perm_seed: u64) -> Result<f64> {
    let structure = match config.method {
        Method::OlsT => return inference::ols_p_value(&lm::fit_full(data)?, X2),
        Method::NaivePermutation => ClusterStructure::independent(data.x2())?,
        Method::CorrectPermutation => ClusterStructure::from_dataset(data, config.scenario)?,
    };
    let null = cluster::cluster_null_distribution(data, &structure, config.permutations, perm_seed)?;
    inference::permutation_p_value(null.t_obs, &null)
}

/// p-value of simulation `index`. Its dataset reads stream
/// `(derive_seed(seed, "data", 0), index)` and its permutations use seed
/// `derive_seed(seed, "perm", index)`.
pub fn simulate_once(config: &SimConfig, index: usize) -> Result<f64> {
    let mut rng = rng::stream(derive_seed(config.seed, "data", 0), index as u64);
    let data = generate_dataset(config, &mut rng)?;
    p_value(config, &data, derive_seed(config.seed, "perm", index as u64))
}

pub fn run_scenario(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let p_values = (0..config.simulations)
        .into_par_iter()
        .map(|s| {
            simulate_once(config, s).map_err(|e| Error::Simulation {
                index: s,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let rejections = p_values.iter().filter(|p| **p <= config.alpha).count();
    let ci = inference::proportion_ci(rejections, config.simulations, CI_LEVEL);
    Ok(SimResult {
        label: config.label(),
        method: config.method,
        scenario: config.scenario,
        simulations: config.simulations,
        permutations: if config.method == Method::OlsT { 0 } else { config.permutations },
        rejections,
        rejection_rate: rejections as f64 / config.simulations as f64,
        ci,
        classification: Classification::of(config.alpha, ci),
    })
}

/// One row of a comparison table; a failed configuration keeps its label
/// and carries the error message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRow {
    pub label: String,
    #[serde(flatten)]
    pub outcome: SimOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimOutcome {
    Ok(SimResult),
    Error(String),
}

pub fn compare_methods(configs: &[SimConfig]) -> Vec<SimRow> {
    configs
        .iter()
        .map(|c| SimRow {
            label: c.label(),
            outcome: match run_scenario(c) {
                Ok(r) => SimOutcome::Ok(r),
                Err(e) => SimOutcome::Error(e.to_string()),
            },
        })
        .collect()
}

/// The eight lm / permutation rows of the clustering comparison, sharing
/// every parameter of `base` except method and scenario.
pub fn clustering_rows(base: &SimConfig) -> Vec<SimConfig> {
    use Method::*;
    use Scenario::*;
    [
        (OlsT, Independent),
        (CorrectPermutation, Independent),
        (OlsT, Homogeneous),
        (NaivePermutation, Homogeneous),
        (CorrectPermutation, Homogeneous),
        (OlsT, Heterogeneous),
        (NaivePermutation, Heterogeneous),
        (CorrectPermutation, Heterogeneous),
    ]
    .into_iter()
    .map(|(method, scenario)| SimConfig {
        label: None,
        method,
        scenario,
        ..base.clone()
    })
    .collect()
}
