//! The four unrestricted permutation schemes for testing the `x2`
//! coefficient in `y ~ x1 + x2`.
//!
//! | scheme             | regression refit per draw                       | t*                       |
//! |--------------------|-------------------------------------------------|--------------------------|
//! | `PermuteY`         | `y∘π ~ x1 + x2`                                 | `b*/SE*`                 |
//! | `PermuteX2`        | `y ~ x1 + x2∘π`                                 | `b*/SE*`                 |
//! | `ReducedResiduals` | `(ŷ_reduced + r_reduced∘π) ~ x1 + x2`           | `b*/SE*`                 |
//! | `FullResiduals`    | `(ŷ_full + r_full∘π) ~ x1 + x2`                 | `(b* - b)/SE*`           |
//!
//! `v∘π` means `v[π[i]]` at position `i`.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::Scenario;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lm::{self, X2};
use crate::rng::{self, StreamRng};
use crate::stats;

/// Consecutive failed draws tolerated before a resampling run is abandoned.
pub const DEFAULT_MAX_RETRIES: usize = 100;

/// Switch to full enumeration when the permutation space is at most this large.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000;

/// Hard ceiling on explicitly requested enumeration (10!).
pub const MAX_EXHAUSTIVE: u64 = 3_628_800;

/// `|r(x1, x2)|` above which the reduced-residual scheme is flagged.
pub const COLLINEARITY_WARNING: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PermutationScheme {
    /// Manly: permute the response.
    PermuteY,
    /// Draper–Stoneman: permute the treatment.
    PermuteX2,
    /// Freedman–Lane: permute reduced-model residuals.
    ReducedResiduals,
    /// ter Braak: permute full-model residuals.
    FullResiduals,
}

impl PermutationScheme {
    pub const ALL: [PermutationScheme; 4] = [
        PermutationScheme::PermuteY,
        PermutationScheme::PermuteX2,
        PermutationScheme::ReducedResiduals,
        PermutationScheme::FullResiduals,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PermutationScheme::PermuteY => "manly",
            PermutationScheme::PermuteX2 => "draper-stoneman",
            PermutationScheme::ReducedResiduals => "freedman-lane",
            PermutationScheme::FullResiduals => "terbraak",
        }
    }
}

impl fmt::Display for PermutationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PermutationScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        PermutationScheme::ALL
            .into_iter()
            .find(|sch| sch.label() == s)
            .ok_or_else(|| format!("unknown permutation scheme `{s}`"))
    }
}

/// A bijection on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let n = indices.len();
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidPermutation(n));
            }
        }
        Ok(Permutation(indices))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// Uniform draw via Fisher–Yates.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        Permutation(idx)
    }

    /// `out[i] = values[self[i]]`.
    pub fn apply<T: Copy>(&self, values: &[T]) -> Vec<T> {
        self.0.iter().map(|&i| values[i]).collect()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }
}

/// All `n!` permutations in lexicographic order.
pub fn all_permutations(n: usize) -> impl Iterator<Item = Permutation> {
    (0..n).permutations(n).map(Permutation)
}

pub fn factorial(n: usize) -> Option<u64> {
    (1..=n as u64).try_fold(1u64, |acc, k| acc.checked_mul(k))
}

/// Precomputed pieces of one scheme on one dataset, reused across draws.
#[derive(Debug, Clone)]
pub struct PreparedScheme<'a> {
    scheme: PermutationScheme,
    data: &'a Dataset,
    /// Fitted values the permuted residuals are added back to.
    base: Vec<f64>,
    residuals: Vec<f64>,
    b2: f64,
    t_obs: f64,
}

impl<'a> PreparedScheme<'a> {
    pub fn new(scheme: PermutationScheme, data: &'a Dataset) -> Result<Self> {
        let full = lm::fit_full(data)?;
        let t_obs = lm::t_statistic(&full, X2, 0.0)?;
        let b2 = full.coefficients[X2];
        let (base, residuals) = match scheme {
            PermutationScheme::ReducedResiduals => {
                let reduced = lm::fit_reduced(data)?;
                (reduced.fitted, reduced.residuals)
            }
            PermutationScheme::FullResiduals => (full.fitted, full.residuals),
            _ => (Vec::new(), Vec::new()),
        };
        Ok(PreparedScheme {
            scheme,
            data,
            base,
            residuals,
            b2,
            t_obs,
        })
    }

    pub fn scheme(&self) -> PermutationScheme {
        self.scheme
    }

    pub fn t_obs(&self) -> f64 {
        self.t_obs
    }

    /// Value subtracted from `b*` in the numerator of each draw.
    pub fn center(&self) -> f64 {
        match self.scheme {
            PermutationScheme::FullResiduals => self.b2,
            _ => 0.0,
        }
    }

    /// Response vector the scheme regresses for `perm`, with `x2` in the
    /// second slot (permuted for `PermuteX2`).
    pub fn transformed(&self, perm: &Permutation) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.data.len();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                what: "permutation",
                expected: n,
                found: perm.len(),
            });
        }
        Ok(match self.scheme {
            PermutationScheme::PermuteY => (perm.apply(self.data.y()), self.data.x2().to_vec()),
            PermutationScheme::PermuteX2 => (self.data.y().to_vec(), perm.apply(self.data.x2())),
            // fitted + residuals equals y only up to rounding; use y itself.
            PermutationScheme::ReducedResiduals | PermutationScheme::FullResiduals if perm.is_identity() => {
                (self.data.y().to_vec(), self.data.x2().to_vec())
            }
            PermutationScheme::ReducedResiduals | PermutationScheme::FullResiduals => {
                let y_star = perm
                    .indices()
                    .iter()
                    .zip(&self.base)
                    .map(|(&j, b)| b + self.residuals[j])
                    .collect();
                (y_star, self.data.x2().to_vec())
            }
        })
    }

    pub fn draw(&self, perm: &Permutation) -> Result<f64> {
        let (y, x2) = self.transformed(perm)?;
        let fit = lm::ols(&y, &[self.data.x1(), &x2])?;
        lm::t_statistic(&fit, X2, self.center())
    }
}

/// One null-distribution draw `t*` for `perm`.
pub fn draw_t_star(scheme: PermutationScheme, data: &Dataset, perm: &Permutation) -> Result<f64> {
    PreparedScheme::new(scheme, data)?.draw(perm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    /// Draw permutations uniformly with replacement.
    Random,
    /// Visit every element of the permutation space once.
    Exhaustive,
    /// Enumerate when the space has at most `cap` elements, sample otherwise.
    Auto { cap: u64 },
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Auto {
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullOptions {
    pub permutations: usize,
    pub seed: u64,
    pub sampling: Sampling,
    pub max_retries: usize,
}

impl NullOptions {
    /// Random sampling of `permutations` draws.
    pub fn new(permutations: usize, seed: u64) -> Self {
        NullOptions {
            permutations,
            seed,
            sampling: Sampling::Random,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }

    pub fn sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub(crate) fn resolve_exhaustive(&self, space: Option<u64>) -> Result<bool> {
        match self.sampling {
            Sampling::Random => Ok(false),
            Sampling::Auto { cap } => Ok(matches!(space, Some(s) if s <= cap)),
            Sampling::Exhaustive => match space {
                Some(s) if s <= MAX_EXHAUSTIVE => Ok(true),
                Some(s) => Err(Error::SpaceTooLarge {
                    size: s,
                    cap: MAX_EXHAUSTIVE,
                }),
                None => Err(Error::Overflow),
            },
        }
    }
}

/// Draws `t*` under one scheme (or one cluster restriction) and the
/// observed statistic they are compared against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullDistribution {
    pub t_stars: Vec<f64>,
    pub scheme: PermutationScheme,
    /// Cluster scenario the permutations respected, if restricted.
    pub restriction: Option<Scenario>,
    pub b: usize,
    pub seed: u64,
    pub t_obs: f64,
    pub center: f64,
    /// True when `t_stars` covers the whole permutation space exactly once,
    /// less any degenerate elements.
    pub exhaustive: bool,
    /// Degenerate draws that were discarded (and redrawn, when sampling).
    pub failed_draws: usize,
}

/// `b` uniformly random permutations under `scheme`.
pub fn null_distribution(
    scheme: PermutationScheme,
    data: &Dataset,
    b: usize,
    seed: u64,
) -> Result<NullDistribution> {
    null_distribution_with(scheme, data, &NullOptions::new(b, seed))
}

pub fn null_distribution_with(
    scheme: PermutationScheme,
    data: &Dataset,
    opts: &NullOptions,
) -> Result<NullDistribution> {
    if opts.permutations == 0 {
        return Err(Error::NoPermutations);
    }
    let prepared = PreparedScheme::new(scheme, data)?;
    let n = data.len();
    let exhaustive = opts.resolve_exhaustive(factorial(n))?;

    let (t_stars, failed_draws) = if exhaustive {
        let perms: Vec<Permutation> = all_permutations(n).collect();
        enumerate_draws(&perms, scheme.label(), |p| prepared.draw(p))?
    } else {
        sample_draws(opts, scheme.label(), |rng| {
            prepared.draw(&Permutation::random(n, rng))
        })?
    };

    Ok(NullDistribution {
        b: t_stars.len(),
        t_stars,
        scheme,
        restriction: None,
        seed: opts.seed,
        t_obs: prepared.t_obs(),
        center: prepared.center(),
        exhaustive,
        failed_draws,
    })
}

/// Evaluates every element of an enumerated space. Degenerate elements are
/// skipped, matching the redraw policy of [`sample_draws`], which samples
/// uniformly from the non-degenerate elements.
pub(crate) fn enumerate_draws<T, F>(space: &[T], label: &'static str, draw: F) -> Result<(Vec<f64>, usize)>
where
    T: Sync,
    F: Fn(&T) -> Result<f64> + Sync + Send,
{
    let results: Vec<Result<f64>> = space.par_iter().map(draw).collect();
    let t: Vec<f64> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let failed = results.len() - t.len();
    if t.is_empty() {
        return Err(Error::DegenerateScheme {
            scheme: label,
            index: 0,
            failures: failed,
        });
    }
    Ok((t, failed))
}

/// Runs `opts.permutations` draws in parallel, draw `i` reading stream `(seed, i)`.
///
/// A failing draw is redrawn from the same stream; more than
/// `opts.max_retries` consecutive failures abort the run.
pub(crate) fn sample_draws<F>(opts: &NullOptions, label: &'static str, draw: F) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&mut StreamRng) -> Result<f64> + Sync,
{
    let results = (0..opts.permutations)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(opts.seed, i as u64);
            let mut failures = 0;
            loop {
                match draw(&mut rng) {
                    Ok(t) => return Ok((t, failures)),
                    Err(_) if failures < opts.max_retries => failures += 1,
                    Err(_) => {
                        return Err(Error::DegenerateScheme {
                            scheme: label,
                            index: i,
                            failures: failures + 1,
                        })
                    }
                }
            }
        })
        .collect::<Result<Vec<(f64, usize)>>>()?;
    let failed = results.iter().map(|(_, f)| f).sum();
    Ok((results.into_iter().map(|(t, _)| t).collect(), failed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Collinearity {
    /// Sample correlation `r(x1, x2)`.
    pub r: f64,
    /// Set when `|r|` exceeds [`COLLINEARITY_WARNING`].
    pub warning: bool,
}

/// Flags designs where reduced-residual permutation may leave `y*`
/// correlated with `x2`.
pub fn collinearity_diagnostic(data: &Dataset) -> Collinearity {
    let r = stats::pearson(data.x1(), data.x2());
    Collinearity {
        r,
        warning: r.abs() > COLLINEARITY_WARNING,
    }
}
