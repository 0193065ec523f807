//! Restricted permutation of a 0/1 treatment when subjects come in
//! families of one or two.
//!
//! * `Independent`: every subject is its own family; the treatment vector is
//!   permuted freely.
//! * `Homogeneous`: both members of a pair share a treatment. Families are
//!   relabelled as whole units, within strata of equal family size.
//! * `Heterogeneous`: each pair has one exposed and one control member.
//!   Singleton treatments are permuted among singletons and each pair
//!   independently keeps or swaps its labels with probability 1/2.
//!
//! Exposed/control margins are preserved in every scenario.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lm::{self, X2};
use crate::schemes::{self, NullDistribution, NullOptions, Permutation, PermutationScheme, MAX_EXHAUSTIVE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Independent,
    Homogeneous,
    Heterogeneous,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Independent, Scenario::Homogeneous, Scenario::Heterogeneous];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::Independent => "independent",
            Scenario::Homogeneous => "homogeneous",
            Scenario::Heterogeneous => "heterogeneous",
        }
    }

    /// Heterogeneous if any multi-member family mixes treatments, otherwise
    /// Homogeneous if any family has more than one member, otherwise Independent.
    pub fn infer<S: AsRef<str>>(family_ids: &[S], treatment: &[f64]) -> Scenario {
        let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for (id, t) in family_ids.iter().zip(treatment) {
            groups.entry(id.as_ref()).or_default().push(*t);
        }
        let multi: Vec<&Vec<f64>> = groups.values().filter(|g| g.len() >= 2).collect();
        if multi.iter().any(|g| g.iter().any(|t| *t != g[0])) {
            Scenario::Heterogeneous
        } else if !multi.is_empty() {
            Scenario::Homogeneous
        } else {
            Scenario::Independent
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.label() == s)
            .ok_or_else(|| format!("unknown cluster scenario `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Family {
    pub id: String,
    /// Row indices, ascending.
    pub members: Vec<usize>,
    /// Treatments of the members in the original data, sorted.
    pub pattern: Vec<u8>,
}

impl Family {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// A 0/1 treatment vector (1 = exposed).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TreatmentAssignment(pub Vec<u8>);

impl TreatmentAssignment {
    pub fn exposed(&self) -> usize {
        self.0.iter().filter(|&&t| t == 1).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&t| f64::from(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterStructure {
    /// Sorted by id, except for `Independent` where families are rows in order.
    families: Vec<Family>,
    scenario: Scenario,
    treatment: Vec<u8>,
}

fn binary_treatment(x2: &[f64]) -> Result<Vec<u8>> {
    x2.iter()
        .enumerate()
        .map(|(row, &value)| match value {
            v if v == 0.0 => Ok(0),
            v if v == 1.0 => Ok(1),
            _ => Err(Error::NonBinaryTreatment { row, value }),
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c = C(n, i) here, and C(n, i) <= C(n, k) for i < k <= n/2
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return None;
        }
    }
    Some(c as u64)
}

impl ClusterStructure {
    /// Builds and validates a structure from per-row family labels and a 0/1 treatment.
    pub fn new<S: AsRef<str>>(family_ids: &[S], treatment: &[f64], scenario: Scenario) -> Result<Self> {
        if family_ids.len() != treatment.len() {
            return Err(Error::DimensionMismatch {
                what: "family_id",
                expected: treatment.len(),
                found: family_ids.len(),
            });
        }
        let treatment = binary_treatment(treatment)?;
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (row, id) in family_ids.iter().enumerate() {
            if id.as_ref().is_empty() {
                return Err(Error::EmptyFamilyLabel(row));
            }
            groups.entry(id.as_ref()).or_default().push(row);
        }
        let mut families: Vec<Family> = groups
            .into_iter()
            .map(|(id, members)| {
                let mut pattern: Vec<u8> = members.iter().map(|&m| treatment[m]).collect();
                pattern.sort_unstable();
                Family {
                    id: id.to_string(),
                    members,
                    pattern,
                }
            })
            .collect();
        if scenario == Scenario::Independent {
            families.sort_by_key(|f| f.members[0]);
        }
        let s = ClusterStructure {
            families,
            scenario,
            treatment,
        };
        s.check()?;
        Ok(s)
    }

    /// Every row is its own family.
    pub fn independent(treatment: &[f64]) -> Result<Self> {
        let ids: Vec<String> = (0..treatment.len()).map(|i| format!("{i:08}")).collect();
        Self::new(&ids, treatment, Scenario::Independent)
    }

    /// Uses `data.family_id()`; without labels only `Independent` is possible.
    pub fn from_dataset(data: &Dataset, scenario: Scenario) -> Result<Self> {
        match (data.family_id(), scenario) {
            (Some(ids), _) => Self::new(ids, data.x2(), scenario),
            (None, Scenario::Independent) => Self::independent(data.x2()),
            (None, _) => Err(Error::InvalidStructure(format!(
                "{scenario} structure needs family labels"
            ))),
        }
    }

    fn check(&self) -> Result<()> {
        for f in &self.families {
            let bad = match (self.scenario, f.size()) {
                (_, 0) => Some("empty family"),
                (_, s) if s > 2 => Some("families larger than two are not supported"),
                (Scenario::Independent, 2) => Some("independent structure has a two-member family"),
                (Scenario::Homogeneous, 2) if f.pattern[0] != f.pattern[1] => {
                    Some("homogeneous pair has mixed treatments")
                }
                (Scenario::Heterogeneous, 2) if f.pattern[0] == f.pattern[1] => {
                    Some("heterogeneous pair lacks one exposed and one control member")
                }
                _ => None,
            };
            if let Some(msg) = bad {
                return Err(Error::InvalidStructure(format!("family `{}`: {msg}", f.id)));
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    pub fn len(&self) -> usize {
        self.treatment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treatment.is_empty()
    }

    pub fn exposed(&self) -> usize {
        self.treatment.iter().filter(|&&t| t == 1).count()
    }

    pub fn original(&self) -> TreatmentAssignment {
        TreatmentAssignment(self.treatment.clone())
    }

    fn by_size(&self, size: usize) -> impl Iterator<Item = &Family> {
        self.families.iter().filter(move |f| f.size() == size)
    }

    /// Families grouped by size, with the number exposed in each stratum.
    fn strata(&self) -> Vec<(Vec<&Family>, usize)> {
        [1, 2]
            .into_iter()
            .map(|size| {
                let fams: Vec<&Family> = self.by_size(size).collect();
                let exposed = fams.iter().filter(|f| f.pattern[0] == 1).count();
                (fams, exposed)
            })
            .filter(|(f, _)| !f.is_empty())
            .collect()
    }

    /// Whether `a` is reachable from the original assignment under the scenario.
    pub fn is_valid(&self, a: &TreatmentAssignment) -> bool {
        if a.0.len() != self.len() || a.0.iter().any(|&t| t > 1) || a.exposed() != self.exposed() {
            return false;
        }
        match self.scenario {
            Scenario::Independent => true,
            Scenario::Homogeneous => self.strata().iter().all(|(fams, exposed)| {
                fams.iter().all(|f| f.members.iter().all(|&m| a.0[m] == a.0[f.members[0]]))
                    && fams.iter().filter(|f| a.0[f.members[0]] == 1).count() == *exposed
            }),
            Scenario::Heterogeneous => {
                self.by_size(2).all(|f| a.0[f.members[0]] != a.0[f.members[1]])
                    && self.by_size(1).filter(|f| a.0[f.members[0]] == 1).count()
                        == self.by_size(1).filter(|f| f.pattern[0] == 1).count()
            }
        }
    }

    /// Number of distinct valid assignments; `Overflow` if it does not fit in `u64`.
    pub fn space_size(&self) -> Result<u64> {
        match self.scenario {
            Scenario::Independent => binomial(self.len(), self.exposed()).ok_or(Error::Overflow),
            Scenario::Homogeneous => self.strata().iter().try_fold(1u64, |acc, (fams, exposed)| {
                binomial(fams.len(), *exposed)
                    .and_then(|c| acc.checked_mul(c))
                    .ok_or(Error::Overflow)
            }),
            Scenario::Heterogeneous => {
                let singles = self.by_size(1).count();
                let exposed = self.by_size(1).filter(|f| f.pattern[0] == 1).count();
                let pairs = self.by_size(2).count() as u32;
                binomial(singles, exposed)
                    .zip(2u64.checked_pow(pairs))
                    .and_then(|(c, p)| c.checked_mul(p))
                    .ok_or(Error::Overflow)
            }
        }
    }

    /// One assignment drawn uniformly from the valid space.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TreatmentAssignment {
        match self.scenario {
            // Same draw as permuting x2 with an unrestricted permutation.
            Scenario::Independent => {
                TreatmentAssignment(Permutation::random(self.len(), rng).apply(&self.treatment))
            }
            Scenario::Homogeneous => {
                let mut out = self.treatment.clone();
                for (fams, _) in self.strata() {
                    let mut labels: Vec<u8> = fams.iter().map(|f| f.pattern[0]).collect();
                    labels.shuffle(rng);
                    for (f, l) in fams.iter().zip(labels) {
                        f.members.iter().for_each(|&m| out[m] = l);
                    }
                }
                TreatmentAssignment(out)
            }
            Scenario::Heterogeneous => {
                let mut out = self.treatment.clone();
                let singles: Vec<&Family> = self.by_size(1).collect();
                let mut labels: Vec<u8> = singles.iter().map(|f| f.pattern[0]).collect();
                labels.shuffle(rng);
                for (f, l) in singles.iter().zip(labels) {
                    out[f.members[0]] = l;
                }
                for f in self.by_size(2) {
                    if rng.random_bool(0.5) {
                        out.swap(f.members[0], f.members[1]);
                    }
                }
                TreatmentAssignment(out)
            }
        }
    }

    /// Every valid assignment exactly once; `SpaceTooLarge` above `cap`.
    pub fn enumerate(&self, cap: u64) -> Result<Vec<TreatmentAssignment>> {
        let size = self.space_size()?;
        if size > cap {
            return Err(Error::SpaceTooLarge { size, cap });
        }
        let n = self.len();
        let out = match self.scenario {
            Scenario::Independent => (0..n)
                .combinations(self.exposed())
                .map(|exposed| {
                    let mut a = vec![0u8; n];
                    exposed.into_iter().for_each(|i| a[i] = 1);
                    TreatmentAssignment(a)
                })
                .collect(),
            Scenario::Homogeneous => {
                let strata = self.strata();
                strata
                    .iter()
                    .map(|(fams, exposed)| (0..fams.len()).combinations(*exposed).collect::<Vec<_>>())
                    .multi_cartesian_product()
                    .map(|choice| {
                        let mut a = vec![0u8; n];
                        for ((fams, _), picked) in strata.iter().zip(choice) {
                            for i in picked {
                                fams[i].members.iter().for_each(|&m| a[m] = 1);
                            }
                        }
                        TreatmentAssignment(a)
                    })
                    .collect()
            }
            Scenario::Heterogeneous => {
                let singles: Vec<&Family> = self.by_size(1).collect();
                let pairs: Vec<&Family> = self.by_size(2).collect();
                let exposed = singles.iter().filter(|f| f.pattern[0] == 1).count();
                let mut out = Vec::with_capacity(size as usize);
                for picked in (0..singles.len()).combinations(exposed) {
                    for mask in 0u64..(1u64 << pairs.len()) {
                        let mut a = vec![0u8; n];
                        picked.iter().for_each(|&i| a[singles[i].members[0]] = 1);
                        for (k, f) in pairs.iter().enumerate() {
                            let first = (mask >> k) & 1 == 1;
                            a[f.members[if first { 0 } else { 1 }]] = 1;
                        }
                        out.push(TreatmentAssignment(a));
                    }
                }
                out
            }
        };
        Ok(out)
    }
}

pub fn permutation_space_size(structure: &ClusterStructure) -> Result<u64> {
    structure.space_size()
}

pub fn sample_assignment<R: Rng + ?Sized>(structure: &ClusterStructure, rng: &mut R) -> TreatmentAssignment {
    structure.sample(rng)
}

pub fn enumerate_assignments(structure: &ClusterStructure, cap: u64) -> Result<Vec<TreatmentAssignment>> {
    structure.enumerate(cap)
}

/// Null distribution of the treatment t-statistic under restricted
/// permutation, with `b` random assignments.
pub fn cluster_null_distribution(
    data: &Dataset,
    structure: &ClusterStructure,
    b: usize,
    seed: u64,
) -> Result<NullDistribution> {
    cluster_null_distribution_with(data, structure, &NullOptions::new(b, seed))
}

pub fn cluster_null_distribution_with(
    data: &Dataset,
    structure: &ClusterStructure,
    opts: &NullOptions,
) -> Result<NullDistribution> {
    if opts.permutations == 0 {
        return Err(Error::NoPermutations);
    }
    if structure.len() != data.len() || structure.original().to_f64() != data.x2() {
        return Err(Error::InvalidStructure(
            "structure does not match the dataset's treatment column".into(),
        ));
    }
    let full = lm::fit_full(data)?;
    let t_obs = lm::t_statistic(&full, X2, 0.0)?;
    let t_of = |a: &TreatmentAssignment| -> Result<f64> {
        let fit = lm::ols(data.y(), &[data.x1(), &a.to_f64()])?;
        lm::t_statistic(&fit, X2, 0.0)
    };

    let exhaustive = opts.resolve_exhaustive(structure.space_size().ok())?;
    let (t_stars, failed_draws) = if exhaustive {
        let all = structure.enumerate(MAX_EXHAUSTIVE)?;
        schemes::enumerate_draws(&all, "restricted-permutation", t_of)?
    } else {
        schemes::sample_draws(opts, "restricted-permutation", |rng| t_of(&structure.sample(rng)))?
    };

    Ok(NullDistribution {
        b: t_stars.len(),
        t_stars,
        scheme: PermutationScheme::PermuteX2,
        restriction: Some(structure.scenario()),
        seed: opts.seed,
        t_obs,
        center: 0.0,
        exhaustive,
        failed_draws,
    })
}
