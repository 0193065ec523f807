//! Permutation inference for the two-predictor linear model
//! `y = b0 + b1·x1 + b2·x2 + e`, testing `H0: b2 = 0`.
//!
//! The crate covers:
//!
//! * [`lm`]: least-squares fits of the full (`x1 + x2`) and reduced (`x1`) models.
//! * [`schemes`]: the four unrestricted permutation schemes (permute `y`,
//!   permute `x2`, permute reduced-model residuals, permute full-model residuals).
//! * [`cluster`]: restricted permutation of a dichotomous treatment when
//!   subjects come in families of one or two.
//! * [`inference`]: p-values, the Student-t CDF and Wilson intervals.
//! * [`simulation`]: a Monte Carlo harness for Type I error rates under clustering.
//! * [`theory`]: numerical checks of the Freedman–Lane correlation approximation
//!   and the ter Braak permutation/bootstrap moment identities.
//!
//! Every randomized routine is a deterministic function of its inputs and a
//! `u64` seed, independent of how many threads rayon uses.

pub mod cluster;
pub mod dataset;
pub mod error;
pub mod inference;
pub mod lm;
pub mod rng;
pub mod schemes;
pub mod simulation;
pub mod stats;
pub mod theory;

pub use cluster::{ClusterStructure, Family, Scenario, TreatmentAssignment};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use inference::TestResult;
pub use lm::FitResult;
pub use schemes::{NullDistribution, NullOptions, Permutation, PermutationScheme, Sampling};
pub use simulation::{Method, SimConfig, SimResult};
