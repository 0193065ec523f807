use serde::Serialize;

use crate::error::{Error, Result};

/// Response `y`, covariate `x1`, treatment `x2`, and optional family labels.
///
/// [`Dataset::new`] checks shapes and finiteness only, so small or degenerate
/// inputs can still be represented (and rejected later by the fitting code).
/// [`Dataset::validate`] checks the full analysis preconditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    y: Vec<f64>,
    x1: Vec<f64>,
    x2: Vec<f64>,
    family_id: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x1: Vec<f64>, x2: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InsufficientData { n, required: 1 });
        }
        for (what, v) in [("x1", &x1), ("x2", &x2)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: v.len(),
                });
            }
        }
        for (what, v) in [("y", &y), ("x1", &x1), ("x2", &x2)] {
            if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { what, row });
            }
        }
        Ok(Dataset {
            y,
            x1,
            x2,
            family_id: None,
        })
    }

    pub fn with_families(mut self, family_id: Vec<String>) -> Result<Self> {
        if family_id.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "family_id",
                expected: self.len(),
                found: family_id.len(),
            });
        }
        if let Some(row) = family_id.iter().position(|s| s.is_empty()) {
            return Err(Error::EmptyFamilyLabel(row));
        }
        self.family_id = Some(family_id);
        Ok(self)
    }

    /// Full-model preconditions: `n >= 4` and neither predictor constant.
    pub fn validate(&self) -> Result<()> {
        if self.len() < 4 {
            return Err(Error::InsufficientData {
                n: self.len(),
                required: 4,
            });
        }
        for (name, v) in [("x1", &self.x1), ("x2", &self.x2)] {
            if v.iter().all(|x| *x == v[0]) {
                return Err(Error::ConstantPredictor(name));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x1(&self) -> &[f64] {
        &self.x1
    }

    pub fn x2(&self) -> &[f64] {
        &self.x2
    }

    pub fn family_id(&self) -> Option<&[String]> {
        self.family_id.as_deref()
    }
}
