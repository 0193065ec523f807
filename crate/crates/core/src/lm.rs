//! Ordinary least squares with an intercept and one or two predictors.
//!
//! Fits go through a Householder QR of the column-equilibrated design
//! matrix, never through the normal equations, so nearly collinear
//! predictors keep full working precision.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Smallest accepted ratio `min |R_ii| / max |R_ii|` of the equilibrated design.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// A fit whose residual norm is below this fraction of `‖y‖` is treated as exact:
/// residuals are set to zero and standard errors vanish.
pub const EXACT_FIT_TOLERANCE: f64 = 1e-12;

/// Index of the `x2` coefficient in a full-model fit.
pub const X2: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// Intercept first, then slopes in predictor order.
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub df: usize,
    /// `RSS / df`.
    pub sigma2_hat: f64,
}

impl FitResult {
    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

/// `y ~ x1 + x2`; coefficients `(b0, b1, b2)`.
pub fn fit_full(data: &Dataset) -> Result<FitResult> {
    ols(data.y(), &[data.x1(), data.x2()])
}

/// `y ~ x1`; residuals are the reduced-model residuals `y - (b0 + b1 x1)`.
pub fn fit_reduced(data: &Dataset) -> Result<FitResult> {
    ols(data.y(), &[data.x1()])
}

/// `(coefficient - null_value) / SE` for the coefficient at `index`.
pub fn t_statistic(fit: &FitResult, index: usize, null_value: f64) -> Result<f64> {
    let len = fit.coefficients.len();
    let (b, se) = match (fit.coefficients.get(index), fit.standard_errors.get(index)) {
        (Some(b), Some(se)) => (*b, *se),
        _ => return Err(Error::InvalidIndex { index, len }),
    };
    if se <= 0.0 || !se.is_finite() {
        return Err(Error::ZeroStandardError { index });
    }
    Ok((b - null_value) / se)
}

/// Least squares of `y` on an intercept plus `predictors`.
pub fn ols(y: &[f64], predictors: &[&[f64]]) -> Result<FitResult> {
    let n = y.len();
    let p = predictors.len() + 1;
    for x in predictors {
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                what: "predictor",
                expected: n,
                found: x.len(),
            });
        }
    }
    if n <= p {
        return Err(Error::InsufficientData { n, required: p + 1 });
    }

    let mut design = DMatrix::<f64>::from_element(n, p, 1.0);
    for (j, x) in predictors.iter().enumerate() {
        design.set_column(j + 1, &DVector::from_column_slice(x));
    }
    let scales: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    if scales.iter().any(|s| *s == 0.0) {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    for (j, s) in scales.iter().enumerate() {
        design.column_mut(j).unscale_mut(*s);
    }

    let qr = design.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = r.diagonal().iter().map(|d| d.abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = min / max;
    if !(ratio >= RANK_TOLERANCE) {
        return Err(Error::RankDeficient { ratio });
    }

    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, p).into_owned();
    let scaled_coef = r
        .solve_upper_triangular(&head)
        .ok_or(Error::RankDeficient { ratio })?;

    let fitted_v = &design * &scaled_coef;
    let mut fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let mut residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();

    let df = n - p;
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut rss: f64 = residuals.iter().map(|e| e * e).sum();
    if rss.sqrt() <= EXACT_FIT_TOLERANCE * y_norm {
        residuals.iter_mut().for_each(|e| *e = 0.0);
        fitted.copy_from_slice(y);
        rss = 0.0;
    }
    let sigma2_hat = rss / df as f64;

    // Var(b_scaled) = sigma2 (R^T R)^{-1}, so SE_j is sigma times the norm of row j of R^{-1}.
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::RankDeficient { ratio })?;
    let coefficients: Vec<f64> = scaled_coef
        .iter()
        .zip(&scales)
        .map(|(b, s)| b / s)
        .collect();
    let standard_errors: Vec<f64> = (0..p)
        .map(|j| (sigma2_hat * r_inv.row(j).norm_squared()).sqrt() / scales[j])
        .collect();

    Ok(FitResult {
        coefficients,
        standard_errors,
        residuals,
        fitted,
        df,
        sigma2_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(y: &[f64], x1: &[f64], x2: &[f64]) -> Dataset {
        Dataset::new(y.to_vec(), x1.to_vec(), x2.to_vec()).unwrap()
    }

    #[test]
    fn exact_fit_on_x1_alone() {
        let d = data(&[0., 1., 2., 3.], &[0., 1., 2., 3.], &[0., 0., 1., 1.]);
        let fit = fit_full(&d).unwrap();
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-12);
        assert!(fit.coefficients[2].abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| *r == 0.0));
        assert_eq!(fit.df, 1);
        assert_eq!(
            t_statistic(&fit, X2, 0.0),
            Err(Error::ZeroStandardError { index: 2 })
        );
    }

    #[test]
    fn constant_response() {
        let d = data(&[4.5; 6], &[1., 3., 2., 5., 4., 6.], &[0., 1., 0., 1., 1., 0.]);
        let fit = fit_full(&d).unwrap();
        assert!((fit.coefficients[0] - 4.5).abs() < 1e-12);
        assert!(fit.coefficients[1].abs() < 1e-12);
        assert!(fit.coefficients[2].abs() < 1e-12);
    }

    #[test]
    fn reduced_exact_line() {
        let x1 = [0.5, 1.0, 2.0, 4.0, 7.0];
        let y: Vec<f64> = x1.iter().map(|x| 2.0 + 3.0 * x).collect();
        let d = data(&y, &x1, &[0., 1., 0., 1., 0.]);
        let fit = fit_reduced(&d).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn reduced_zero_covariance_gives_zero_slope() {
        let fit = ols(&[1., 0., 1.], &[&[-1., 0., 1.]]).unwrap();
        assert!(fit.coefficients[1].abs() < 1e-15);
        assert!((fit.coefficients[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn t_statistic_formula() {
        let fit = FitResult {
            coefficients: vec![0.0, 0.0, 2.0],
            standard_errors: vec![1.0, 1.0, 1.0],
            residuals: vec![],
            fitted: vec![],
            df: 1,
            sigma2_hat: 1.0,
        };
        assert_eq!(t_statistic(&fit, 2, 0.0), Ok(2.0));
        assert_eq!(t_statistic(&fit, 2, 2.0), Ok(0.0));
        assert_eq!(
            t_statistic(&fit, 3, 0.0),
            Err(Error::InvalidIndex { index: 3, len: 3 })
        );
    }

    #[test]
    fn collinear_design_is_rank_deficient() {
        let x1 = [1., 2., 3., 4., 5.];
        let x2: Vec<f64> = x1.iter().map(|x| 2.0 * x + 1.0).collect();
        let err = ols(&[1., 3., 2., 5., 4.], &[&x1, &x2]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
        let err = ols(&[1., 3., 2.], &[&[2., 2., 2.]]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    #[test]
    fn highly_collinear_but_distinct_predictors_still_fit() {
        let x1: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let x2: Vec<f64> = x1
            .iter()
            .enumerate()
            .map(|(i, x)| x + if i % 2 == 0 { 1e-3 } else { -1e-3 })
            .collect();
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 1.0 + a + 5.0 * b).collect();
        let fit = ols(&y, &[&x1, &x2]).unwrap();
        assert!((fit.coefficients[2] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            ols(&[1., 2., 3.], &[&[1., 2.]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            ols(&[1., 2., 3.], &[&[1., 2., 4.], &[0., 1., 1.]]),
            Err(Error::InsufficientData { .. })
        ));
    }
}
