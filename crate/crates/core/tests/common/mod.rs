//! Exact-arithmetic reference computations shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn qs(v: &[i64]) -> Vec<Q> {
    v.iter().map(|&x| q(x)).collect()
}

pub fn f(v: &Q) -> f64 {
    v.to_f64().unwrap()
}

pub fn fs(v: &[i64]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Exact least squares with an intercept, from the normal equations.
pub struct ExactFit {
    pub coef: Vec<Q>,
    pub residuals: Vec<Q>,
    pub fitted: Vec<Q>,
    pub rss: Q,
    /// Diagonal of `(X'X)^-1`.
    pub inv_diag: Vec<Q>,
    pub df: usize,
}

impl ExactFit {
    pub fn sigma2(&self) -> Q {
        &self.rss / q(self.df as i64)
    }

    /// Exact `SE²` of coefficient `j`.
    pub fn se2(&self, j: usize) -> Q {
        self.sigma2() * &self.inv_diag[j]
    }

    /// `(coef[j] - center) / SE` rounded once to f64 at the end.
    pub fn t(&self, j: usize, center: &Q) -> f64 {
        let num = &self.coef[j] - center;
        let t2 = &num * &num / self.se2(j);
        let mag = t2.to_f64().unwrap().sqrt();
        if num.is_negative() {
            -mag
        } else {
            mag
        }
    }

    /// Exact comparison `|t_a| >= |t_b|` through the squared statistics.
    pub fn t2(&self, j: usize, center: &Q) -> Q {
        let num = &self.coef[j] - center;
        &num * &num / self.se2(j)
    }
}

/// Gauss-Jordan inverse of a small nonsingular matrix.
fn invert(mut a: Vec<Vec<Q>>) -> Vec<Vec<Q>> {
    let p = a.len();
    let mut inv: Vec<Vec<Q>> = (0..p)
        .map(|i| (0..p).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
        .collect();
    for col in 0..p {
        let pivot = (col..p).find(|&r| !a[r][col].is_zero()).expect("singular normal equations");
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col].clone();
        for j in 0..p {
            a[col][j] = &a[col][j] / &d;
            inv[col][j] = &inv[col][j] / &d;
        }
        for r in 0..p {
            if r != col && !a[r][col].is_zero() {
                let m = a[r][col].clone();
                for j in 0..p {
                    let (ac, ic) = (a[col][j].clone(), inv[col][j].clone());
                    a[r][j] = &a[r][j] - &m * ac;
                    inv[r][j] = &inv[r][j] - &m * ic;
                }
            }
        }
    }
    inv
}

pub fn exact_ols(y: &[Q], predictors: &[&[Q]]) -> ExactFit {
    let n = y.len();
    let p = predictors.len() + 1;
    let col = |j: usize, i: usize| if j == 0 { Q::one() } else { predictors[j - 1][i].clone() };
    let xtx: Vec<Vec<Q>> = (0..p)
        .map(|a| {
            (0..p)
                .map(|b| (0..n).fold(Q::zero(), |s, i| s + col(a, i) * col(b, i)))
                .collect()
        })
        .collect();
    let xty: Vec<Q> = (0..p).map(|a| (0..n).fold(Q::zero(), |s, i| s + col(a, i) * &y[i])).collect();
    let inv = invert(xtx);
    let coef: Vec<Q> = (0..p)
        .map(|a| (0..p).fold(Q::zero(), |s, b| s + &inv[a][b] * &xty[b]))
        .collect();
    let fitted: Vec<Q> = (0..n)
        .map(|i| (0..p).fold(Q::zero(), |s, j| s + &coef[j] * col(j, i)))
        .collect();
    let residuals: Vec<Q> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss = residuals.iter().fold(Q::zero(), |s, r| s + r * r);
    ExactFit {
        inv_diag: (0..p).map(|j| inv[j][j].clone()).collect(),
        coef,
        residuals,
        fitted,
        rss,
        df: n - p,
    }
}

pub fn permute<T: Clone>(v: &[T], perm: &[usize]) -> Vec<T> {
    perm.iter().map(|&j| v[j].clone()).collect()
}

/// Every permutation of `0..n` in lexicographic order.
pub fn all_perms(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Adaptive Simpson integration of `g` over `[a, b]`.
pub fn integrate(g: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(g: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (g(lm), g(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(g, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(g, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (g(a), g(b), g(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(g, a, b, fa, fm, fb, whole, tol, 50)
}

/// `Γ(k/2)` for a positive integer `k`, by the half-integer recursion.
fn gamma_half(k: u32) -> f64 {
    let (mut g, mut x) = if k % 2 == 0 { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt(), 0.5) };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Student-t CDF by quadrature of the density.
pub fn t_cdf_quadrature(t: f64, df: u32) -> f64 {
    let nu = df as f64;
    let c = gamma_half(df + 1) / (gamma_half(df) * (nu * std::f64::consts::PI).sqrt());
    let density = move |x: f64| c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0);
    0.5 + integrate(&density, 0.0, t, 1e-14)
}
