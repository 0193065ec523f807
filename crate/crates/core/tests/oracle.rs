mod common;

use common::*;
use num_traits::Zero;
use permreg::inference::{self, ols_p_value, p_value_from_draws, t_cdf};
use permreg::lm::{self, X2};
use permreg::schemes::{self, draw_t_star, NullOptions, Permutation, PermutationScheme, Sampling};
use permreg::{stats, Dataset};
use rand::{Rng, SeedableRng};

const Y8: [i64; 8] = [3, 7, 4, 9, 6, 12, 5, 10];
const X1_8: [i64; 8] = [1, 3, 2, 5, 2, 6, 1, 4];
const X2_8: [i64; 8] = [0, 1, 0, 1, 1, 1, 0, 0];

fn dataset(y: &[i64], x1: &[i64], x2: &[i64]) -> Dataset {
    Dataset::new(fs(y), fs(x1), fs(x2)).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn full_fit_matches_exact_normal_equations() {
    let d = dataset(&Y8, &X1_8, &X2_8);
    let fit = lm::fit_full(&d).unwrap();
    let exact = exact_ols(&qs(&Y8), &[&qs(&X1_8), &qs(&X2_8)]);
    for j in 0..3 {
        assert!(close(fit.coefficients[j], f(&exact.coef[j]), 1e-12), "coef {j}");
        assert!(close(fit.standard_errors[j], f(&exact.se2(j)).sqrt(), 1e-12), "se {j}");
    }
    for i in 0..8 {
        assert!(close(fit.residuals[i], f(&exact.residuals[i]), 1e-12));
    }
    assert_eq!(fit.df, 5);
    let t = lm::t_statistic(&fit, X2, 0.0).unwrap();
    assert!((t - exact.t(2, &q(0))).abs() <= 1e-10);
}

#[test]
fn reduced_fit_matches_exact_simple_regression() {
    let d = dataset(&Y8, &X1_8, &X2_8);
    let fit = lm::fit_reduced(&d).unwrap();
    let exact = exact_ols(&qs(&Y8), &[&qs(&X1_8)]);
    for j in 0..2 {
        assert!(close(fit.coefficients[j], f(&exact.coef[j]), 1e-12));
    }
    for i in 0..8 {
        assert!(close(fit.residuals[i], f(&exact.residuals[i]), 1e-12));
    }
}

#[test]
fn random_integer_designs_match_oracle() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(5..=15);
        let y: Vec<i64> = (0..n).map(|_| rng.random_range(-50..=50)).collect();
        let x1: Vec<i64> = (0..n).map(|_| rng.random_range(-20..=20)).collect();
        let x2: Vec<i64> = (0..n).map(|_| rng.random_range(0..=1)).collect();
        let d = dataset(&y, &x1, &x2);
        let Ok(fit) = lm::fit_full(&d) else {
            continue;
        };
        let exact = exact_ols(&qs(&y), &[&qs(&x1), &qs(&x2)]);
        if exact.rss.is_zero() {
            continue;
        }
        for j in 0..3 {
            assert!(close(fit.coefficients[j], f(&exact.coef[j]), 1e-9));
            assert!(close(fit.standard_errors[j], f(&exact.se2(j)).sqrt(), 1e-9));
        }
        checked += 1;
    }
}

const Y6: [i64; 6] = [2, 5, 3, 8, 4, 9];
const X1_6: [i64; 6] = [1, 2, 2, 4, 3, 5];
const X2_6: [i64; 6] = [0, 1, 0, 1, 1, 0];

/// The scheme's `t*` for `perm`, recomputed step by step in exact arithmetic.
fn exact_t_star(scheme: PermutationScheme, y: &[i64], x1: &[i64], x2: &[i64], perm: &[usize]) -> f64 {
    let (y, x1, x2) = (qs(y), qs(x1), qs(x2));
    match scheme {
        PermutationScheme::PermuteY => exact_ols(&permute(&y, perm), &[&x1, &x2]).t(2, &q(0)),
        PermutationScheme::PermuteX2 => exact_ols(&y, &[&x1, &permute(&x2, perm)]).t(2, &q(0)),
        PermutationScheme::ReducedResiduals => {
            let red = exact_ols(&y, &[&x1]);
            let e = permute(&red.residuals, perm);
            let ys: Vec<Q> = red.fitted.iter().zip(&e).map(|(a, b)| a + b).collect();
            exact_ols(&ys, &[&x1, &x2]).t(2, &q(0))
        }
        PermutationScheme::FullResiduals => {
            let full = exact_ols(&y, &[&x1, &x2]);
            let e = permute(&full.residuals, perm);
            let ys: Vec<Q> = full.fitted.iter().zip(&e).map(|(a, b)| a + b).collect();
            exact_ols(&ys, &[&x1, &x2]).t(2, &full.coef[2])
        }
    }
}

#[test]
fn each_scheme_matches_exact_transformed_fit() {
    let d = dataset(&Y6, &X1_6, &X2_6);
    let perm = [1, 0, 3, 2, 5, 4];
    for scheme in PermutationScheme::ALL {
        let got = draw_t_star(scheme, &d, &Permutation::new(perm.to_vec()).unwrap()).unwrap();
        let want = exact_t_star(scheme, &Y6, &X1_6, &X2_6, &perm);
        assert!((got - want).abs() <= 1e-10, "{scheme}: {got} vs {want}");
    }
}

#[test]
fn every_scheme_agrees_with_oracle_on_all_permutations_of_six() {
    let d = dataset(&Y6, &X1_6, &X2_6);
    for scheme in PermutationScheme::ALL {
        for perm in all_perms(6).into_iter().step_by(7) {
            let want = exact_t_star(scheme, &Y6, &X1_6, &X2_6, &perm);
            match draw_t_star(scheme, &d, &Permutation::new(perm.clone()).unwrap()) {
                Ok(got) => assert!((got - want).abs() <= 1e-9, "{scheme} {perm:?}"),
                Err(e) => assert!(!want.is_finite(), "{scheme} {perm:?}: {e}"),
            }
        }
    }
}

const Y5: [i64; 5] = [4, 9, 5, 11, 8];
const X1_5: [i64; 5] = [1, 3, 2, 5, 4];
const X2_5: [i64; 5] = [0, 1, 0, 1, 1];

#[test]
fn exhaustive_permute_x2_multiset_matches_brute_force() {
    let d = dataset(&Y5, &X1_5, &X2_5);
    let opts = NullOptions::new(120, 0).sampling(Sampling::Exhaustive);
    let null = schemes::null_distribution_with(PermutationScheme::PermuteX2, &d, &opts).unwrap();
    assert!(null.exhaustive);
    assert_eq!(null.b, 120);

    let mut want: Vec<f64> = all_perms(5)
        .iter()
        .map(|p| exact_t_star(PermutationScheme::PermuteX2, &Y5, &X1_5, &X2_5, p))
        .collect();
    let mut got = null.t_stars.clone();
    want.sort_by(f64::total_cmp);
    got.sort_by(f64::total_cmp);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
}

#[test]
fn exhaustive_p_value_is_exact_proportion() {
    let (y, x1, x2) = (qs(&Y5), qs(&X1_5), qs(&X2_5));
    let obs = exact_ols(&y, &[&x1, &x2]).t2(2, &q(0));
    let extreme = all_perms(5)
        .iter()
        .filter(|p| exact_ols(&y, &[&x1, &permute(&x2, p)]).t2(2, &q(0)) >= obs)
        .count();
    let want = extreme as f64 / 120.0;

    let d = dataset(&Y5, &X1_5, &X2_5);
    let opts = NullOptions::new(120, 0).sampling(Sampling::Exhaustive);
    let null = schemes::null_distribution_with(PermutationScheme::PermuteX2, &d, &opts).unwrap();
    let p = inference::permutation_p_value(null.t_obs, &null).unwrap();
    assert_eq!(p, want);
    assert_eq!(p_value_from_draws(null.t_obs, &null.t_stars, true).unwrap(), want);
}

#[test]
fn pearson_matches_textbook_formula() {
    let x = [2.0, 4.5, 3.1, 8.2, 5.5, 6.0, 1.2, 7.7, 3.3, 9.0];
    let y = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
    let n = 10.0;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let r = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
    assert!((stats::pearson(&x, &y) - r).abs() < 1e-12);
    let d = Dataset::new(vec![0.0; 10], x.to_vec(), y.to_vec()).unwrap();
    assert!((schemes::collinearity_diagnostic(&d).r - r).abs() < 1e-12);
}

#[test]
fn t_cdf_matches_quadrature() {
    for &(t, df) in &[(2.5, 17), (-1.3, 4), (0.7, 1), (3.9, 30), (1.96, 120)] {
        let want = t_cdf_quadrature(t, df);
        assert!((t_cdf(t, df as usize) - want).abs() <= 1e-9, "t={t} df={df}");
    }
}

#[test]
fn ols_p_value_matches_quadrature() {
    let y = [3.2, 4.1, 2.7, 6.3, 5.8, 7.9, 4.0, 8.4, 5.1, 6.6];
    let x1 = [1.0, 2.0, 1.5, 3.0, 2.5, 4.0, 2.2, 3.9, 2.8, 3.1];
    let x2 = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
    let d = Dataset::new(y.to_vec(), x1.to_vec(), x2.to_vec()).unwrap();
    let fit = lm::fit_full(&d).unwrap();
    let t = lm::t_statistic(&fit, X2, 0.0).unwrap();
    let want = 2.0 * (1.0 - t_cdf_quadrature(t.abs(), 7));
    assert!((ols_p_value(&fit, X2).unwrap() - want).abs() <= 1e-8);
}

#[test]
fn sampled_null_converges_to_exhaustive() {
    let d = dataset(&Y5, &X1_5, &X2_5);
    for scheme in PermutationScheme::ALL {
        let exact = schemes::null_distribution_with(scheme, &d, &NullOptions::new(120, 0).sampling(Sampling::Exhaustive))
            .unwrap();
        let ks = |b: usize| {
            let sampled = schemes::null_distribution(scheme, &d, b, 99).unwrap();
            stats::ks_two_sample(&sampled.t_stars, &exact.t_stars)
        };
        let (coarse, fine) = (ks(50), ks(20_000));
        assert!(fine < 0.02, "{scheme}: {fine}");
        assert!(fine <= coarse, "{scheme}: {fine} > {coarse}");
    }
}
