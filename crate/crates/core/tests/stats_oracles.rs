// SPDX-License-Identifier: MIT OR Apache-2.0

//! Regression and test statistics against independent textbook computations.

use lsurp_core::stats::{delta_ll, fit_matrix, gaussian_loglik, lr_test, pearson, VARIANCE_FLOOR};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

/// Solves `(XᵀX) β = Xᵀy` on the raw design with an intercept column, by
/// Gaussian elimination with partial pivoting.
fn normal_equations(x: &Array2<f64>, y: &[f64]) -> Vec<f64> {
    let (n, p) = x.dim();
    let q = p + 1;
    let col = |i: usize, j: usize| if j == 0 { 1.0 } else { x[[i, j - 1]] };
    let mut a = vec![vec![0.0; q + 1]; q];
    for r in 0..q {
        for c in 0..q {
            a[r][c] = (0..n).map(|i| col(i, r) * col(i, c)).sum();
        }
        a[r][q] = (0..n).map(|i| col(i, r) * y[i]).sum();
    }
    for k in 0..q {
        let piv = (k..q)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, piv);
        for i in k + 1..q {
            let f = a[i][k] / a[k][k];
            for j in k..=q {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    let mut beta = vec![0.0; q];
    for i in (0..q).rev() {
        let s: f64 = (i + 1..q).map(|j| a[i][j] * beta[j]).sum();
        beta[i] = (a[i][q] - s) / a[i][i];
    }
    beta
}

fn random_design(rng: &mut ChaCha8Rng) -> (Array2<f64>, Vec<f64>) {
    let n = rng.random_range(20..200);
    let p = rng.random_range(1..8);
    let scales: Vec<f64> = (0..p).map(|_| 10f64.powf(rng.random_range(-1.0..2.0))).collect();
    let x = Array2::from_shape_fn((n, p), |(_, j)| {
        scales[j] * rng.random_range(-1.0..1.0) + rng.random_range(-5.0..5.0)
    });
    let beta: Vec<f64> = (0..=p).map(|_| rng.random_range(-3.0..3.0)).collect();
    let y = (0..n)
        .map(|i| {
            beta[0]
                + (0..p).map(|j| beta[j + 1] * x[[i, j]]).sum::<f64>()
                + rng.random_range(-1.0..1.0)
        })
        .collect();
    (x, y)
}

#[test]
fn coefficients_match_normal_equations_on_100_designs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let (x, y) = random_design(&mut rng);
        let fit = fit_matrix(&names(x.ncols()), x.view(), &y).unwrap();
        assert!(!fit.ridge);
        let oracle = normal_equations(&x, &y);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn residuals_are_orthogonal_and_loglik_recomputes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let (x, y) = random_design(&mut rng);
        let fit = fit_matrix(&names(x.ncols()), x.view(), &y).unwrap();
        let resid: Vec<f64> = fit.predict(x.view()).iter().zip(&y).map(|(p, y)| y - p).collect();
        let sum: f64 = resid.iter().sum();
        assert!(sum.abs() < 1e-8);
        for j in 0..x.ncols() {
            let dot: f64 = resid.iter().zip(x.column(j)).map(|(r, v)| r * v).sum();
            assert!(dot.abs() < 1e-7 * x.column(j).iter().map(|v| v.abs()).sum::<f64>());
        }
        let n = y.len() as f64;
        let s2 = (resid.iter().map(|r| r * r).sum::<f64>() / n).max(VARIANCE_FLOOR);
        let ll = -n / 2.0 * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0);
        assert!((fit.loglik - ll).abs() <= 1e-9 * ll.abs().max(1.0));
        assert!((fit.loglik_on(x.view(), &y) - ll).abs() <= 1e-9 * ll.abs().max(1.0));
    }
}

#[test]
fn nested_models_never_lose_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let (x, y) = random_design(&mut rng);
        let p = x.ncols();
        let k = rng.random_range(0..p);
        let full = fit_matrix(&names(p), x.view(), &y).unwrap();
        let base_x = x.slice(ndarray::s![.., ..k]).to_owned();
        let base = fit_matrix(&names(k), base_x.view(), &y).unwrap();
        let r = delta_ll(&full, &base).unwrap();
        assert!(r.delta_ll >= -1e-9, "{}", r.delta_ll);
        assert_eq!(r.df_diff, p - k);
    }
}

#[test]
fn informative_predictor_gains_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 300;
    let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * x[[i, 0]] + 4.0 * x[[i, 1]] + 0.1 * rng.random_range(-1.0..1.0))
        .collect();
    let full = fit_matrix(&names(2), x.view(), &y).unwrap();
    let base_x = x.slice(ndarray::s![.., ..1]).to_owned();
    let base = fit_matrix(&names(1), base_x.view(), &y).unwrap();
    let r = delta_ll(&full, &base).unwrap();
    assert!(r.delta_ll > 100.0);
    assert!(lr_test(r.delta_ll, 1).unwrap().p_value < 1e-10);
}

fn gamma_half(k: usize) -> f64 {
    // Γ(k/2) by recurrence from Γ(1/2) = √π and Γ(1) = 1.
    let (mut g, mut a) = if k % 2 == 1 {
        (std::f64::consts::PI.sqrt(), 0.5)
    } else {
        (1.0, 1.0)
    };
    while a < k as f64 / 2.0 - 1e-12 {
        g *= a;
        a += 1.0;
    }
    g
}

/// Upper tail of χ²(k) at `x` by composite Simpson on `u = √t`.
fn chi2_sf_numeric(x: f64, k: usize) -> f64 {
    let kf = k as f64;
    let norm = 2f64.powf(kf / 2.0) * gamma_half(k);
    let g = |u: f64| 2.0 * u.powi(k as i32 - 1) * (-u * u / 2.0).exp() / norm;
    let (a, b, m) = (0.0, x.sqrt(), 20_000);
    let h = (b - a) / m as f64;
    let mut s = g(a) + g(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
    }
    1.0 - s * h / 3.0
}

#[test]
fn chi_squared_tail_matches_numerical_integration() {
    let r = lr_test(7.815 / 2.0, 3).unwrap();
    assert_eq!(r.statistic, 7.815);
    assert!((r.p_value - 0.05).abs() <= 0.0005);
    assert!((r.p_value - chi2_sf_numeric(7.815, 3)).abs() <= 1e-6);
    for k in 1..=6 {
        for x in [0.5, 1.0, 3.0, 7.815, 12.0] {
            let p = lr_test(x / 2.0, k).unwrap().p_value;
            assert!((p - chi2_sf_numeric(x, k)).abs() <= 1e-6, "k={k} x={x}");
        }
    }
}

#[test]
fn zero_gain_has_p_one_and_losses_are_rejected() {
    assert_eq!(lr_test(0.0, 3).unwrap().p_value, 1.0);
    assert_eq!(lr_test(-5e-10, 3).unwrap().p_value, 1.0);
    assert!(lr_test(-1e-6, 3).is_err());
    assert!(lr_test(1.0, 0).is_err());
}

#[test]
fn closed_form_loglik() {
    let ll = gaussian_loglik(10, 2.0);
    assert!((ll - (-5.0 * ((4.0 * std::f64::consts::PI).ln() + 1.0))).abs() < 1e-12);
}

proptest! {
    #[test]
    fn row_order_does_not_change_the_fit(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = random_design(&mut rng);
        let n = y.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let xp = Array2::from_shape_fn(x.dim(), |(i, j)| x[[perm[i], j]]);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let a = fit_matrix(&names(x.ncols()), x.view(), &y).unwrap();
        let b = fit_matrix(&names(x.ncols()), xp.view(), &yp).unwrap();
        for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((u - v).abs() <= 1e-8 * u.abs().max(1.0));
        }
        prop_assert!((a.loglik - b.loglik).abs() <= 1e-8 * a.loglik.abs().max(1.0));
    }

    #[test]
    fn rescaling_a_column_rescales_its_coefficient(seed in 0u64..1000, c in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = random_design(&mut rng);
        let mut xs = x.clone();
        xs.column_mut(0).mapv_inplace(|v| v * c);
        let a = fit_matrix(&names(x.ncols()), x.view(), &y).unwrap();
        let b = fit_matrix(&names(x.ncols()), xs.view(), &y).unwrap();
        prop_assert!((a.coefficients[1] - b.coefficients[1] * c).abs() <= 1e-7 * a.coefficients[1].abs().max(1.0));
        prop_assert!((a.loglik - b.loglik).abs() <= 1e-8 * a.loglik.abs().max(1.0));
    }

    #[test]
    fn p_value_decreases_with_gain(d1 in 0.0f64..50.0, d2 in 0.0f64..50.0, df in 1usize..6) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = lr_test(lo, df).unwrap().p_value;
        let b = lr_test(hi, df).unwrap().p_value;
        prop_assert!(b <= a);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn pearson_is_bounded_and_symmetric(v in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..40)) {
        let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        if let (Ok(r), Ok(s)) = (pearson(&x, &y), pearson(&y, &x)) {
            prop_assert!(r.abs() <= 1.0 + 1e-12);
            prop_assert!((r - s).abs() <= 1e-12);
        }
    }
}
