mod common;

use common::*;
use nalgebra::DMatrix;
use nort::{dense_svd, gsvt, gsvt_dense, svt, DenseOperator, GsvtOptions, Penalty, SvdConfig};
use proptest::prelude::*;

fn penalty_strategy() -> impl Strategy<Value = Penalty> {
    prop_oneof![
        Just(Penalty::Nuclear),
        (0.1f64..5.0).prop_map(|theta| Penalty::CappedL1 { theta }),
        (0.1f64..5.0).prop_map(|theta| Penalty::Lsp { theta }),
        (0usize..4).prop_map(|keep| Penalty::Tnn { keep }),
    ]
}

fn tight() -> GsvtOptions<'static> {
    GsvtOptions {
        rank_hint: 3,
        svd: SvdConfig {
            tol: 1e-13,
            max_power_iters: 2000,
            ..SvdConfig::default()
        },
        ..GsvtOptions::default()
    }
}

/// `0.5 ||X - A||_F^2 + lambda phi(X)`.
fn prox_value(x: &DMatrix<f64>, a: &DMatrix<f64>, p: &Penalty, lambda: f64) -> f64 {
    let (_, s, _) = dense_svd(x);
    0.5 * (x - a).norm_squared() + lambda * p.phi(&s)
}

proptest! {
    #[test]
    fn scalar_prox_beats_grid(
        p in penalty_strategy(),
        sigma in 0.0f64..10.0,
        lambda in 0.0f64..5.0,
        index in 1usize..6,
    ) {
        let y = p.scalar_prox(sigma, lambda, index).unwrap();
        prop_assert!(y >= 0.0 && y <= sigma + 1e-12);
        let at_y = prox_objective(&p, y, sigma, lambda, index);
        let grid = grid_min(&p, sigma, lambda, index, sigma.max(1.0) * 1.5, 20_001);
        prop_assert!(at_y <= grid + 1e-9, "{p}: prox {y} gives {at_y}, grid {grid}");
    }

    #[test]
    fn scalar_prox_is_monotone(
        p in penalty_strategy(),
        s1 in 0.0f64..10.0,
        ds in 0.0f64..3.0,
        lambda in 0.0f64..5.0,
        index in 1usize..6,
    ) {
        let a = p.scalar_prox(s1, lambda, index).unwrap();
        let b = p.scalar_prox(s1 + ds, lambda, index).unwrap();
        prop_assert!(b >= a, "{p}: prox({s1}) = {a} > prox({}) = {b}", s1 + ds);
    }

    #[test]
    fn gsvt_matches_full_svd_oracle(p in penalty_strategy(), seed in any::<u64>(), lambda in 0.05f64..2.0) {
        let mut r = rng(seed);
        let a = random_matrix(12, 9, &mut r) * 2.0;
        let (x_ref, _) = prox_oracle(&a, &p, lambda);
        let got = gsvt(&DenseOperator(a.clone()), &p, lambda, &tight()).unwrap();
        let x = &got.u * got.v.transpose();
        prop_assert!((&x - &x_ref).norm() <= 1e-8 * (1.0 + x_ref.norm()));
        prop_assert!(got.y.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(got.y.iter().all(|&y| y > 0.0));
    }

    #[test]
    fn gsvt_output_is_a_global_minimizer(p in penalty_strategy(), seed in any::<u64>(), lambda in 0.05f64..2.0) {
        let mut r = rng(seed);
        let a = random_matrix(8, 6, &mut r) * 2.0;
        let got = gsvt_dense(&a, &p, lambda).unwrap();
        let x = &got.u * got.v.transpose();
        let best = prox_value(&x, &a, &p, lambda);
        // Rank truncations of the input and random perturbations do no better.
        let (u, s, v) = dense_svd(&a);
        for k in 0..=s.len() {
            let mut t = DMatrix::zeros(8, 6);
            for (i, si) in s.iter().enumerate().take(k) {
                t += u.column(i) * v.column(i).transpose() * *si;
            }
            prop_assert!(best <= prox_value(&t, &a, &p, lambda) + 1e-9);
        }
        for _ in 0..5 {
            let y = &x + random_matrix(8, 6, &mut r) * 1e-3;
            prop_assert!(best <= prox_value(&y, &a, &p, lambda) + 1e-9);
        }
    }
}

#[test]
fn svt_is_the_nuclear_prox() {
    let mut r = rng(3);
    let a = random_matrix(15, 10, &mut r);
    let via_svt = svt(&DenseOperator(a.clone()), 0.7, &tight()).unwrap();
    let via_gsvt = gsvt(&DenseOperator(a.clone()), &Penalty::Nuclear, 0.7, &tight()).unwrap();
    let x1 = &via_svt.u * via_svt.v.transpose();
    let x2 = &via_gsvt.u * via_gsvt.v.transpose();
    assert!((x1 - x2).norm() <= 1e-12);
    let (_, s, _) = dense_svd(&a);
    let expect: Vec<f64> = s.iter().map(|v| v - 0.7).filter(|v| *v > 0.0).collect();
    assert_eq!(via_svt.y.len(), expect.len());
    for (g, e) in via_svt.y.iter().zip(&expect) {
        assert!((g - e).abs() <= 1e-9);
    }
}

#[test]
fn gsvt_rejects_bad_arguments() {
    let a = DenseOperator(DMatrix::identity(3, 3));
    assert!(gsvt(&a, &Penalty::Nuclear, -1.0, &GsvtOptions::default()).is_err());
    assert!(gsvt(
        &a,
        &Penalty::Lsp { theta: 0.0 },
        1.0,
        &GsvtOptions::default()
    )
    .is_err());
    assert!(Penalty::Nuclear.scalar_prox(-1.0, 1.0, 1).is_err());
}
