use ddlink_core::channel::{
    build_dd_matrix, ChannelTap, DdChannelOperator, LinearOperator, LtvChannel,
};
use ddlink_core::equalizer::{
    equalize_iterative, equalize_mmse, lsmr, mmse_solve, ColumnSubset, IterativeConfig,
};
use ddlink_core::transform::omega;
use ddlink_core::{DelayDopplerGrid, FrameConfig, Waveform};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(a: &[Complex64], b: &[Complex64]) -> f64 {
    let n: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let d: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (n / d).sqrt()
}

fn channel(f: FrameConfig) -> LtvChannel {
    LtvChannel::new(
        f,
        vec![
            ChannelTap::new(0, c(0.7, 0.2), 0.4),
            ChannelTap::new(1, c(-0.3, 0.5), -1.6),
            ChannelTap::new(3, c(0.1, -0.4), 2.2),
        ],
    )
    .unwrap()
}

#[test]
fn mmse_matches_the_normal_equations() {
    let h = DMatrix::from_fn(6, 4, |i, j| {
        c((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64).sin())
    });
    let y: Vec<_> = (0..6).map(|i| c(i as f64, 1.0)).collect();
    let x = mmse_solve(&h, &y, 0.3).unwrap();
    let hh = h.adjoint();
    let lhs = (&hh * &h + DMatrix::identity(4, 4) * c(0.3, 0.0)) * DVector::from_vec(x);
    let rhs = hh * DVector::from_vec(y);
    assert!((lhs - rhs).norm() < 1e-10);
}

#[test]
fn noiseless_square_system_is_inverted() {
    let f = FrameConfig::unit(8, 4, 3).unwrap();
    let h = build_dd_matrix(&channel(f), Waveform::Otfs).into_matrix();
    let d: Vec<_> = (0..32)
        .map(|i| c((i % 3) as f64, -((i % 5) as f64)))
        .collect();
    let y = (&h * DVector::from_vec(d.clone())).as_slice().to_vec();
    assert!(rel(&mmse_solve(&h, &y, 0.0).unwrap(), &d) < 1e-9);
}

#[test]
fn sc_equalization_is_the_rotated_otfs_equalization() {
    let f = FrameConfig::unit(8, 8, 3).unwrap();
    let ch = channel(f);
    let ho = build_dd_matrix(&ch, Waveform::Otfs).into_matrix();
    let hs = build_dd_matrix(&ch, Waveform::ScIfdma).into_matrix();
    let w: Vec<_> = (0..64).map(|i| omega(i % 8, i / 8, &f)).collect();
    let y: Vec<_> = (0..64)
        .map(|i| c((i as f64 * 0.3).cos(), (i as f64 * 0.7).sin()))
        .collect();
    let xs = mmse_solve(&hs, &y, 0.05).unwrap();
    let yo: Vec<_> = y.iter().zip(&w).map(|(a, b)| a * b.conj()).collect();
    let xo = mmse_solve(&ho, &yo, 0.05).unwrap();
    let rotated: Vec<_> = xo.iter().zip(&w).map(|(a, b)| a * b).collect();
    assert!(rel(&xs, &rotated) < 1e-10);
}

#[test]
fn iterative_and_dense_grids_agree() {
    let f = FrameConfig::unit(16, 8, 4).unwrap();
    let ch = channel(f);
    let y = DelayDopplerGrid::from_vec(f, (0..128).map(|i| c((i as f64).sin(), 0.5)).collect())
        .unwrap();
    for w in Waveform::ALL {
        let dense = equalize_mmse(&y, build_dd_matrix(&ch, w).matrix(), 0.02).unwrap();
        let (it, outcome) = equalize_iterative(
            &y,
            &DdChannelOperator::new(&ch, w),
            0.02,
            IterativeConfig::default(),
        )
        .unwrap();
        assert!(outcome.converged);
        assert!(rel(it.as_slice(), dense.as_slice()) < 1e-6);
    }
}

#[test]
fn column_subset_solves_the_reduced_problem() {
    let f = FrameConfig::unit(8, 4, 3).unwrap();
    let h = build_dd_matrix(&channel(f), Waveform::ScIfdma).into_matrix();
    let cols: Vec<usize> = (0..32).filter(|i| i % 3 != 0).collect();
    let y: Vec<_> = (0..32)
        .map(|i| c(1.0 / (1.0 + i as f64), (i as f64).cos()))
        .collect();
    let sub = ColumnSubset::new(&h, cols.clone()).unwrap();
    let it = lsmr(&sub, &y, 0.1, IterativeConfig::default()).unwrap();
    let dense = mmse_solve(&h.select_columns(&cols), &y, 0.01).unwrap();
    assert!(rel(&it.solution, &dense) < 1e-8);
    let full = sub.scatter(&it.solution);
    assert!(full
        .iter()
        .enumerate()
        .all(|(i, v)| cols.contains(&i) || *v == Complex64::default()));
}

#[test]
fn zero_budget_returns_zero_and_not_converged() {
    let h = DMatrix::<Complex64>::identity(3, 3);
    let out = lsmr(
        &h,
        &[c(1.0, 0.0); 3],
        0.0,
        IterativeConfig {
            max_iter: 0,
            tol: 1e-10,
        },
    )
    .unwrap();
    assert!(!out.converged);
    assert!(out.solution.iter().all(|v| *v == Complex64::default()));
}

proptest! {
    #[test]
    fn lsmr_agrees_with_dense_mmse(
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 30),
        rhs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
        damp in 0.05f64..1.0,
    ) {
        let h = DMatrix::from_iterator(6, 5, entries.iter().map(|&(a, b)| c(a, b)));
        let y: Vec<_> = rhs.iter().map(|&(a, b)| c(a, b)).collect();
        prop_assume!(y.iter().any(|v| v.norm() > 1e-3));
        let it = lsmr(&h, &y, damp, IterativeConfig { max_iter: 500, tol: 1e-14 }).unwrap();
        let dense = mmse_solve(&h, &y, damp * damp).unwrap();
        prop_assert!(rel(&it.solution, &dense) < 1e-7);
        prop_assert_eq!(h.nrows(), LinearOperator::nrows(&h));
    }
}
