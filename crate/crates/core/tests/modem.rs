use std::f64::consts::PI;

use ddlink_core::modem::{
    demap_bits, demodulate, demodulate_direct, map_bits, modulate, modulate_direct, Constellation,
    Structure,
};
use ddlink_core::transform::omega;
use ddlink_core::{DelayDopplerGrid, FrameConfig, Waveform};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid_from(frame: FrameConfig, v: &[(f64, f64)]) -> DelayDopplerGrid {
    DelayDopplerGrid::from_vec(
        frame,
        v.iter().map(|&(a, b)| Complex64::new(a, b)).collect(),
    )
    .unwrap()
}

fn frame_and_grid() -> impl Strategy<Value = (FrameConfig, DelayDopplerGrid)> {
    (1usize..9, 1usize..9).prop_flat_map(|(m, n)| {
        let cp = (m * n - 1).min(3);
        prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), m * n).prop_map(move |v| {
            let frame = FrameConfig::unit(m, n, cp).unwrap();
            (frame, grid_from(frame, &v))
        })
    })
}

/// `s[m + nM] = N^-1/2 sum_q D[m, q] exp(j 2 pi n q / N)`, summed by hand.
fn otfs_naive(d: &DelayDopplerGrid) -> Vec<Complex64> {
    let f = d.frame();
    let (m, n) = (f.m(), f.n());
    let mut s = vec![Complex64::default(); m * n];
    for col in 0..n {
        for row in 0..m {
            let mut acc = Complex64::default();
            for q in 0..n {
                acc += d.get(row, q)
                    * Complex64::from_polar(1.0, 2.0 * PI * (col * q) as f64 / n as f64);
            }
            s[row + col * m] = acc / (n as f64).sqrt();
        }
    }
    s
}

/// DFT-spread path by hand: M-point DFT of each Doppler column, subcarrier
/// `n + m' N`, then an MN-point IDFT.
fn scifdma_naive(d: &DelayDopplerGrid) -> Vec<Complex64> {
    let f = d.frame();
    let (m, n) = (f.m(), f.n());
    let mn = m * n;
    let mut x = vec![Complex64::default(); mn];
    for col in 0..n {
        for k in 0..m {
            let mut acc = Complex64::default();
            for row in 0..m {
                acc += d.get(row, col)
                    * Complex64::from_polar(1.0, -2.0 * PI * (row * k) as f64 / m as f64);
            }
            x[col + k * n] = acc / (m as f64).sqrt();
        }
    }
    (0..mn)
        .map(|t| {
            x.iter()
                .enumerate()
                .map(|(f, v)| v * Complex64::from_polar(1.0, 2.0 * PI * (f * t) as f64 / mn as f64))
                .sum::<Complex64>()
                / (mn as f64).sqrt()
        })
        .collect()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn otfs_matches_hand_written_transform() {
    let frame = FrameConfig::unit(5, 6, 2).unwrap();
    let v: Vec<_> = (0..30)
        .map(|i| ((i as f64 * 0.37).sin(), (i as f64 * 1.1).cos()))
        .collect();
    let d = grid_from(frame, &v);
    let tx = modulate_direct(&d, Waveform::Otfs);
    assert!(max_diff(tx.frame_samples().unwrap(), &otfs_naive(&d)) < 1e-12);
}

#[test]
fn scifdma_matches_hand_written_spreading() {
    let frame = FrameConfig::unit(4, 6, 2).unwrap();
    let v: Vec<_> = (0..24)
        .map(|i| ((i as f64 * 0.91).cos(), (i as f64 * 0.2).sin()))
        .collect();
    let d = grid_from(frame, &v);
    for structure in [Structure::Direct, Structure::Spread] {
        let tx = modulate(&d, Waveform::ScIfdma, structure);
        assert!(max_diff(tx.frame_samples().unwrap(), &scifdma_naive(&d)) < 1e-12);
    }
}

#[test]
fn cyclic_prefix_copies_the_tail() {
    let frame = FrameConfig::unit(4, 4, 3).unwrap();
    let v: Vec<_> = (0..16).map(|i| (i as f64, -(i as f64))).collect();
    let tx = modulate_direct(&grid_from(frame, &v), Waveform::Otfs);
    let s = tx.samples();
    assert_eq!(s.len(), 19);
    assert_eq!(&s[..3], &s[16..]);
}

#[test]
fn scifdma_is_otfs_of_derotated_grid() {
    let frame = FrameConfig::unit(6, 4, 1).unwrap();
    let v: Vec<_> = (0..24)
        .map(|i| ((i as f64).sqrt(), (i as f64 * 0.3).sin()))
        .collect();
    let d = grid_from(frame, &v);
    let mut rotated = d.clone();
    for n in 0..4 {
        for m in 0..6 {
            rotated.set(m, n, d.get(m, n) * omega(m, n, &frame).conj());
        }
    }
    let a = modulate_direct(&d, Waveform::ScIfdma);
    let b = modulate_direct(&rotated, Waveform::Otfs);
    assert!(max_diff(a.samples(), b.samples()) < 1e-12);
}

#[test]
fn qam_bits_survive_the_link_without_channel() {
    let frame = FrameConfig::unit(8, 4, 2).unwrap();
    let bits: Vec<bool> = (0..128).map(|i| (i * 7 + i / 3) % 5 < 2).collect();
    for w in Waveform::ALL {
        let grid = map_bits(&bits, Constellation::Qam16, frame, None).unwrap();
        let rx = demodulate_direct(&modulate_direct(&grid, w), w).unwrap();
        assert_eq!(demap_bits(&rx, Constellation::Qam16, None).unwrap(), bits);
    }
}

proptest! {
    #[test]
    fn direct_and_spread_agree((_frame, d) in frame_and_grid()) {
        for w in Waveform::ALL {
            let a = modulate(&d, w, Structure::Direct);
            let b = modulate(&d, w, Structure::Spread);
            prop_assert!(max_diff(a.samples(), b.samples()) < 1e-10);
            let x = demodulate(&a, w, Structure::Direct).unwrap();
            let y = demodulate(&a, w, Structure::Spread).unwrap();
            prop_assert!(max_diff(x.as_slice(), y.as_slice()) < 1e-10);
        }
    }

    #[test]
    fn round_trip_and_energy((frame, d) in frame_and_grid()) {
        for w in Waveform::ALL {
            let tx = modulate_direct(&d, w);
            let energy: f64 = tx.frame_samples().unwrap().iter().map(|v| v.norm_sqr()).sum();
            prop_assert!((energy - d.energy()).abs() < 1e-9 * (1.0 + d.energy()));
            let back = demodulate_direct(&tx, w).unwrap();
            prop_assert!(max_diff(back.as_slice(), d.as_slice()) < 1e-10);
        }
        prop_assert!(frame.size() == d.as_slice().len());
    }

    #[test]
    fn decisions_invert_mapping(index in 0usize..16, qpsk in 0usize..4) {
        let c = Constellation::Qam16;
        prop_assert_eq!(c.decide(c.map(&c.index_bits(index))), index);
        let c = Constellation::Qpsk;
        prop_assert_eq!(c.decide(c.map(&c.index_bits(qpsk))), qpsk);
    }
}
