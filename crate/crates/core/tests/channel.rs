use std::f64::consts::PI;

use ddlink_core::channel::{
    build_dd_matrix, linearized_io, propagate, ChannelProfile, ChannelTap, DdChannelOperator,
    LinearOperator, LtvChannel, NoiseSpec,
};
use ddlink_core::modem::modulate_direct;
use ddlink_core::sync::Impairments;
use ddlink_core::transform::omega;
use ddlink_core::{DelayDopplerGrid, FrameConfig, Waveform};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn tap_strategy(max_delay: usize, n: usize) -> impl Strategy<Value = ChannelTap> {
    let half = n as f64 / 2.0;
    (0..=max_delay, -1.0f64..1.0, -1.0f64..1.0, -half..half)
        .prop_map(|(l, a, b, k)| ChannelTap::new(l, c(a, b), k))
}

fn channel_strategy() -> impl Strategy<Value = LtvChannel> {
    (2usize..7, 2usize..7).prop_flat_map(|(m, n)| {
        let cp = (m - 1).min(3);
        prop::collection::vec(tap_strategy(cp, n), 1..4).prop_map(move |taps| {
            LtvChannel::new(FrameConfig::unit(m, n, cp).unwrap(), taps).unwrap()
        })
    })
}

fn grid(frame: FrameConfig, seed: f64) -> DelayDopplerGrid {
    let v = (0..frame.size())
        .map(|i| c((i as f64 * seed).sin(), (i as f64 * 1.7 + seed).cos()))
        .collect();
    DelayDopplerGrid::from_vec(frame, v).unwrap()
}

#[test]
fn time_domain_matches_direct_convolution() {
    let frame = FrameConfig::unit(4, 3, 2).unwrap();
    let taps = vec![
        ChannelTap::new(0, c(0.8, 0.1), 0.3),
        ChannelTap::new(2, c(-0.2, 0.4), -1.0),
    ];
    let ch = LtvChannel::new(frame, taps.clone()).unwrap();
    let x: Vec<_> = (0..14)
        .map(|i| c(i as f64, 1.0 / (i as f64 + 1.0)))
        .collect();
    let r = propagate(&x, &ch, &Impairments::none());
    assert_eq!(r.len(), 14 + 2);
    for (k, rk) in r.iter().enumerate() {
        let mut want = Complex64::default();
        for t in &taps {
            if k >= t.delay && k - t.delay < x.len() {
                let phase = 2.0 * PI * t.doppler * k as f64 / 12.0;
                want += t.gain * Complex64::from_polar(1.0, phase) * x[k - t.delay];
            }
        }
        assert!((rk - want).norm() < 1e-12, "sample {k}");
    }
}

/// M = N = 2 with one static delay-1 tap: probing each unit grid gives the
/// shifted bin, with the wrapped row picking up `exp(-j 2 pi n / N)`.
#[test]
fn unit_probes_through_a_one_sample_delay() {
    let frame = FrameConfig::unit(2, 2, 1).unwrap();
    let ch = LtvChannel::new(frame, vec![ChannelTap::new(1, c(1.0, 0.0), 0.0)]).unwrap();
    let h = build_dd_matrix(&ch, Waveform::Otfs).into_matrix();
    #[rustfmt::skip]
    let want = DMatrix::from_row_slice(4, 4, &[
        c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0),
        c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0),
        c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0),
        c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0),
    ]);
    assert!((h - want).norm() < 1e-12);
}

#[test]
fn integer_doppler_shifts_doppler_bins() {
    let frame = FrameConfig::unit(4, 8, 2).unwrap();
    let k = 3usize;
    let ch = LtvChannel::new(frame, vec![ChannelTap::new(0, c(1.0, 0.0), k as f64)]).unwrap();
    let d = grid(frame, 0.4);
    let io = linearized_io(&d, &ch, &NoiseSpec::none(), Waveform::Otfs).unwrap();
    for n in 0..8 {
        for m in 0..4 {
            let phase = 2.0 * PI * (k * (m + 2)) as f64 / 32.0;
            let want = d.get(m, (n + 8 - k) % 8) * Complex64::from_polar(1.0, phase);
            assert!((io.received.get(m, n) - want).norm() < 1e-12);
        }
    }
}

#[test]
fn noise_has_requested_variance() {
    let noise = NoiseSpec::new(0.3, 42).unwrap();
    let s = noise.samples(10_000);
    let var = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.len() as f64;
    assert!((var / 0.3 - 1.0).abs() < 0.05, "{var}");
    let mean: Complex64 = s.iter().sum::<Complex64>() / s.len() as f64;
    assert!(mean.norm() < 0.03);
    assert_eq!(s, noise.samples(10_000));
}

#[test]
fn eva_realizations_have_unit_mean_energy() {
    let frame = FrameConfig::new(32, 16, 8, 7.68e6, 5.9e9).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let eva = ChannelProfile::eva();
    let mean = (0..4000)
        .map(|_| {
            eva.realize(&frame, 500.0, Default::default(), &mut rng)
                .energy()
        })
        .sum::<f64>()
        / 4000.0;
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
}

#[test]
fn doppler_stays_below_the_maximum_shift() {
    let frame = FrameConfig::new(32, 16, 8, 7.68e6, 5.9e9).unwrap();
    let nu_max = 5.9e9 * (500.0 / 3.6) / 299_792_458.0 / frame.doppler_spacing_hz();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for _ in 0..200 {
        let ch = ChannelProfile::eva3().realize(&frame, 500.0, Default::default(), &mut rng);
        assert!(ch.taps().iter().all(|t| t.doppler.abs() <= nu_max + 1e-12));
    }
}

proptest! {
    #[test]
    fn scifdma_channel_is_phase_rotated_otfs_channel(ch in channel_strategy()) {
        let frame = *ch.frame();
        let ho = build_dd_matrix(&ch, Waveform::Otfs).into_matrix();
        let hs = build_dd_matrix(&ch, Waveform::ScIfdma).into_matrix();
        let m = frame.m();
        let w = |i: usize| omega(i % m, i / m, &frame);
        for i in 0..frame.size() {
            for j in 0..frame.size() {
                let want = w(i) * ho[(i, j)] * w(j).conj();
                prop_assert!((hs[(i, j)] - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn static_delay_is_a_wrapped_row_shift(m in 2usize..7, n in 1usize..7, l in 0usize..3, seed in 0.1f64..3.0) {
        let cp = (m - 1).min(3);
        let l = l.min(cp);
        let frame = FrameConfig::unit(m, n, cp).unwrap();
        let ch = LtvChannel::new(frame, vec![ChannelTap::new(l, c(1.0, 0.0), 0.0)]).unwrap();
        let d = grid(frame, seed);
        let rx = linearized_io(&d, &ch, &NoiseSpec::none(), Waveform::Otfs).unwrap().received;
        for q in 0..n {
            for row in 0..m {
                let want = if row >= l {
                    d.get(row - l, q)
                } else {
                    d.get(row + m - l, q) * Complex64::from_polar(1.0, -2.0 * PI * q as f64 / n as f64)
                };
                prop_assert!((rx.get(row, q) - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn operator_and_simulation_agree(ch in channel_strategy(), seed in 0.1f64..3.0) {
        let frame = *ch.frame();
        let d = grid(frame, seed);
        for w in Waveform::ALL {
            let io = linearized_io(&d, &ch, &NoiseSpec::none(), w).unwrap();
            let op = DdChannelOperator::new(&ch, w);
            let y = op.apply(d.as_slice());
            for (a, b) in y.iter().zip(io.received.as_slice()) {
                prop_assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cfo_only_rotates_the_record(eps in -0.5f64..0.5) {
        let frame = FrameConfig::unit(4, 4, 2).unwrap();
        let x = modulate_direct(&grid(frame, 0.7), Waveform::Otfs).into_samples();
        let ch = LtvChannel::identity(frame);
        let plain = propagate(&x, &ch, &Impairments::none());
        let rotated = propagate(&x, &ch, &Impairments::new(0, 0, eps, &frame).unwrap());
        for (k, (a, b)) in plain.iter().zip(&rotated).enumerate() {
            let want = a * Complex64::from_polar(1.0, 2.0 * PI * eps * k as f64 / 16.0);
            prop_assert!((b - want).norm() < 1e-12);
        }
    }
}
