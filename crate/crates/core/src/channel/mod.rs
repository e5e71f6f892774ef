//! Linear time-varying channels and their delay-Doppler equivalents.
//!
//! A channel is a sparse set of taps, each with an integer delay, a complex
//! gain and a Doppler shift expressed in Doppler bins, realizing
//! `h[l, k] = sum_i h_i delta[l - l_i] exp(j 2 pi k_i k / (M N))` where `k`
//! is the absolute sample index of the received record.

mod operator;
mod profile;

pub use operator::{build_dd_matrix, DdChannelMatrix, DdChannelOperator, LinearOperator};
pub use profile::{
    eva_channel, ChannelProfile, DopplerGrid, DopplerModel, Fading, ProfileTap, TapDelay,
    SPEED_OF_LIGHT,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::modem::{demodulate_direct, modulate_direct, DelayDopplerGrid, TimeSignal, Waveform};
use crate::sync::Impairments;

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTap {
    pub delay: usize,
    pub gain: Complex64,
    /// Doppler shift in Doppler bins (cycles per frame), possibly fractional.
    pub doppler: f64,
}

impl ChannelTap {
    pub fn new(delay: usize, gain: Complex64, doppler: f64) -> Self {
        ChannelTap {
            delay,
            gain,
            doppler,
        }
    }

    pub fn is_static(&self) -> bool {
        self.doppler == 0.0
    }

    /// Gain of this tap at absolute sample `k`.
    pub fn gain_at(&self, k: usize, frame: &FrameConfig) -> Complex64 {
        if self.doppler == 0.0 {
            return self.gain;
        }
        self.gain
            * Complex64::from_polar(
                1.0,
                2.0 * PI * self.doppler * k as f64 / frame.size() as f64,
            )
    }
}

/// Tap-parametric linear time-varying channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LtvChannel {
    frame: FrameConfig,
    taps: Vec<ChannelTap>,
}

impl LtvChannel {
    pub fn new(frame: FrameConfig, taps: Vec<ChannelTap>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidParameter(
                "a channel needs at least one tap".into(),
            ));
        }
        if let Some(t) = taps
            .iter()
            .find(|t| !(t.doppler.is_finite() && t.gain.re.is_finite() && t.gain.im.is_finite()))
        {
            return Err(Error::InvalidParameter(format!("non-finite tap {t:?}")));
        }
        Ok(LtvChannel { frame, taps })
    }

    /// Single unit tap at delay zero.
    pub fn identity(frame: FrameConfig) -> Self {
        LtvChannel {
            frame,
            taps: vec![ChannelTap::new(0, Complex64::new(1.0, 0.0), 0.0)],
        }
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    pub fn taps(&self) -> &[ChannelTap] {
        &self.taps
    }

    /// `L_ch`, one more than the largest tap delay.
    pub fn length(&self) -> usize {
        1 + self.taps.iter().map(|t| t.delay).max().unwrap_or(0)
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }

    /// `h[l, k]`.
    pub fn response(&self, delay: usize, k: usize) -> Complex64 {
        self.taps
            .iter()
            .filter(|t| t.delay == delay)
            .map(|t| t.gain_at(k, &self.frame))
            .sum()
    }

    pub fn is_time_invariant(&self) -> bool {
        self.taps.iter().all(ChannelTap::is_static)
    }

    /// The channel as seen by a receiver whose sample clock starts `offset`
    /// samples into the record: each gain picks up its Doppler phase at
    /// `offset`.
    pub fn advanced(&self, offset: usize) -> Self {
        let taps = self
            .taps
            .iter()
            .map(|t| ChannelTap::new(t.delay, t.gain_at(offset, &self.frame), t.doppler))
            .collect();
        LtvChannel {
            frame: self.frame,
            taps,
        }
    }
}

/// Additive white complex Gaussian noise with a reproducible sample stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    variance: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(variance: f64, seed: u64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be >= 0, got {variance}"
            )));
        }
        Ok(NoiseSpec { variance, seed })
    }

    pub fn none() -> Self {
        NoiseSpec {
            variance: 0.0,
            seed: 0,
        }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `len` samples of `CN(0, variance)`. The same spec always yields the
    /// same samples, and a shorter request is a prefix of a longer one.
    pub fn samples(&self, len: usize) -> Vec<Complex64> {
        if self.variance == 0.0 {
            return vec![Complex64::default(); len];
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        let scale = (self.variance / 2.0).sqrt();
        (0..len)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * scale
            })
            .collect()
    }
}

/// Passes a transmitted frame through the channel.
///
/// Returns the received record `r[k] = exp(j 2 pi eps k / (M N)) sum_l h[l, k]
/// x[k - l - theta] + eta[k]` for `k` in `0 .. len(x) + theta + L_ch - 1`, with
/// `x` zero outside its support. With no impairments the first
/// `MN + L_cp` samples are the frame as seen by a synchronized receiver.
pub fn apply_channel(
    x: &TimeSignal,
    ch: &LtvChannel,
    noise: &NoiseSpec,
    impair: &Impairments,
) -> Vec<Complex64> {
    let mut r = propagate(x.samples(), ch, impair);
    add_noise(&mut r, noise);
    r
}

/// Noise-free part of [`apply_channel`].
pub fn propagate(x: &[Complex64], ch: &LtvChannel, impair: &Impairments) -> Vec<Complex64> {
    let frame = ch.frame();
    let theta = impair.theta(frame);
    let len = x.len() + theta + ch.length() - 1;
    let mut r = vec![Complex64::default(); len];
    for tap in ch.taps() {
        let shift = tap.delay + theta;
        for (i, xi) in x.iter().enumerate() {
            let k = i + shift;
            r[k] += tap.gain_at(k, frame) * xi;
        }
    }
    if impair.epsilon != 0.0 {
        let mn = frame.size() as f64;
        for (k, v) in r.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, 2.0 * PI * impair.epsilon * k as f64 / mn);
        }
    }
    r
}

pub fn add_noise(r: &mut [Complex64], noise: &NoiseSpec) {
    if noise.variance() == 0.0 {
        return;
    }
    let eta = noise.samples(r.len());
    for (v, e) in r.iter_mut().zip(eta) {
        *v += e;
    }
}

/// First `MN + L_cp` samples of a record as a frame with CP.
pub fn frame_window(record: &[Complex64], frame: &FrameConfig) -> Result<TimeSignal> {
    let len = frame.len_with_cp();
    if record.len() < len {
        return Err(Error::RecordTooShort {
            needed: len,
            got: record.len(),
        });
    }
    TimeSignal::with_cp(*frame, record[..len].to_vec())
}

/// End-to-end simulation together with the exact linear model.
#[derive(Debug, Clone)]
pub struct LinearizedIo {
    /// Demodulated received grid.
    pub received: DelayDopplerGrid,
    /// Equivalent delay-Doppler channel of the waveform.
    pub channel: DdChannelMatrix,
    /// Demodulated noise alone, `vec(D~) - H vec(D)` in exact arithmetic.
    pub noise: DelayDopplerGrid,
}

/// Modulates, propagates (no impairments), adds noise and demodulates.
pub fn linearized_io(
    grid: &DelayDopplerGrid,
    ch: &LtvChannel,
    noise: &NoiseSpec,
    w: Waveform,
) -> Result<LinearizedIo> {
    let frame = *grid.frame();
    let x = modulate_direct(grid, w);
    let mut r = propagate(x.samples(), ch, &Impairments::none());
    r.truncate(frame.len_with_cp());
    add_noise(&mut r, noise);
    let received = demodulate_direct(&TimeSignal::with_cp(frame, r)?, w)?;
    let eta = noise.samples(frame.len_with_cp());
    let noise_grid = demodulate_direct(&TimeSignal::with_cp(frame, eta)?, w)?;
    Ok(LinearizedIo {
        received,
        channel: build_dd_matrix(ch, w),
        noise: noise_grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ramp(frame: FrameConfig) -> TimeSignal {
        let s: Vec<_> = (0..frame.len_with_cp())
            .map(|i| c(i as f64 * 0.1, 1.0 - 0.05 * i as f64))
            .collect();
        TimeSignal::with_cp(frame, s).unwrap()
    }

    #[test]
    fn identity_channel_passes_signal() {
        let frame = FrameConfig::unit(4, 4, 2).unwrap();
        let x = ramp(frame);
        let r = apply_channel(
            &x,
            &LtvChannel::identity(frame),
            &NoiseSpec::none(),
            &Impairments::none(),
        );
        assert_eq!(r, x.samples());
    }

    #[test]
    fn static_taps_match_brute_force_convolution() {
        let frame = FrameConfig::unit(4, 4, 3).unwrap();
        let taps = vec![
            ChannelTap::new(0, c(0.8, 0.1), 0.0),
            ChannelTap::new(2, c(-0.3, 0.5), 0.0),
        ];
        let ch = LtvChannel::new(frame, taps.clone()).unwrap();
        let x = ramp(frame);
        let r = apply_channel(&x, &ch, &NoiseSpec::none(), &Impairments::none());
        let xs = x.samples();
        for (k, rk) in r.iter().enumerate() {
            let mut acc = c(0.0, 0.0);
            for t in &taps {
                if k >= t.delay && k - t.delay < xs.len() {
                    acc += t.gain * xs[k - t.delay];
                }
            }
            assert!((rk - acc).norm() < 1e-12);
        }
    }

    #[test]
    fn cfo_rotates_each_sample() {
        let frame = FrameConfig::unit(4, 4, 0).unwrap();
        let x = ramp(frame);
        let impair = Impairments::new(0, 0, 0.3, &frame).unwrap();
        let r = apply_channel(
            &x,
            &LtvChannel::identity(frame),
            &NoiseSpec::none(),
            &impair,
        );
        for (k, (rk, xk)) in r.iter().zip(x.samples()).enumerate() {
            let expected = xk * Complex64::from_polar(1.0, 2.0 * PI * 0.3 * k as f64 / 16.0);
            assert!((rk - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn timing_offset_shifts_with_zero_fill() {
        let frame = FrameConfig::unit(4, 2, 1).unwrap();
        let x = ramp(frame);
        let impair = Impairments::new(1, 1, 0.0, &frame).unwrap();
        let r = apply_channel(
            &x,
            &LtvChannel::identity(frame),
            &NoiseSpec::none(),
            &impair,
        );
        assert_eq!(r.len(), x.samples().len() + 5);
        assert!(r[..5].iter().all(|v| v.norm() == 0.0));
        assert_eq!(&r[5..], x.samples());
    }

    #[test]
    fn noise_is_reproducible() {
        let spec = NoiseSpec::new(0.5, 42).unwrap();
        let a = spec.samples(100);
        assert_eq!(a, spec.samples(100));
        assert_eq!(&a[..10], &spec.samples(10)[..]);
        assert!(NoiseSpec::new(-1.0, 0).is_err());
    }

    #[test]
    fn empty_channel_is_rejected() {
        let frame = FrameConfig::unit(2, 2, 0).unwrap();
        assert!(LtvChannel::new(frame, vec![]).is_err());
    }
}
