//! Embedded impulse-pilot channel estimation in the delay-Doppler domain.
//!
//! The pilot `sqrt(rho_p)` sits at `(m_p, n_p)` inside a zero guard region.
//! A tap of delay `l` and integer Doppler `k` shows up at bin
//! `(m_p + l, n_p + k)`; the bin value divided by the pilot amplitude is the
//! tap's delay-Doppler gain. Gains are stored in the OTFS phase convention
//! whatever waveform they were measured on.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::channel::{build_dd_matrix, ChannelTap, DdChannelMatrix, DdChannelOperator, LtvChannel};
use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::modem::{BinKind, DelayDopplerGrid, OverlayMask, Waveform};
use crate::transform::omega;

/// Pilot placement and detection settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotConfig {
    pub m_p: usize,
    pub n_p: usize,
    /// Pilot power, linear.
    pub rho_p: f64,
    /// Guard half-width in delay bins.
    pub guard_delay: usize,
    /// Guard half-width in Doppler bins; `None` guards every Doppler bin.
    pub guard_doppler: Option<usize>,
    /// Detection threshold as a multiple of the noise standard deviation.
    pub detection_threshold: f64,
}

impl PilotConfig {
    /// Checks the pilot against the frame. The pilot row must stay out of
    /// the cyclic prefix so timing acquisition sees exactly `N` pilot samples.
    pub fn validate(&self, frame: &FrameConfig) -> Result<()> {
        let (m, n) = (frame.m(), frame.n());
        if !(self.rho_p.is_finite() && self.rho_p > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pilot power must be > 0, got {}",
                self.rho_p
            )));
        }
        if !(self.detection_threshold.is_finite() && self.detection_threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "detection threshold must be > 0, got {}",
                self.detection_threshold
            )));
        }
        if self.n_p >= n {
            return Err(Error::PilotGuard(format!(
                "n_p = {} outside 0..{n}",
                self.n_p
            )));
        }
        if self.guard_delay > self.m_p || self.m_p + self.guard_delay >= m {
            return Err(Error::PilotGuard(format!(
                "delay guard {} around m_p = {} does not fit 0..{m}",
                self.guard_delay, self.m_p
            )));
        }
        if self.m_p + frame.cp_len() >= m {
            return Err(Error::PilotGuard(format!(
                "m_p + L_cp = {} must be below M = {m}",
                self.m_p + frame.cp_len()
            )));
        }
        if let Some(g) = self.guard_doppler {
            if g > self.n_p || self.n_p + g >= n {
                return Err(Error::PilotGuard(format!(
                    "Doppler guard {g} around n_p = {} does not fit 0..{n}",
                    self.n_p
                )));
            }
        }
        Ok(())
    }

    pub fn amplitude(&self) -> f64 {
        self.rho_p.sqrt()
    }

    /// Doppler columns covered by the guard region.
    pub fn guard_columns(&self, frame: &FrameConfig) -> Vec<usize> {
        match self.guard_doppler {
            None => (0..frame.n()).collect(),
            Some(g) => (self.n_p - g..=self.n_p + g).collect(),
        }
    }

    /// Bin roles: the pilot, its guard region, data elsewhere.
    pub fn mask(&self, frame: &FrameConfig) -> Result<OverlayMask> {
        self.validate(frame)?;
        let mut mask = OverlayMask::all_data(*frame);
        for n in self.guard_columns(frame) {
            for m in self.m_p - self.guard_delay..=self.m_p + self.guard_delay {
                mask.set(m, n, BinKind::Guard);
            }
        }
        mask.set(self.m_p, self.n_p, BinKind::Pilot);
        Ok(mask)
    }

    /// Grid holding only the pilot.
    pub fn pilot_grid(&self, frame: &FrameConfig) -> DelayDopplerGrid {
        let mut g = DelayDopplerGrid::zeros(*frame);
        g.set(self.m_p, self.n_p, Complex64::new(self.amplitude(), 0.0));
        g
    }

    /// Signed Doppler offset of column `n` from the pilot, in `[-N/2, N/2)`.
    fn doppler_offset(&self, n: usize, frame_n: usize) -> i64 {
        let half = frame_n / 2;
        ((n + frame_n + half - self.n_p) % frame_n) as i64 - half as i64
    }
}

/// Writes the pilot into a data grid. Every guard bin must already be zero.
pub fn embed_pilot(grid: &DelayDopplerGrid, pc: &PilotConfig) -> Result<DelayDopplerGrid> {
    let frame = *grid.frame();
    let mask = pc.mask(&frame)?;
    let mut out = grid.clone();
    for n in 0..frame.n() {
        for m in 0..frame.m() {
            if mask.kind(m, n) != BinKind::Data && grid.get(m, n) != Complex64::default() {
                return Err(Error::PilotGuard(format!(
                    "data at reserved bin ({m}, {n})"
                )));
            }
        }
    }
    out.set(pc.m_p, pc.n_p, Complex64::new(pc.amplitude(), 0.0));
    Ok(out)
}

/// Noise standard deviation from the guard rows just before the pilot,
/// `[m_p - ceil(guard_delay / 2), m_p)` across the guard columns. A causal
/// channel leaves those bins empty.
pub fn estimate_noise_std(received: &DelayDopplerGrid, pc: &PilotConfig) -> Result<f64> {
    let frame = *received.frame();
    pc.validate(&frame)?;
    let rows = pc.guard_delay.div_ceil(2);
    if rows == 0 {
        return Err(Error::InvalidParameter(
            "noise estimation needs a delay guard".into(),
        ));
    }
    let cols = pc.guard_columns(&frame);
    let mut acc = 0.0;
    for &n in &cols {
        for m in pc.m_p - rows..pc.m_p {
            acc += received.get(m, n).norm_sqr();
        }
    }
    Ok((acc / (rows * cols.len()) as f64).sqrt())
}

/// One detected path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedTap {
    pub delay: usize,
    pub doppler: i64,
    /// Delay-Doppler gain in the OTFS convention.
    pub gain: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedChannel {
    pub frame: FrameConfig,
    pub pilot: PilotConfig,
    pub taps: Vec<EstimatedTap>,
    /// Waveform the estimate was measured on.
    pub source: Waveform,
}

/// Scans the causal part of the guard region, delays `0..=guard_delay` and
/// the guarded Doppler columns, and keeps every bin whose magnitude reaches
/// `detection_threshold * sigma_hat`. With `sigma_hat = 0` any nonzero bin
/// above `1e-9 sqrt(rho_p)` counts.
pub fn estimate_channel(
    received: &DelayDopplerGrid,
    pc: &PilotConfig,
    sigma_hat: f64,
    w: Waveform,
) -> Result<EstimatedChannel> {
    let frame = *received.frame();
    pc.validate(&frame)?;
    let amp = pc.amplitude();
    let level = (pc.detection_threshold * sigma_hat).max(1e-9 * amp);
    let omega_p = omega(pc.m_p, pc.n_p, &frame);
    let mut taps = Vec::new();
    for delay in 0..=pc.guard_delay {
        let m = pc.m_p + delay;
        for n in pc.guard_columns(&frame) {
            let v = received.get(m, n);
            if v.norm() < level {
                continue;
            }
            let mut gain = v / amp;
            if w == Waveform::ScIfdma {
                gain *= omega_p * omega(m, n, &frame).conj();
            }
            taps.push(EstimatedTap {
                delay,
                doppler: pc.doppler_offset(n, frame.n()),
                gain,
            });
        }
    }
    if taps.is_empty() {
        return Err(Error::EmptyEstimate);
    }
    Ok(EstimatedChannel {
        frame,
        pilot: *pc,
        taps,
        source: w,
    })
}

impl EstimatedChannel {
    /// Tap-parametric channel whose pilot response reproduces the measured
    /// bins. A tap `(l, k)` with time-domain gain `h` produces
    /// `h exp(j 2 pi k (m_p + l + L_cp) / (M N))` at its pilot bin, which is
    /// inverted here.
    pub fn to_channel(&self) -> Result<LtvChannel> {
        if self.taps.is_empty() {
            return Err(Error::EmptyEstimate);
        }
        let mn = self.frame.size() as f64;
        let cp = self.frame.cp_len();
        let taps = self
            .taps
            .iter()
            .map(|t| {
                let k = t.doppler as f64;
                let phase = -2.0 * PI * k * (self.pilot.m_p + t.delay + cp) as f64 / mn;
                ChannelTap::new(t.delay, t.gain * Complex64::from_polar(1.0, phase), k)
            })
            .collect();
        LtvChannel::new(self.frame, taps)
    }

    pub fn to_operator(&self, w: Waveform) -> Result<DdChannelOperator> {
        Ok(DdChannelOperator::new(&self.to_channel()?, w))
    }
}

/// Dense equivalent channel rebuilt from the estimated taps.
pub fn reconstruct_dd_matrix(est: &EstimatedChannel, w: Waveform) -> Result<DdChannelMatrix> {
    Ok(build_dd_matrix(&est.to_channel()?, w))
}
