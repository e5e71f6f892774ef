//! Grid geometry of one delay-Doppler frame.

use crate::error::{Error, Result};

/// Geometry and RF parameters of a frame of `M` delay bins by `N` Doppler bins.
///
/// The sample period is the delay spacing `1 / bandwidth_hz`. One block of
/// `M` samples lasts `T = M Δτ`, the Doppler spacing is `1 / (N T)` and the
/// subcarrier spacing of the equivalent DFT-spread OFDM symbol is `1 / T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConfig {
    m: usize,
    n: usize,
    cp_len: usize,
    bandwidth_hz: f64,
    carrier_hz: f64,
}

impl FrameConfig {
    pub fn new(
        m: usize,
        n: usize,
        cp_len: usize,
        bandwidth_hz: f64,
        carrier_hz: f64,
    ) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Frame(format!(
                "grid must be non-empty, got M={m}, N={n}"
            )));
        }
        if cp_len >= m * n {
            return Err(Error::Frame(format!(
                "cyclic prefix length {cp_len} must be shorter than the frame ({})",
                m * n
            )));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(Error::Frame(format!(
                "bandwidth must be positive, got {bandwidth_hz}"
            )));
        }
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::Frame(format!(
                "carrier frequency must be positive, got {carrier_hz}"
            )));
        }
        Ok(FrameConfig {
            m,
            n,
            cp_len,
            bandwidth_hz,
            carrier_hz,
        })
    }

    /// Small frame with unit bandwidth, handy for algebraic tests.
    pub fn unit(m: usize, n: usize, cp_len: usize) -> Result<Self> {
        Self::new(m, n, cp_len, 1.0, 1.0)
    }

    /// Number of delay bins `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of Doppler bins `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    /// `M N`, the number of grid bins and of samples per frame without CP.
    pub fn size(&self) -> usize {
        self.m * self.n
    }

    /// Samples per frame including the cyclic prefix.
    pub fn len_with_cp(&self) -> usize {
        self.size() + self.cp_len
    }

    pub fn delay_spacing_s(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    /// Block duration `T = M Δτ`.
    pub fn block_duration_s(&self) -> f64 {
        self.m as f64 * self.delay_spacing_s()
    }

    pub fn doppler_spacing_hz(&self) -> f64 {
        1.0 / (self.n as f64 * self.block_duration_s())
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.n as f64 * self.doppler_spacing_hz()
    }

    pub fn with_cp_len(mut self, cp_len: usize) -> Result<Self> {
        if cp_len >= self.size() {
            return Err(Error::Frame(format!(
                "cyclic prefix length {cp_len} must be shorter than the frame ({})",
                self.size()
            )));
        }
        self.cp_len = cp_len;
        Ok(self)
    }
}
