use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frame::FrameConfig;

/// The two waveforms compared by this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Waveform {
    Otfs,
    ScIfdma,
}

impl Waveform {
    pub const ALL: [Waveform; 2] = [Waveform::Otfs, Waveform::ScIfdma];

    pub fn as_str(&self) -> &'static str {
        match self {
            Waveform::Otfs => "OTFS",
            Waveform::ScIfdma => "SC_IFDMA",
        }
    }
}

impl fmt::Display for Waveform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Waveform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "OTFS" => Ok(Waveform::Otfs),
            "SC_IFDMA" | "SCIFDMA" | "SC_FDMA" => Ok(Waveform::ScIfdma),
            other => Err(Error::InvalidParameter(format!(
                "unknown waveform '{other}'"
            ))),
        }
    }
}

/// `M x N` matrix of delay-Doppler symbols, rows indexed by delay.
///
/// Storage is column-major, so [`as_slice`](Self::as_slice) is `vec(D)` with
/// entry `(m, n)` at index `m + n M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDopplerGrid {
    frame: FrameConfig,
    data: DMatrix<Complex64>,
}

impl DelayDopplerGrid {
    pub fn zeros(frame: FrameConfig) -> Self {
        DelayDopplerGrid {
            frame,
            data: DMatrix::zeros(frame.m(), frame.n()),
        }
    }

    pub fn from_matrix(frame: FrameConfig, data: DMatrix<Complex64>) -> Result<Self> {
        if data.nrows() != frame.m() || data.ncols() != frame.n() {
            return Err(Error::shape(
                format!("{}x{} grid", frame.m(), frame.n()),
                format!("{}x{}", data.nrows(), data.ncols()),
            ));
        }
        Ok(DelayDopplerGrid { frame, data })
    }

    /// Builds a grid from `vec(D)`.
    pub fn from_vec(frame: FrameConfig, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != frame.size() {
            return Err(Error::shape(
                format!("{} entries", frame.size()),
                format!("{} entries", data.len()),
            ));
        }
        Ok(Self::from_vec_unchecked(frame, data))
    }

    pub(crate) fn from_vec_unchecked(frame: FrameConfig, data: Vec<Complex64>) -> Self {
        DelayDopplerGrid {
            frame,
            data: DMatrix::from_vec(frame.m(), frame.n(), data),
        }
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.data[(m, n)]
    }

    pub fn set(&mut self, m: usize, n: usize, value: Complex64) {
        self.data[(m, n)] = value;
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    /// `vec(D)`.
    pub fn as_slice(&self) -> &[Complex64] {
        self.data.as_slice()
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        self.data.as_mut_slice()
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data.as_slice().to_vec()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Time-domain samples of one frame, with or without the cyclic prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    frame: FrameConfig,
    samples: Vec<Complex64>,
    has_cp: bool,
}

impl TimeSignal {
    /// Signal of `MN + L_cp` samples whose first `L_cp` samples are the prefix.
    pub fn with_cp(frame: FrameConfig, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != frame.len_with_cp() {
            return Err(Error::shape(
                format!("{} samples with CP", frame.len_with_cp()),
                format!("{} samples", samples.len()),
            ));
        }
        Ok(TimeSignal {
            frame,
            samples,
            has_cp: true,
        })
    }

    /// Signal of `MN` samples with the prefix already removed.
    pub fn without_cp(frame: FrameConfig, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != frame.size() {
            return Err(Error::shape(
                format!("{} samples without CP", frame.size()),
                format!("{} samples", samples.len()),
            ));
        }
        Ok(TimeSignal {
            frame,
            samples,
            has_cp: false,
        })
    }

    /// Prepends the cyclic prefix to CP-free frame samples.
    pub(crate) fn from_frame_samples(frame: FrameConfig, s: &[Complex64]) -> Self {
        let cp = frame.cp_len();
        let mut samples = Vec::with_capacity(s.len() + cp);
        samples.extend_from_slice(&s[s.len() - cp..]);
        samples.extend_from_slice(s);
        TimeSignal {
            frame,
            samples,
            has_cp: true,
        }
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    pub fn has_cp(&self) -> bool {
        self.has_cp
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// The `MN` samples after CP removal.
    pub fn frame_samples(&self) -> Result<&[Complex64]> {
        let skip = if self.has_cp { self.frame.cp_len() } else { 0 };
        let s = &self.samples[skip..];
        if s.len() != self.frame.size() {
            return Err(Error::shape(
                format!("{} samples", self.frame.size()),
                format!("{} samples", s.len()),
            ));
        }
        Ok(s)
    }
}
