use nalgebra::DMatrix;
use num_complex::Complex64;

use super::LtvChannel;
use crate::frame::FrameConfig;
use crate::modem::{delay_time_samples, demod_delay_time, Waveform};

/// A linear map that can be applied together with its adjoint.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A x`.
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
    /// `A^H y`.
    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64>;
}

impl LinearOperator for DMatrix<Complex64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::default(); self.nrows()];
        for (j, xj) in x.iter().enumerate() {
            if *xj == Complex64::default() {
                continue;
            }
            for (yi, a) in y.iter_mut().zip(self.column(j).iter()) {
                *yi += a * xj;
            }
        }
        y
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        (0..self.ncols())
            .map(|j| {
                self.column(j)
                    .iter()
                    .zip(y)
                    .map(|(a, yi)| a.conj() * yi)
                    .sum()
            })
            .collect()
    }
}

/// Matrix-free equivalent delay-Doppler channel `U^H R_cp H A_cp U`, where
/// `U` is the unitary CP-free modulator of the waveform.
///
/// Costs a few length-`MN` transforms per application, so it scales to
/// frame sizes where the dense matrix does not fit in memory.
#[derive(Debug, Clone)]
pub struct DdChannelOperator {
    frame: FrameConfig,
    waveform: Waveform,
    delays: Vec<usize>,
    // Tap gain per absolute sample index over the CP-extended frame.
    gains: Vec<Vec<Complex64>>,
}

impl DdChannelOperator {
    pub fn new(ch: &LtvChannel, waveform: Waveform) -> Self {
        let frame = *ch.frame();
        let len = frame.len_with_cp();
        DdChannelOperator {
            frame,
            waveform,
            delays: ch.taps().iter().map(|t| t.delay).collect(),
            gains: ch
                .taps()
                .iter()
                .map(|t| (0..len).map(|k| t.gain_at(k, &frame)).collect())
                .collect(),
        }
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    pub fn waveform(&self) -> Waveform {
        self.waveform
    }

    /// `R_cp H A_cp z` for CP-free delay-time samples.
    fn time_domain(&self, z: &[Complex64]) -> Vec<Complex64> {
        let cp = self.frame.cp_len();
        let mn = self.frame.size();
        let mut x = Vec::with_capacity(mn + cp);
        x.extend_from_slice(&z[mn - cp..]);
        x.extend_from_slice(z);
        let mut out = vec![Complex64::default(); mn];
        for (delay, gains) in self.delays.iter().zip(&self.gains) {
            for (i, o) in out.iter_mut().enumerate() {
                let k = cp + i;
                if k >= *delay {
                    *o += gains[k] * x[k - delay];
                }
            }
        }
        out
    }

    /// Adjoint of [`time_domain`](Self::time_domain).
    fn time_domain_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        let cp = self.frame.cp_len();
        let mn = self.frame.size();
        let mut acc = vec![Complex64::default(); mn + cp];
        for (delay, gains) in self.delays.iter().zip(&self.gains) {
            for (i, vi) in v.iter().enumerate() {
                let k = cp + i;
                if k >= *delay {
                    acc[k - delay] += gains[k].conj() * vi;
                }
            }
        }
        let mut z = acc[cp..].to_vec();
        for (j, a) in acc[..cp].iter().enumerate() {
            z[mn - cp + j] += a;
        }
        z
    }
}

impl LinearOperator for DdChannelOperator {
    fn nrows(&self) -> usize {
        self.frame.size()
    }

    fn ncols(&self) -> usize {
        self.frame.size()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let s = delay_time_samples(x, &self.frame, self.waveform);
        demod_delay_time(&self.time_domain(&s), &self.frame, self.waveform)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let v = delay_time_samples(y, &self.frame, self.waveform);
        demod_delay_time(&self.time_domain_adjoint(&v), &self.frame, self.waveform)
    }
}

/// Dense `MN x MN` equivalent delay-Doppler channel of one waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct DdChannelMatrix {
    matrix: DMatrix<Complex64>,
    waveform: Waveform,
}

impl DdChannelMatrix {
    pub fn new(matrix: DMatrix<Complex64>, waveform: Waveform) -> Self {
        DdChannelMatrix { matrix, waveform }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn waveform(&self) -> Waveform {
        self.waveform
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Builds the dense equivalent channel column by column, pushing each unit
/// grid through the modulator, the channel and the demodulator.
pub fn build_dd_matrix(ch: &LtvChannel, w: Waveform) -> DdChannelMatrix {
    let op = DdChannelOperator::new(ch, w);
    let size = ch.frame().size();
    let mut matrix = DMatrix::zeros(size, size);
    let mut unit = vec![Complex64::default(); size];
    for j in 0..size {
        unit[j] = Complex64::new(1.0, 0.0);
        let col = op.apply(&unit);
        matrix.column_mut(j).copy_from_slice(&col);
        unit[j] = Complex64::default();
    }
    DdChannelMatrix::new(matrix, w)
}
