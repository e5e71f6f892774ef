//! Unitary DFTs, phase diagonals and the interleaving permutation.
//!
//! Everything here works on plain complex slices. Diagonal operators and
//! permutations are kept as vectors / index maps and never materialized as
//! dense matrices.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::frame::FrameConfig;

/// Transform direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `F_K`, kernel `exp(-j 2 pi p q / K)`.
    Forward,
    /// `F_K^H`.
    Inverse,
}

type PlanCache = (
    FftPlanner<f64>,
    HashMap<(usize, Direction), Arc<dyn Fft<f64>>>,
);

thread_local! {
    static PLANS: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn fast_plan(size: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((size, dir))
            .or_insert_with(|| match dir {
                Direction::Forward => planner.plan_fft_forward(size),
                Direction::Inverse => planner.plan_fft_inverse(size),
            })
            .clone()
    })
}

/// Direct `O(K^2)` evaluation with a twiddle table, unnormalized.
fn direct_unnormalized(buf: &mut [Complex64], dir: Direction) {
    let k = buf.len();
    let sign = match dir {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    let twiddles: Vec<Complex64> = (0..k)
        .map(|i| Complex64::from_polar(1.0, sign * 2.0 * PI * i as f64 / k as f64))
        .collect();
    let input = buf.to_vec();
    for (p, out) in buf.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (q, x) in input.iter().enumerate() {
            acc += x * twiddles[(p * q) % k];
        }
        *out = acc;
    }
}

/// Unitary in-place transform of the whole buffer.
///
/// Power-of-two sizes go through an FFT, other sizes are evaluated directly.
pub fn transform_in_place(buf: &mut [Complex64], dir: Direction) {
    let k = buf.len();
    if k <= 1 {
        return;
    }
    if k.is_power_of_two() {
        fast_plan(k, dir).process(buf);
    } else {
        direct_unnormalized(buf, dir);
    }
    let scale = 1.0 / (k as f64).sqrt();
    buf.iter_mut().for_each(|x| *x *= scale);
}

fn check_len(v: &[Complex64], size: usize) -> Result<()> {
    if v.len() != size {
        return Err(Error::shape(
            format!("vector of length {size}"),
            format!("length {}", v.len()),
        ));
    }
    Ok(())
}

/// `F_K v` with the unitary normalization `1/sqrt(K)`.
pub fn dft(v: &[Complex64], size: usize) -> Result<Vec<Complex64>> {
    check_len(v, size)?;
    let mut out = v.to_vec();
    transform_in_place(&mut out, Direction::Forward);
    Ok(out)
}

/// `F_K^H v`.
pub fn idft(v: &[Complex64], size: usize) -> Result<Vec<Complex64>> {
    check_len(v, size)?;
    let mut out = v.to_vec();
    transform_in_place(&mut out, Direction::Inverse);
    Ok(out)
}

/// Applies a unitary transform of length `size` to each consecutive chunk.
pub(crate) fn transform_chunks(buf: &mut [Complex64], size: usize, dir: Direction) {
    debug_assert_eq!(buf.len() % size, 0);
    for chunk in buf.chunks_exact_mut(size) {
        transform_in_place(chunk, dir);
    }
}

/// `omega_n^m = exp(-j 2 pi m n / (M N))`.
pub fn omega(m: usize, n: usize, frame: &FrameConfig) -> Complex64 {
    let mn = frame.size();
    let e = (m * n) % mn;
    Complex64::from_polar(1.0, -2.0 * PI * e as f64 / mn as f64)
}

/// Which unit-modulus diagonal a [`PhaseOperator`] realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    /// `Lambda_m`, entry `i` is `exp(-j 2 pi m i / (M N))`: the frequency-domain
    /// image of a circular shift by `m` samples.
    Lambda(usize),
    /// `Omega`, entry `n M + m` is `omega_n^m`.
    Omega,
    /// `Omega^H`.
    OmegaConjugate,
}

/// Length-`MN` unit-modulus diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOperator {
    kind: PhaseKind,
    frame: FrameConfig,
}

impl PhaseOperator {
    pub fn new(kind: PhaseKind, frame: FrameConfig) -> Self {
        PhaseOperator { kind, frame }
    }

    pub fn omega(frame: FrameConfig) -> Self {
        Self::new(PhaseKind::Omega, frame)
    }

    pub fn omega_conjugate(frame: FrameConfig) -> Self {
        Self::new(PhaseKind::OmegaConjugate, frame)
    }

    pub fn kind(&self) -> PhaseKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.frame.size()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Diagonal entry at vectorized index `i`.
    pub fn entry(&self, i: usize) -> Complex64 {
        let m = self.frame.m();
        let mn = self.frame.size();
        match self.kind {
            PhaseKind::Lambda(shift) => {
                let e = (shift * i) % mn;
                Complex64::from_polar(1.0, -2.0 * PI * e as f64 / mn as f64)
            }
            PhaseKind::Omega => omega(i % m, i / m, &self.frame),
            PhaseKind::OmegaConjugate => omega(i % m, i / m, &self.frame).conj(),
        }
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.len()).map(|i| self.entry(i)).collect()
    }

    /// Elementwise product with the diagonal.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(v, self.len())?;
        Ok(v.iter()
            .enumerate()
            .map(|(i, x)| x * self.entry(i))
            .collect())
    }
}

/// Transposition permutation of a vector made of `blocks` consecutive blocks
/// of `block_len` samples.
///
/// Input index `a + b * block_len` moves to `b + a * blocks`. With
/// `block_len = M, blocks = N` this is the interleaver that places the
/// `M`-point DFT output of Doppler column `n` on the frequency bins
/// `n + m' N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterleaverMap {
    block_len: usize,
    blocks: usize,
}

impl InterleaverMap {
    pub fn new(block_len: usize, blocks: usize) -> Self {
        InterleaverMap { block_len, blocks }
    }

    /// The frequency-domain interleaver of a frame (`block_len = M`).
    pub fn for_frame(frame: &FrameConfig) -> Self {
        Self::new(frame.m(), frame.n())
    }

    pub fn len(&self) -> usize {
        self.block_len * self.blocks
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Destination of input index `i`.
    pub fn forward(&self, i: usize) -> usize {
        let a = i % self.block_len;
        let b = i / self.block_len;
        b + a * self.blocks
    }

    /// Source index of output index `j`.
    pub fn inverse(&self, j: usize) -> usize {
        let b = j % self.blocks;
        let a = j / self.blocks;
        a + b * self.block_len
    }

    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(v, self.len())?;
        let mut out = vec![Complex64::default(); v.len()];
        for (i, x) in v.iter().enumerate() {
            out[self.forward(i)] = *x;
        }
        Ok(out)
    }

    pub fn apply_inverse(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(v, self.len())?;
        let mut out = vec![Complex64::default(); v.len()];
        for (j, x) in v.iter().enumerate() {
            out[self.inverse(j)] = *x;
        }
        Ok(out)
    }
}

/// Interleaves `M` equal-length rows: output index `m + l M` holds `rows[m][l]`.
///
/// This is the column-major vectorization of the `M x N` matrix whose rows
/// are the inputs, i.e. the sum of the `M`-fold expanded rows each shifted by
/// its row index.
pub fn interleave(rows: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
    let m = rows.len();
    let Some(n) = rows.first().map(Vec::len) else {
        return Ok(Vec::new());
    };
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::shape(
            format!("rows of length {n}"),
            format!("a row of length {}", bad.len()),
        ));
    }
    let mut out = vec![Complex64::default(); m * n];
    for (r, row) in rows.iter().enumerate() {
        for (l, x) in row.iter().enumerate() {
            out[r + l * m] = *x;
        }
    }
    Ok(out)
}

/// Inverse of [`interleave`] for `m` rows.
pub fn deinterleave(v: &[Complex64], m: usize) -> Result<Vec<Vec<Complex64>>> {
    if m == 0 || !v.len().is_multiple_of(m) {
        return Err(Error::shape(
            format!("length divisible by {m}"),
            format!("length {}", v.len()),
        ));
    }
    let n = v.len() / m;
    Ok((0..m)
        .map(|r| (0..n).map(|l| v[r + l * m]).collect())
        .collect())
}

/// `factor`-fold expansion: `out[k factor] = v[k]`, zeros elsewhere.
pub fn expand(v: &[Complex64], factor: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); v.len() * factor];
    for (k, x) in v.iter().enumerate() {
        out[k * factor] = *x;
    }
    out
}

/// `factor`-fold downsampling starting at `phase`.
pub fn downsample(v: &[Complex64], factor: usize, phase: usize) -> Vec<Complex64> {
    v.iter().skip(phase).step_by(factor).copied().collect()
}

/// Folds a length-`MN` spectrum into `N` bins: `(1/sqrt(M)) sum_m' z[n + m' N]`.
pub fn alias(spectrum: &[Complex64], m: usize) -> Result<Vec<Complex64>> {
    if m == 0 || !spectrum.len().is_multiple_of(m) {
        return Err(Error::shape(
            format!("length divisible by {m}"),
            format!("length {}", spectrum.len()),
        ));
    }
    let n = spectrum.len() / m;
    let scale = 1.0 / (m as f64).sqrt();
    Ok((0..n)
        .map(|bin| (0..m).map(|seg| spectrum[bin + seg * n]).sum::<Complex64>() * scale)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let out = dft(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], 4).unwrap();
        assert!(close(&out, &[c(0.5, 0.0); 4], 1e-15));
    }

    #[test]
    fn two_point_dft() {
        let out = dft(&[c(1.0, 0.0), c(1.0, 0.0)], 2).unwrap();
        assert!(close(&out, &[c(2f64.sqrt(), 0.0), c(0.0, 0.0)], 1e-15));
    }

    #[test]
    fn idft_of_ones() {
        let out = idft(&[c(1.0, 0.0); 4], 4).unwrap();
        assert!(close(
            &out,
            &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            1e-15
        ));
        let zeros = idft(&[c(0.0, 0.0); 3], 3).unwrap();
        assert!(zeros.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(matches!(
            dft(&[c(1.0, 0.0); 3], 4),
            Err(Error::Shape { .. })
        ));
        assert!(idft(&[c(1.0, 0.0); 5], 4).is_err());
    }

    #[test]
    fn omega_entries() {
        let f = FrameConfig::unit(2, 2, 0).unwrap();
        let op = PhaseOperator::omega(f);
        assert!((op.entry(3) - c(0.0, -1.0)).norm() < 1e-15);
        for i in 0..2 {
            assert_eq!(op.entry(i), c(1.0, 0.0));
        }
    }

    #[test]
    fn phase_operators_have_unit_modulus() {
        let f = FrameConfig::unit(5, 7, 0).unwrap();
        for kind in [
            PhaseKind::Lambda(3),
            PhaseKind::Omega,
            PhaseKind::OmegaConjugate,
        ] {
            let op = PhaseOperator::new(kind, f);
            assert!(op.diagonal().iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn interleave_small_case() {
        let (a, b, cc, d) = (c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0));
        let out = interleave(&[vec![a, b], vec![cc, d]]).unwrap();
        assert_eq!(out, vec![a, cc, b, d]);
        assert_eq!(interleave(&[vec![a, b, cc]]).unwrap(), vec![a, b, cc]);
        assert!(interleave(&[vec![a, b], vec![cc]]).is_err());
    }

    #[test]
    fn interleaver_map_is_a_bijection() {
        let map = InterleaverMap::new(4, 3);
        let mut seen = [false; 12];
        for i in 0..12 {
            assert_eq!(map.inverse(map.forward(i)), i);
            seen[map.forward(i)] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn alias_rejects_ragged_length() {
        assert!(alias(&[c(1.0, 0.0); 5], 2).is_err());
    }
}
