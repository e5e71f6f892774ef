//! Gray-mapped QAM and the per-bin overlay mask.

use std::str::FromStr;

use num_complex::Complex64;

use super::grid::DelayDopplerGrid;
use crate::error::{Error, Result};
use crate::frame::FrameConfig;

/// Square Gray-mapped constellations with unit average energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    Qpsk,
    Qam16,
}

impl Constellation {
    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }

    pub fn size(&self) -> usize {
        1 << self.bits_per_symbol()
    }

    /// Symbol for the bit group `bits` (first bit is the MSB of the index).
    ///
    /// Bits alternate between the in-phase and quadrature rails: bit 0 sets
    /// the sign of I, bit 1 the sign of Q (0 is positive), and for 16-QAM
    /// bits 2 and 3 select the inner (0) or outer (1) amplitude.
    pub fn map(&self, bits: &[bool]) -> Complex64 {
        debug_assert_eq!(bits.len(), self.bits_per_symbol());
        let sign = |b: bool| if b { -1.0 } else { 1.0 };
        match self {
            Constellation::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                Complex64::new(sign(bits[0]) * s, sign(bits[1]) * s)
            }
            Constellation::Qam16 => {
                let amp = |b: bool| if b { 3.0 } else { 1.0 };
                let s = 1.0 / 10f64.sqrt();
                Complex64::new(
                    sign(bits[0]) * amp(bits[2]) * s,
                    sign(bits[1]) * amp(bits[3]) * s,
                )
            }
        }
    }

    pub fn index_bits(&self, index: usize) -> Vec<bool> {
        let k = self.bits_per_symbol();
        (0..k).map(|i| (index >> (k - 1 - i)) & 1 == 1).collect()
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.size())
            .map(|i| self.map(&self.index_bits(i)))
            .collect()
    }

    /// Index of the nearest constellation point; ties go to the lowest index.
    pub fn decide(&self, symbol: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points().iter().enumerate() {
            let d = (symbol - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" | "4qam" => Ok(Constellation::Qpsk),
            "16qam" | "qam16" => Ok(Constellation::Qam16),
            other => Err(Error::InvalidParameter(format!(
                "unknown constellation '{other}'"
            ))),
        }
    }
}

/// Role of a grid bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinKind {
    Data,
    Pilot,
    Guard,
}

/// Per-bin roles of an `M x N` grid, stored in `vec` order.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayMask {
    frame: FrameConfig,
    kinds: Vec<BinKind>,
}

impl OverlayMask {
    pub fn all_data(frame: FrameConfig) -> Self {
        OverlayMask {
            frame,
            kinds: vec![BinKind::Data; frame.size()],
        }
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    pub fn kind(&self, m: usize, n: usize) -> BinKind {
        self.kinds[m + n * self.frame.m()]
    }

    pub fn set(&mut self, m: usize, n: usize, kind: BinKind) {
        let i = m + n * self.frame.m();
        self.kinds[i] = kind;
    }

    /// Vectorized indices of the data bins, ascending.
    pub fn data_indices(&self) -> Vec<usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == BinKind::Data)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn data_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k == BinKind::Data).count()
    }
}

fn data_indices(frame: &FrameConfig, mask: Option<&OverlayMask>) -> Result<Vec<usize>> {
    match mask {
        None => Ok((0..frame.size()).collect()),
        Some(mask) if mask.frame().m() == frame.m() && mask.frame().n() == frame.n() => {
            Ok(mask.data_indices())
        }
        Some(mask) => Err(Error::shape(
            format!("{}x{} mask", frame.m(), frame.n()),
            format!("{}x{}", mask.frame().m(), mask.frame().n()),
        )),
    }
}

/// Maps bits onto the data bins of a fresh grid, in `vec` order.
///
/// Bins that the mask reserves for pilots or guards are left at zero.
pub fn map_bits(
    bits: &[bool],
    constellation: Constellation,
    frame: FrameConfig,
    mask: Option<&OverlayMask>,
) -> Result<DelayDopplerGrid> {
    let indices = data_indices(&frame, mask)?;
    let k = constellation.bits_per_symbol();
    let expected = indices.len() * k;
    if bits.len() != expected {
        return Err(Error::BitCount {
            expected,
            got: bits.len(),
        });
    }
    let mut grid = DelayDopplerGrid::zeros(frame);
    let slice = grid.as_mut_slice();
    for (idx, chunk) in indices.iter().zip(bits.chunks_exact(k)) {
        slice[*idx] = constellation.map(chunk);
    }
    Ok(grid)
}

/// Minimum-distance symbol decisions on the data bins.
pub fn hard_decisions(
    grid: &DelayDopplerGrid,
    constellation: Constellation,
    mask: Option<&OverlayMask>,
) -> Result<Vec<usize>> {
    let indices = data_indices(grid.frame(), mask)?;
    let slice = grid.as_slice();
    Ok(indices
        .iter()
        .map(|i| constellation.decide(slice[*i]))
        .collect())
}

/// Bits of the minimum-distance decisions on the data bins.
pub fn demap_bits(
    grid: &DelayDopplerGrid,
    constellation: Constellation,
    mask: Option<&OverlayMask>,
) -> Result<Vec<bool>> {
    Ok(hard_decisions(grid, constellation, mask)?
        .into_iter()
        .flat_map(|i| constellation.index_bits(i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpsk_zero_bits() {
        let s = Constellation::Qpsk.map(&[false, false]);
        let h = 1.0 / 2f64.sqrt();
        assert!((s - Complex64::new(h, h)).norm() < 1e-15);
    }

    #[test]
    fn unit_average_energy() {
        for c in [Constellation::Qpsk, Constellation::Qam16] {
            let e: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.size() as f64;
            assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn neighbours_differ_in_one_bit() {
        let c = Constellation::Qam16;
        let pts = c.points();
        let dmin = 2.0 / 10f64.sqrt();
        for i in 0..16 {
            for j in 0..16 {
                if ((pts[i] - pts[j]).norm() - dmin).abs() < 1e-9 {
                    assert_eq!((i ^ j).count_ones(), 1, "{i} vs {j}");
                }
            }
        }
    }

    #[test]
    fn bit_count_is_checked() {
        let frame = FrameConfig::unit(2, 2, 0).unwrap();
        let err = map_bits(&[false; 7], Constellation::Qpsk, frame, None).unwrap_err();
        assert_eq!(
            err,
            Error::BitCount {
                expected: 8,
                got: 7
            }
        );
    }

    #[test]
    fn reserved_bins_are_skipped() {
        let frame = FrameConfig::unit(2, 2, 0).unwrap();
        let mut mask = OverlayMask::all_data(frame);
        mask.set(1, 0, BinKind::Pilot);
        mask.set(0, 1, BinKind::Guard);
        let bits = [true, false, false, true];
        let grid = map_bits(&bits, Constellation::Qpsk, frame, Some(&mask)).unwrap();
        assert_eq!(grid.get(1, 0), Complex64::default());
        assert_eq!(grid.get(0, 1), Complex64::default());
        assert_eq!(
            demap_bits(&grid, Constellation::Qpsk, Some(&mask)).unwrap(),
            bits
        );
    }
}
