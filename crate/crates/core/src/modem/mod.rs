//! OTFS and SC-IFDMA modulators and demodulators.
//!
//! Each waveform is available in two structures that produce identical
//! output:
//!
//! * **direct**: row-wise `N`-point IDFT of the delay-Doppler grid followed by
//!   column-major vectorization (the delay-time path);
//! * **spread**: per-Doppler-column phase rotation, `M`-point DFT spreading,
//!   interleaved subcarrier mapping and an `MN`-point IDFT (the DFT-spread
//!   OFDM path).
//!
//! SC-IFDMA is the spread structure without the phase rotation. Its direct
//! path is obtained by OTFS-modulating the phase-derotated grid.

mod constellation;
mod grid;

pub use constellation::{
    demap_bits, hard_decisions, map_bits, BinKind, Constellation, OverlayMask,
};
pub use grid::{DelayDopplerGrid, TimeSignal, Waveform};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::transform::{omega, transform_chunks, transform_in_place, Direction, InterleaverMap};

/// Which of the two equivalent structures to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Structure {
    #[default]
    Direct,
    Spread,
}

pub fn modulate(grid: &DelayDopplerGrid, w: Waveform, structure: Structure) -> TimeSignal {
    match structure {
        Structure::Direct => modulate_direct(grid, w),
        Structure::Spread => modulate_spread(grid, w),
    }
}

pub fn demodulate(sig: &TimeSignal, w: Waveform, structure: Structure) -> Result<DelayDopplerGrid> {
    match structure {
        Structure::Direct => demodulate_direct(sig, w),
        Structure::Spread => demodulate_spread(sig, w),
    }
}

/// Delay-time path: `S = D F_N^H`, `s = vec(S)`, then the cyclic prefix.
pub fn modulate_direct(grid: &DelayDopplerGrid, w: Waveform) -> TimeSignal {
    let frame = *grid.frame();
    let s = delay_time_samples(grid.as_slice(), &frame, w);
    TimeSignal::from_frame_samples(frame, &s)
}

/// CP-free delay-time samples of a vectorized grid.
pub(crate) fn delay_time_samples(
    d: &[Complex64],
    frame: &FrameConfig,
    w: Waveform,
) -> Vec<Complex64> {
    let (m, n) = (frame.m(), frame.n());
    // Row-major copy so every delay row is contiguous.
    let mut rows = vec![Complex64::default(); m * n];
    for col in 0..n {
        for r in 0..m {
            let mut x = d[r + col * m];
            if w == Waveform::ScIfdma {
                x *= omega(r, col, frame).conj();
            }
            rows[r * n + col] = x;
        }
    }
    transform_chunks(&mut rows, n, Direction::Inverse);
    let mut s = vec![Complex64::default(); m * n];
    for r in 0..m {
        for k in 0..n {
            s[r + k * m] = rows[r * n + k];
        }
    }
    s
}

/// DFT-spread path: rotate each Doppler column by `omega_n^m` (OTFS only),
/// `M`-point DFT, map column `n` onto bins `n + m' N`, `MN`-point IDFT.
pub fn modulate_spread(grid: &DelayDopplerGrid, w: Waveform) -> TimeSignal {
    let frame = *grid.frame();
    let m = frame.m();
    let mut buf = grid.as_slice().to_vec();
    if w == Waveform::Otfs {
        for (i, x) in buf.iter_mut().enumerate() {
            *x *= omega(i % m, i / m, &frame);
        }
    }
    transform_chunks(&mut buf, m, Direction::Forward);
    let mut spectrum = InterleaverMap::for_frame(&frame)
        .apply(&buf)
        .expect("buffer length matches the frame");
    transform_in_place(&mut spectrum, Direction::Inverse);
    TimeSignal::from_frame_samples(frame, &spectrum)
}

/// Delay-time path receiver: `r_m` gathers samples `m + k M` after CP
/// removal, then `D~ = R F_N`. SC-IFDMA additionally applies `omega_n^m`.
pub fn demodulate_direct(sig: &TimeSignal, w: Waveform) -> Result<DelayDopplerGrid> {
    let frame = *sig.frame();
    let z = sig.frame_samples()?;
    Ok(DelayDopplerGrid::from_vec_unchecked(
        frame,
        demod_delay_time(z, &frame, w),
    ))
}

pub(crate) fn demod_delay_time(
    z: &[Complex64],
    frame: &FrameConfig,
    w: Waveform,
) -> Vec<Complex64> {
    let (m, n) = (frame.m(), frame.n());
    let mut rows = vec![Complex64::default(); m * n];
    for r in 0..m {
        for k in 0..n {
            rows[r * n + k] = z[r + k * m];
        }
    }
    transform_chunks(&mut rows, n, Direction::Forward);
    let mut d = vec![Complex64::default(); m * n];
    for r in 0..m {
        for col in 0..n {
            let mut x = rows[r * n + col];
            if w == Waveform::ScIfdma {
                x *= omega(r, col, frame);
            }
            d[r + col * m] = x;
        }
    }
    d
}

/// Frequency-domain receiver: `MN`-point DFT, gather bins `n + m' N` per
/// Doppler column, `M`-point IDFT, then `(omega_n^m)^*` for OTFS.
pub fn demodulate_spread(sig: &TimeSignal, w: Waveform) -> Result<DelayDopplerGrid> {
    let frame = *sig.frame();
    let m = frame.m();
    let mut spectrum = sig.frame_samples()?.to_vec();
    transform_in_place(&mut spectrum, Direction::Forward);
    let mut buf = InterleaverMap::for_frame(&frame).apply_inverse(&spectrum)?;
    transform_chunks(&mut buf, m, Direction::Inverse);
    if w == Waveform::Otfs {
        for (i, x) in buf.iter_mut().enumerate() {
            *x *= omega(i % m, i / m, &frame).conj();
        }
    }
    Ok(DelayDopplerGrid::from_vec_unchecked(frame, buf))
}

/// Demodulates CP-free samples with the delay-time structure.
pub fn demodulate_samples(
    z: &[Complex64],
    frame: &FrameConfig,
    w: Waveform,
) -> Result<DelayDopplerGrid> {
    if z.len() != frame.size() {
        return Err(Error::shape(
            format!("{} samples", frame.size()),
            format!("{} samples", z.len()),
        ));
    }
    Ok(DelayDopplerGrid::from_vec_unchecked(
        *frame,
        demod_delay_time(z, frame, w),
    ))
}
