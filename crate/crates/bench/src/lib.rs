//! Deterministic fixtures shared by the benchmarks.

use ddlink_core::channel::{ChannelTap, LtvChannel};
use ddlink_core::{DelayDopplerGrid, FrameConfig};
use num_complex::Complex64;

pub fn frame(m: usize, n: usize) -> FrameConfig {
    FrameConfig::new(m, n, m / 4, 7.68e6, 5.9e9).expect("valid frame")
}

pub fn grid(frame: FrameConfig) -> DelayDopplerGrid {
    let v = (0..frame.size())
        .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
        .collect();
    DelayDopplerGrid::from_vec(frame, v).expect("sized grid")
}

/// Three taps with fractional Doppler inside the cyclic prefix.
pub fn channel(frame: FrameConfig) -> LtvChannel {
    let cp = frame.cp_len();
    LtvChannel::new(
        frame,
        vec![
            ChannelTap::new(0, Complex64::new(0.7, 0.3), 1.4),
            ChannelTap::new(cp / 3, Complex64::new(-0.4, 0.2), -2.2),
            ChannelTap::new(cp / 2, Complex64::new(0.1, -0.3), 0.6),
        ],
    )
    .expect("valid channel")
}
