//! Delay-Doppler link simulation for OTFS and SC-IFDMA.

pub mod chanest;
pub mod channel;
pub mod config;
pub mod equalizer;
pub mod error;
pub mod frame;
pub mod harness;
pub mod modem;
pub mod multiuser;
pub mod sync;
pub mod transform;

pub use error::{Error, Result};
pub use frame::FrameConfig;
pub use modem::{DelayDopplerGrid, TimeSignal, Waveform};
