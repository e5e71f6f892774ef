//! Power-delay profiles and random channel realization.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ChannelTap, LtvChannel};
use crate::error::{Error, Result};
use crate::frame::FrameConfig;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Extended Vehicular A: (delay ns, relative power dB), 3GPP TS 36.101 Annex B.
const EVA: [(f64, f64); 9] = [
    (0.0, 0.0),
    (30.0, -1.5),
    (150.0, -1.4),
    (310.0, -3.6),
    (370.0, -0.6),
    (710.0, -9.1),
    (1090.0, -7.0),
    (1730.0, -12.0),
    (2510.0, -16.9),
];

/// Delay of a profile tap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TapDelay {
    /// Physical delay, rounded to the nearest sample at the frame bandwidth.
    Nanoseconds(f64),
    Samples(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileTap {
    pub delay: TapDelay,
    pub power_db: f64,
    /// Fixed Doppler shift; overrides the random draw when set.
    pub doppler_hz: Option<f64>,
}

/// Small-scale fading of each tap gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fading {
    /// Complex Gaussian gain scaled to the tap power.
    Rayleigh,
    /// Deterministic magnitude, uniform phase.
    RandomPhase,
    /// Real positive gain `sqrt(power)`.
    Fixed,
}

/// How tap Doppler shifts are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DopplerModel {
    /// `nu_max cos(phi)` with `phi` uniform on `[0, 2 pi)`, one draw per tap.
    Cosine,
    /// No Doppler except explicit per-tap values.
    Static,
}

/// Whether drawn Doppler shifts are rounded to whole Doppler bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DopplerGrid {
    #[default]
    Fractional,
    Integer,
}

impl FromStr for DopplerGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fractional" => Ok(DopplerGrid::Fractional),
            "integer" => Ok(DopplerGrid::Integer),
            other => Err(Error::InvalidParameter(format!(
                "unknown Doppler grid '{other}'"
            ))),
        }
    }
}

impl FromStr for Fading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rayleigh" => Ok(Fading::Rayleigh),
            "random_phase" => Ok(Fading::RandomPhase),
            "fixed" => Ok(Fading::Fixed),
            other => Err(Error::InvalidParameter(format!(
                "unknown fading model '{other}'"
            ))),
        }
    }
}

impl FromStr for DopplerModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(DopplerModel::Cosine),
            "static" => Ok(DopplerModel::Static),
            other => Err(Error::InvalidParameter(format!(
                "unknown Doppler model '{other}'"
            ))),
        }
    }
}

/// A named multipath profile plus the rules for drawing realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    pub name: String,
    pub taps: Vec<ProfileTap>,
    pub fading: Fading,
    pub doppler: DopplerModel,
    /// Keep only the strongest taps after delay quantization.
    pub max_taps: Option<usize>,
}

impl ChannelProfile {
    pub const NAMES: [&'static str; 5] = ["eva", "eva3", "two_tap", "single_tap", "identity"];

    pub fn eva() -> Self {
        ChannelProfile {
            name: "eva".into(),
            taps: EVA
                .iter()
                .map(|&(ns, db)| ProfileTap {
                    delay: TapDelay::Nanoseconds(ns),
                    power_db: db,
                    doppler_hz: None,
                })
                .collect(),
            fading: Fading::Rayleigh,
            doppler: DopplerModel::Cosine,
            max_taps: None,
        }
    }

    /// EVA reduced to its three strongest sample-spaced taps.
    pub fn eva3() -> Self {
        ChannelProfile {
            name: "eva3".into(),
            max_taps: Some(3),
            ..Self::eva()
        }
    }

    /// Static taps of power 0.4 and 0.6, three samples apart, random phases.
    pub fn two_tap() -> Self {
        ChannelProfile {
            name: "two_tap".into(),
            taps: vec![
                ProfileTap {
                    delay: TapDelay::Samples(0),
                    power_db: 10.0 * 0.4f64.log10(),
                    doppler_hz: None,
                },
                ProfileTap {
                    delay: TapDelay::Samples(3),
                    power_db: 10.0 * 0.6f64.log10(),
                    doppler_hz: None,
                },
            ],
            fading: Fading::RandomPhase,
            doppler: DopplerModel::Static,
            max_taps: None,
        }
    }

    /// One static tap of unit magnitude and random phase.
    pub fn single_tap() -> Self {
        ChannelProfile {
            name: "single_tap".into(),
            taps: vec![ProfileTap {
                delay: TapDelay::Samples(0),
                power_db: 0.0,
                doppler_hz: None,
            }],
            fading: Fading::RandomPhase,
            doppler: DopplerModel::Static,
            max_taps: None,
        }
    }

    pub fn identity() -> Self {
        ChannelProfile {
            name: "identity".into(),
            fading: Fading::Fixed,
            ..Self::single_tap()
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "eva" => Ok(Self::eva()),
            "eva3" => Ok(Self::eva3()),
            "two_tap" => Ok(Self::two_tap()),
            "single_tap" => Ok(Self::single_tap()),
            "identity" => Ok(Self::identity()),
            other => Err(Error::InvalidParameter(format!(
                "unknown channel profile '{other}' (known: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    /// Delays rounded to the sample grid, colliding taps merged (powers and
    /// explicit Dopplers of the first tap kept), optionally pruned to the
    /// strongest taps and normalized to unit total power. Sorted by delay.
    pub fn quantize(&self, frame: &FrameConfig) -> Vec<(usize, f64, Option<f64>)> {
        let mut merged: Vec<(usize, f64, Option<f64>)> = Vec::new();
        for tap in &self.taps {
            let delay = match tap.delay {
                TapDelay::Samples(d) => d,
                TapDelay::Nanoseconds(ns) => (ns * 1e-9 * frame.bandwidth_hz()).round() as usize,
            };
            let power = 10f64.powf(tap.power_db / 10.0);
            match merged.iter_mut().find(|(d, _, _)| *d == delay) {
                Some(entry) => entry.1 += power,
                None => merged.push((delay, power, tap.doppler_hz)),
            }
        }
        if let Some(keep) = self.max_taps {
            merged.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            merged.truncate(keep);
        }
        merged.sort_by_key(|t| t.0);
        let total: f64 = merged.iter().map(|t| t.1).sum();
        merged.iter_mut().for_each(|t| t.1 /= total);
        merged
    }

    /// Draws one channel realization.
    ///
    /// Per tap, the gain is drawn first and then the Doppler angle, so the
    /// number of draws consumed depends only on the profile.
    pub fn realize<R: Rng + ?Sized>(
        &self,
        frame: &FrameConfig,
        velocity_kmh: f64,
        grid: DopplerGrid,
        rng: &mut R,
    ) -> LtvChannel {
        let nu_max = frame.carrier_hz() * velocity_kmh / 3.6 / SPEED_OF_LIGHT;
        let taps = self
            .quantize(frame)
            .into_iter()
            .map(|(delay, power, doppler_hz)| {
                let amp = power.sqrt();
                let gain = match self.fading {
                    Fading::Rayleigh => {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        Complex64::new(re, im) * (amp / 2f64.sqrt())
                    }
                    Fading::RandomPhase => {
                        Complex64::from_polar(amp, rng.random_range(0.0..2.0 * PI))
                    }
                    Fading::Fixed => Complex64::new(amp, 0.0),
                };
                let hz = match (doppler_hz, self.doppler) {
                    (Some(hz), _) => hz,
                    (None, DopplerModel::Cosine) => nu_max * rng.random_range(0.0..2.0 * PI).cos(),
                    (None, DopplerModel::Static) => 0.0,
                };
                let mut bins = hz / frame.doppler_spacing_hz();
                if grid == DopplerGrid::Integer {
                    bins = bins.round();
                }
                // Avoid -0.0 so static taps compare equal to zero.
                if bins == 0.0 {
                    bins = 0.0;
                }
                ChannelTap::new(delay, gain, bins)
            })
            .collect();
        LtvChannel::new(*frame, taps).expect("profiles are non-empty")
    }
}

/// EVA realization with Rayleigh taps and cosine-drawn Doppler shifts.
pub fn eva_channel<R: Rng + ?Sized>(
    frame: &FrameConfig,
    velocity_kmh: f64,
    carrier_hz: f64,
    rng: &mut R,
) -> LtvChannel {
    let frame = FrameConfig::new(
        frame.m(),
        frame.n(),
        frame.cp_len(),
        frame.bandwidth_hz(),
        carrier_hz,
    )
    .expect("carrier frequency must be positive");
    ChannelProfile::eva().realize(&frame, velocity_kmh, DopplerGrid::Fractional, rng)
}
