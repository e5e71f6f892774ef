use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::chanest::PilotConfig;
use crate::channel::{ChannelProfile, DopplerGrid, DopplerModel, Fading, ProfileTap, TapDelay};
use crate::config::ConfigMap;
use crate::equalizer::IterativeConfig;
use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::modem::{Constellation, Waveform};
use crate::multiuser::{Allocation, UserBins};
use crate::sync::{CfoConvention, SyncConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    ThresholdSweep,
    SyncVsSnr,
    BerVsSnr,
    MuUplink,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::ThresholdSweep => "threshold_sweep",
            ExperimentKind::SyncVsSnr => "sync_vs_snr",
            ExperimentKind::BerVsSnr => "ber_vs_snr",
            ExperimentKind::MuUplink => "mu_uplink",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold_sweep" => Ok(ExperimentKind::ThresholdSweep),
            "sync_vs_snr" => Ok(ExperimentKind::SyncVsSnr),
            "ber_vs_snr" => Ok(ExperimentKind::BerVsSnr),
            "mu_uplink" => Ok(ExperimentKind::MuUplink),
            other => Err(Error::InvalidParameter(format!(
                "unknown experiment '{other}'"
            ))),
        }
    }
}

/// Source of the channel knowledge used for equalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiMode {
    /// True channel, with genie timing and frequency alignment.
    Perfect,
    /// Pilot-based estimate after synchronization.
    Estimated,
}

impl FromStr for CsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(CsiMode::Perfect),
            "estimated" => Ok(CsiMode::Estimated),
            other => Err(Error::InvalidParameter(format!(
                "unknown CSI mode '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqMethod {
    Mmse,
    Iterative,
}

impl FromStr for EqMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmse" => Ok(EqMethod::Mmse),
            "iterative" => Ok(EqMethod::Iterative),
            other => Err(Error::InvalidParameter(format!(
                "unknown equalizer '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub profile: ChannelProfile,
    pub velocity_kmh: f64,
    pub doppler_grid: DopplerGrid,
}

/// How timing and frequency offsets are drawn per trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpairmentSpec {
    /// Fixed `theta_d`, or uniform on `0..M` when `None`.
    pub theta_d: Option<usize>,
    /// `theta_t` uniform on `0..=theta_t_max`.
    pub theta_t_max: usize,
    /// `epsilon` uniform on `(-epsilon_max, epsilon_max)`.
    pub epsilon_max: f64,
    pub epsilon_grid: DopplerGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: String,
    pub kind: ExperimentKind,
    pub frame: FrameConfig,
    pub waveforms: Vec<Waveform>,
    pub channel: ChannelSpec,
    pub constellation: Constellation,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub pilot: PilotConfig,
    pub csi: CsiMode,
    pub eq_method: EqMethod,
    pub eq: IterativeConfig,
    pub sync_enabled: bool,
    pub sync: SyncConfig,
    /// Thresholds visited by a threshold sweep.
    pub thresholds: Vec<f64>,
    pub impairments: ImpairmentSpec,
    pub allocation: Option<Allocation>,
    pub parallelism: Option<usize>,
}

/// Overrides applied by `--paper-scale`: the paper's 128 x 32 grid with the
/// full EVA profile.
pub const PAPER_SCALE: [(&str, &str); 7] = [
    ("frame.M", "128"),
    ("frame.N", "32"),
    ("frame.cp", "32"),
    ("channel.profile", "eva"),
    ("pilot.m_p", "40"),
    ("pilot.n_p", "16"),
    ("pilot.guards", "[38, full]"),
];

fn parse_guard_doppler(s: &str) -> std::result::Result<Option<usize>, String> {
    if s == "full" {
        Ok(None)
    } else {
        s.parse::<usize>().map(Some).map_err(|e| e.to_string())
    }
}

fn profile_from_config(cfg: &ConfigMap, name: &str) -> Result<ChannelProfile> {
    let mut profile = if name == "custom" {
        let delays: Vec<f64> = cfg.get_list("channel.taps.delay_ns")?.ok_or_else(|| {
            cfg.error(
                "channel.profile",
                "custom profile needs channel.taps.delay_ns",
            )
        })?;
        let powers: Vec<f64> = cfg.get_list("channel.taps.power_db")?.ok_or_else(|| {
            cfg.error(
                "channel.profile",
                "custom profile needs channel.taps.power_db",
            )
        })?;
        let dopplers: Option<Vec<f64>> = cfg.get_list("channel.taps.doppler_hz")?;
        if delays.is_empty()
            || delays.len() != powers.len()
            || dopplers.as_ref().is_some_and(|d| d.len() != delays.len())
        {
            return Err(cfg.error(
                "channel.taps.delay_ns",
                "tap lists must be non-empty and of equal length",
            ));
        }
        if delays.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(cfg.error("channel.taps.delay_ns", "delays must be >= 0"));
        }
        ChannelProfile {
            name: "custom".into(),
            taps: delays
                .iter()
                .zip(&powers)
                .enumerate()
                .map(|(i, (&d, &p))| ProfileTap {
                    delay: TapDelay::Nanoseconds(d),
                    power_db: p,
                    doppler_hz: dopplers.as_ref().map(|v| v[i]),
                })
                .collect(),
            fading: Fading::Rayleigh,
            doppler: DopplerModel::Cosine,
            max_taps: None,
        }
    } else {
        ChannelProfile::by_name(name).map_err(|e| cfg.error("channel.profile", e.to_string()))?
    };
    if let Some(f) = cfg.get::<Fading>("channel.fading")? {
        profile.fading = f;
    }
    if let Some(d) = cfg.get::<DopplerModel>("channel.doppler_model")? {
        profile.doppler = d;
    }
    Ok(profile)
}

impl ExperimentSpec {
    /// Builds a spec from parsed configuration text. Relative paths (the
    /// allocation file) resolve against `base_dir`. Every key must be known.
    pub fn from_config(cfg: &ConfigMap, base_dir: &Path) -> Result<Self> {
        let kind: ExperimentKind = cfg.get("experiment")?.ok_or_else(|| Error::Config {
            line: 0,
            message: "missing 'experiment'".into(),
        })?;
        let id = cfg.get_str("id").unwrap_or_else(|| kind.to_string());
        let m = cfg.get_or("frame.M", 32usize)?;
        let n = cfg.get_or("frame.N", 16usize)?;
        let frame = FrameConfig::new(
            m,
            n,
            cfg.get_or("frame.cp", 8usize)?,
            cfg.get_or("frame.bandwidth_hz", 7.68e6)?,
            cfg.get_or("frame.carrier_hz", 5.9e9)?,
        )
        .map_err(|e| cfg.error("frame.M", e.to_string()))?;

        let waveforms = cfg
            .get_list::<Waveform>("waveforms")?
            .unwrap_or_else(|| Waveform::ALL.to_vec());
        if waveforms.is_empty() {
            return Err(cfg.error("waveforms", "at least one waveform is required"));
        }
        let default_profile = if kind == ExperimentKind::ThresholdSweep {
            "two_tap"
        } else {
            "eva3"
        };
        let profile_name = cfg
            .get_str("channel.profile")
            .unwrap_or_else(|| default_profile.into());
        let channel = ChannelSpec {
            profile: profile_from_config(cfg, &profile_name)?,
            velocity_kmh: cfg.get_or("channel.velocity_kmh", 500.0)?,
            doppler_grid: cfg.get_or("channel.doppler_grid", DopplerGrid::Fractional)?,
        };
        if !(channel.velocity_kmh.is_finite() && channel.velocity_kmh >= 0.0) {
            return Err(cfg.error("channel.velocity_kmh", "velocity must be >= 0"));
        }

        let default_snr = match kind {
            ExperimentKind::ThresholdSweep => vec![15.0],
            _ => vec![0.0, 5.0, 10.0, 15.0, 20.0],
        };
        let snr_db = cfg.get_list::<f64>("snr_db")?.unwrap_or(default_snr);
        if snr_db.is_empty() || snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(cfg.error(
                "snr_db",
                "SNR list must be non-empty and contain no NaN or -inf",
            ));
        }
        let trials = cfg.get_or("trials", 2000u64)?;
        if trials == 0 {
            return Err(cfg.error("trials", "at least one trial is required"));
        }

        let guards = cfg
            .get_list::<String>("pilot.guards")?
            .unwrap_or_else(|| vec!["6".into(), "full".into()]);
        if guards.len() != 2 {
            return Err(cfg.error("pilot.guards", "expected [delay, doppler]"));
        }
        let guard_delay = guards[0]
            .parse::<usize>()
            .map_err(|e| cfg.error("pilot.guards", e.to_string()))?;
        let guard_doppler =
            parse_guard_doppler(&guards[1]).map_err(|e| cfg.error("pilot.guards", e))?;
        let pilot = PilotConfig {
            m_p: cfg.get_or("pilot.m_p", 8usize)?,
            n_p: cfg.get_or("pilot.n_p", n / 2)?,
            rho_p: 10f64.powf(cfg.get_or("pilot.power_db", 24.0)? / 10.0),
            guard_delay,
            guard_doppler,
            detection_threshold: cfg.get_or("est.threshold_sigma", 3.0)?,
        };
        pilot
            .validate(&frame)
            .map_err(|e| cfg.error("pilot.m_p", e.to_string()))?;

        let eq = IterativeConfig {
            max_iter: cfg.get_or("eq.max_iter", 200usize)?,
            tol: cfg.get_or("eq.tol", 1e-10)?,
        };
        let sync = SyncConfig {
            threshold: cfg.get_or("sync.threshold", 0.5)?,
            search_rows: cfg.get_or("sync.search_rows", m)?,
            cfo_convention: cfg.get_or("sync.cfo_convention", CfoConvention::WrapNegative)?,
        };
        sync.validate(&frame)
            .map_err(|e| cfg.error("sync.threshold", e.to_string()))?;
        let default_thresholds: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let thresholds = cfg
            .get_list::<f64>("sync.thresholds")?
            .unwrap_or(default_thresholds);
        if thresholds.is_empty() || thresholds.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(cfg.error("sync.thresholds", "thresholds must lie in (0, 1]"));
        }
        let default_sync = matches!(
            kind,
            ExperimentKind::ThresholdSweep | ExperimentKind::SyncVsSnr
        );
        let sync_enabled = cfg.get_or("sync.enabled", default_sync)?;
        if !sync_enabled && default_sync {
            return Err(cfg.error("sync.enabled", format!("{kind} needs synchronization")));
        }

        let theta_d = match cfg.get_str("impair.theta_d").as_deref() {
            None | Some("random") => None,
            Some(s) => Some(
                s.parse::<usize>()
                    .map_err(|e| cfg.error("impair.theta_d", e.to_string()))?,
            ),
        };
        if theta_d.is_some_and(|t| t >= m) {
            return Err(cfg.error("impair.theta_d", "theta_d must be below M"));
        }
        let impairments = ImpairmentSpec {
            theta_d,
            theta_t_max: cfg.get_or("impair.theta_t_max", 1usize)?,
            epsilon_max: cfg.get_or("impair.epsilon_max", 0.4)?,
            epsilon_grid: cfg.get_or("impair.epsilon_grid", DopplerGrid::Fractional)?,
        };
        if impairments.theta_t_max > 1 {
            return Err(cfg.error(
                "impair.theta_t_max",
                "block offsets above 1 are not resolved",
            ));
        }
        if !(impairments.epsilon_max.is_finite()
            && impairments.epsilon_max >= 0.0
            && impairments.epsilon_max < n as f64 / 2.0)
        {
            return Err(cfg.error("impair.epsilon_max", "must lie in [0, N/2)"));
        }

        let allocation = if kind == ExperimentKind::MuUplink {
            Some(match cfg.get_str("mu.allocation") {
                Some(p) => {
                    let path = base_dir.join(p);
                    Allocation::load(&path, frame).map_err(|e| {
                        cfg.error("mu.allocation", format!("{}: {e}", path.display()))
                    })?
                }
                None => Allocation::new(
                    frame,
                    vec![
                        UserBins::new((0..m / 2).collect(), (0..n / 2).collect()),
                        UserBins::new((m / 2..m).collect(), (n / 2..n).collect()),
                    ],
                    false,
                )?,
            })
        } else {
            None
        };

        let spec = ExperimentSpec {
            id,
            kind,
            frame,
            waveforms,
            channel,
            constellation: cfg.get_or("modulation", Constellation::Qam16)?,
            snr_db,
            trials,
            seed: cfg.get_or("seed", 1u64)?,
            pilot,
            csi: cfg.get_or("est.csi", CsiMode::Estimated)?,
            eq_method: cfg.get_or("eq.method", EqMethod::Iterative)?,
            eq,
            sync_enabled,
            sync,
            thresholds,
            impairments,
            allocation,
            parallelism: cfg.get("parallelism")?,
        };
        cfg.finish()?;
        Ok(spec)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        Self::from_config(&ConfigMap::parse(text)?, base_dir)
    }

    /// Resolved settings, one `key = value` per line, for the run metadata.
    pub fn echo(&self) -> String {
        let f = &self.frame;
        let guard_nu = self
            .pilot
            .guard_doppler
            .map_or("full".to_string(), |g| g.to_string());
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut lines = vec![
            format!("experiment = {}", self.kind),
            format!("id = {}", self.id),
            format!("seed = {}", self.seed),
            format!("trials = {}", self.trials),
            format!(
                "waveforms = [{}]",
                self.waveforms
                    .iter()
                    .map(|w| w.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            format!("snr_db = [{}]", list(&self.snr_db)),
            format!("modulation = {:?}", self.constellation),
            format!("frame.M = {}", f.m()),
            format!("frame.N = {}", f.n()),
            format!("frame.cp = {}", f.cp_len()),
            format!("frame.bandwidth_hz = {}", f.bandwidth_hz()),
            format!("frame.carrier_hz = {}", f.carrier_hz()),
            format!("channel.profile = {}", self.channel.profile.name),
            format!("channel.fading = {:?}", self.channel.profile.fading),
            format!("channel.doppler_model = {:?}", self.channel.profile.doppler),
            format!("channel.velocity_kmh = {}", self.channel.velocity_kmh),
            format!("channel.doppler_grid = {:?}", self.channel.doppler_grid),
            format!("pilot.m_p = {}", self.pilot.m_p),
            format!("pilot.n_p = {}", self.pilot.n_p),
            format!("pilot.power_db = {}", 10.0 * self.pilot.rho_p.log10()),
            format!("pilot.guards = [{}, {guard_nu}]", self.pilot.guard_delay),
            format!("est.threshold_sigma = {}", self.pilot.detection_threshold),
            format!("est.csi = {:?}", self.csi),
            format!("eq.method = {:?}", self.eq_method),
            format!("eq.max_iter = {}", self.eq.max_iter),
            format!("eq.tol = {}", self.eq.tol),
            format!("sync.enabled = {}", self.sync_enabled),
            format!("sync.threshold = {}", self.sync.threshold),
            format!("sync.thresholds = [{}]", list(&self.thresholds)),
            format!("sync.search_rows = {}", self.sync.search_rows),
            format!("sync.cfo_convention = {:?}", self.sync.cfo_convention),
            format!(
                "impair.theta_d = {}",
                self.impairments
                    .theta_d
                    .map_or("random".to_string(), |t| t.to_string())
            ),
            format!("impair.theta_t_max = {}", self.impairments.theta_t_max),
            format!("impair.epsilon_max = {}", self.impairments.epsilon_max),
            format!("impair.epsilon_grid = {:?}", self.impairments.epsilon_grid),
        ];
        if let Some(a) = &self.allocation {
            for (q, u) in a.users().iter().enumerate() {
                lines.push(format!("mu.user.{q}.delay = {:?}", u.delay));
                lines.push(format!("mu.user.{q}.doppler = {:?}", u.doppler));
            }
            lines.push(format!("mu.relaxed = {}", a.is_relaxed()));
        }
        lines.into_iter().map(|l| l + "\n").collect()
    }
}
