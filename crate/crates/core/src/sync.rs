//! Timing and carrier frequency offset estimation from the impulse pilot.
//!
//! The received record is viewed as a delay-time grid `r[m, l] = r[M l + m]`.
//! A pilot row carries `N` equally spaced samples whose consecutive products
//! `r*[m, l + q] r[m, l + q + 1]` add up coherently in
//! `P[m, l] = sum_{q=0}^{N-2} r*[m, l+q] r[m, l+q+1]`,
//! and `P_d[m] = sum_{l=0}^{N-1} P[m, l]` peaks on the rows that hold pilot
//! copies. Samples past the end of the record read as zero.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::modem::TimeSignal;

/// Timing and frequency impairments of one received frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Impairments {
    /// Timing offset within a block, `0 <= theta_d < M`.
    pub theta_d: usize,
    /// Timing offset in whole blocks of `M` samples.
    pub theta_t: usize,
    /// Carrier frequency offset in Doppler bins.
    pub epsilon: f64,
}

impl Impairments {
    pub fn new(theta_d: usize, theta_t: usize, epsilon: f64, frame: &FrameConfig) -> Result<Self> {
        if theta_d >= frame.m() {
            return Err(Error::InvalidParameter(format!(
                "theta_d = {theta_d} must be below M = {}",
                frame.m()
            )));
        }
        if !epsilon.is_finite() {
            return Err(Error::InvalidParameter("CFO must be finite".into()));
        }
        Ok(Impairments {
            theta_d,
            theta_t,
            epsilon,
        })
    }

    pub fn none() -> Self {
        Impairments::default()
    }

    /// Total offset in samples, `theta_d + M theta_t`.
    pub fn theta(&self, frame: &FrameConfig) -> usize {
        self.theta_d + frame.m() * self.theta_t
    }
}

/// Branch of the CFO estimate when the phase sits exactly on the cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CfoConvention {
    /// Estimates in `[-N/2, N/2)`.
    #[default]
    WrapNegative,
    /// Estimates in `(-N/2, N/2]`.
    WrapPositive,
}

impl FromStr for CfoConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wrap_negative" => Ok(CfoConvention::WrapNegative),
            "wrap_positive" => Ok(CfoConvention::WrapPositive),
            other => Err(Error::InvalidParameter(format!(
                "unknown CFO convention '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncConfig {
    /// Relative threshold `T_s` in `(0, 1]`.
    pub threshold: f64,
    /// Number of delay rows searched, at most `M`.
    pub search_rows: usize,
    pub cfo_convention: CfoConvention,
}

impl SyncConfig {
    pub fn new(threshold: f64, frame: &FrameConfig) -> Result<Self> {
        let cfg = SyncConfig {
            threshold,
            search_rows: frame.m(),
            cfo_convention: CfoConvention::default(),
        };
        cfg.validate(frame)?;
        Ok(cfg)
    }

    pub fn validate(&self, frame: &FrameConfig) -> Result<()> {
        check_threshold(self.threshold)?;
        if self.search_rows == 0 || self.search_rows > frame.m() {
            return Err(Error::InvalidParameter(format!(
                "search_rows must be in 1..={}, got {}",
                frame.m(),
                self.search_rows
            )));
        }
        Ok(())
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "threshold must be in (0, 1], got {t}"
        )))
    }
}

/// Output of [`timing_metric`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimingMetric {
    m: usize,
    n: usize,
    /// `P[m, l]`, row-major with `N` windows per row.
    p: Vec<Complex64>,
    /// `P_d[m]`.
    pd: Vec<Complex64>,
}

impl TimingMetric {
    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn windows(&self) -> usize {
        self.n
    }

    pub fn p(&self, m: usize, l: usize) -> Complex64 {
        self.p[m * self.n + l]
    }

    pub fn pd(&self) -> &[Complex64] {
        &self.pd
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.pd.iter().map(|v| v.norm()).collect()
    }
}

/// Computes `P[m, l]` and `P_d[m]` for rows `m < search_rows` (other rows are
/// zero). The record must hold at least one frame; reads beyond its end are
/// zero.
pub fn timing_metric(
    r: &[Complex64],
    frame: &FrameConfig,
    search_rows: usize,
) -> Result<TimingMetric> {
    let (m, n) = (frame.m(), frame.n());
    if r.len() < frame.size() {
        return Err(Error::RecordTooShort {
            needed: frame.size(),
            got: r.len(),
        });
    }
    let at = |row: usize, l: usize| r.get(m * l + row).copied().unwrap_or_default();
    let mut p = vec![Complex64::default(); m * n];
    let mut pd = vec![Complex64::default(); m];
    // Consecutive products along the row; each window is a sum of N - 1 of them.
    let mut prods = vec![Complex64::default(); 2 * n];
    for row in 0..search_rows.min(m) {
        for (t, v) in prods.iter_mut().enumerate() {
            *v = at(row, t).conj() * at(row, t + 1);
        }
        for l in 0..n {
            p[row * n + l] = prods[l..l + n - 1].iter().sum();
        }
        pd[row] = p[row * n..(row + 1) * n].iter().sum();
    }
    Ok(TimingMetric { m, n, p, pd })
}

/// Index of the largest magnitude, lowest index on ties. `None` if all zero.
fn argmax(metric: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in metric.iter().enumerate() {
        match best {
            None if v > 0.0 => best = Some(i),
            Some(b) if v > metric[b] => best = Some(i),
            _ => {}
        }
    }
    best
}

fn offset_from_row(row: usize, m_p: usize, cp_len: usize, m: usize) -> usize {
    (row + m - (m_p + cp_len) % m) % m
}

/// Coarse delay-dimension timing offset, `argmax |P_d| - m_p - L_cp`
/// reduced modulo `M`.
pub fn coarse_to(metric: &[f64], m_p: usize, cp_len: usize) -> Result<usize> {
    let row = argmax(metric).ok_or(Error::ZeroMetric)?;
    Ok(offset_from_row(row, m_p, cp_len, metric.len()))
}

/// Rows with `|P_d| >= threshold * max |P_d|`, ascending.
pub fn peak_set(metric: &[f64], threshold: f64) -> Result<Vec<usize>> {
    check_threshold(threshold)?;
    let best = argmax(metric).ok_or(Error::ZeroMetric)?;
    let level = threshold * metric[best];
    Ok((0..metric.len()).filter(|&i| metric[i] >= level).collect())
}

/// Row of the earliest peak: the above-threshold row furthest before the
/// maximum, looking back at most `M / 2` rows cyclically. The look-back
/// window does not depend on the threshold, so a lower threshold can only
/// move the result earlier.
pub fn first_peak_row(metric: &[f64], threshold: f64) -> Result<usize> {
    check_threshold(threshold)?;
    let m = metric.len();
    let best = argmax(metric).ok_or(Error::ZeroMetric)?;
    let level = threshold * metric[best];
    let back = (0..=m / 2)
        .filter(|&j| metric[(best + m - j % m) % m] >= level)
        .max()
        .unwrap_or(0);
    Ok((best + m - back % m) % m)
}

/// Fine delay-dimension timing offset from the earliest peak.
pub fn fine_to(metric: &[f64], threshold: f64, m_p: usize, cp_len: usize) -> Result<usize> {
    let row = first_peak_row(metric, threshold)?;
    Ok(offset_from_row(row, m_p, cp_len, metric.len()))
}

/// CFO estimate `N / (2 pi) arg(P_d[row]) - n_p`, wrapped per `convention`.
pub fn cfo_estimate(
    pd: &[Complex64],
    row: usize,
    n: usize,
    n_p: usize,
    convention: CfoConvention,
) -> Result<f64> {
    let v = *pd
        .get(row)
        .ok_or_else(|| Error::InvalidParameter(format!("row {row} outside the metric")))?;
    if v.norm() == 0.0 {
        return Err(Error::ZeroMetric);
    }
    // Remove the pilot's own Doppler phase before taking the angle.
    let v = v * Complex64::from_polar(1.0, -2.0 * PI * n_p as f64 / n as f64);
    let mut eps = n as f64 * v.arg() / (2.0 * PI);
    let half = n as f64 / 2.0;
    match convention {
        CfoConvention::WrapNegative if eps >= half => eps -= n as f64,
        CfoConvention::WrapPositive if eps <= -half => eps += n as f64,
        _ => {}
    }
    Ok(eps)
}

/// Result of [`synchronize`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyncEstimate {
    pub theta_d_coarse: usize,
    pub theta_d_fine: usize,
    pub theta_t: usize,
    pub epsilon_hat: f64,
    /// `|P_d[m]|`.
    pub metric: Vec<f64>,
    pub peak_set: Vec<usize>,
    /// Estimated start of the frame (first CP sample) in the record.
    pub theta_hat: usize,
}

/// Full acquisition: metric, coarse and fine delay offsets, block offset
/// and CFO.
///
/// The block offset is found from the window position `l` maximizing
/// `|P[m, l]|` on the fine row; it resolves `theta_t` in `{0, 1}`.
pub fn synchronize(
    r: &[Complex64],
    frame: &FrameConfig,
    m_p: usize,
    n_p: usize,
    cfg: &SyncConfig,
) -> Result<SyncEstimate> {
    cfg.validate(frame)?;
    let m = frame.m();
    let cp = frame.cp_len();
    let tm = timing_metric(r, frame, cfg.search_rows)?;
    let metric = tm.magnitude();
    let coarse_row = argmax(&metric).ok_or(Error::ZeroMetric)?;
    let fine_row = first_peak_row(&metric, cfg.threshold)?;
    let l_hat = (0..tm.windows())
        .fold((0usize, -1.0f64), |(bl, bv), l| {
            let v = tm.p(fine_row, l).norm();
            if v > bv {
                (l, v)
            } else {
                (bl, bv)
            }
        })
        .0;
    let start = m * l_hat + fine_row;
    let theta_hat = start.saturating_sub(m_p + cp);
    Ok(SyncEstimate {
        theta_d_coarse: offset_from_row(coarse_row, m_p, cp, m),
        theta_d_fine: offset_from_row(fine_row, m_p, cp, m),
        theta_t: theta_hat / m,
        epsilon_hat: cfo_estimate(tm.pd(), coarse_row, frame.n(), n_p, cfg.cfo_convention)?,
        peak_set: peak_set(&metric, cfg.threshold)?,
        metric,
        theta_hat,
    })
}

/// Undoes the impairments: `r'[k] = exp(-j 2 pi eps (k + theta) / (M N)) r[k + theta]`
/// for the `MN + L_cp` samples of one frame.
pub fn correct(
    r: &[Complex64],
    frame: &FrameConfig,
    theta_hat: usize,
    epsilon_hat: f64,
) -> Result<TimeSignal> {
    let len = frame.len_with_cp();
    let end = theta_hat + len;
    if end > r.len() {
        return Err(Error::WindowOutOfRecord {
            start: theta_hat as i64,
            end: end as i64,
            len: r.len(),
        });
    }
    let mn = frame.size() as f64;
    let samples = r[theta_hat..end]
        .iter()
        .enumerate()
        .map(|(k, v)| {
            if epsilon_hat == 0.0 {
                *v
            } else {
                v * Complex64::from_polar(
                    1.0,
                    -2.0 * PI * epsilon_hat * (k + theta_hat) as f64 / mn,
                )
            }
        })
        .collect();
    TimeSignal::with_cp(*frame, samples)
}

/// Cyclic distance between two delay offsets modulo `M`.
pub fn cyclic_error(estimate: usize, truth: usize, m: usize) -> usize {
    let d = (estimate + m - truth % m) % m;
    d.min(m - d)
}
