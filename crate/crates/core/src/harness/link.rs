//! One Monte-Carlo trial: draw a realization, push it through every
//! waveform and SNR point, and accumulate error statistics.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::seed::{seed_stream, Component};
use super::spec::{CsiMode, EqMethod, ExperimentKind, ExperimentSpec};
use super::{Metric, ResultRow};
use crate::chanest::{estimate_channel, estimate_noise_std};
use crate::channel::{
    add_noise, frame_window, propagate, DdChannelOperator, DopplerGrid, LinearOperator, LtvChannel,
    NoiseSpec,
};
use crate::equalizer::{lsmr, mmse_solve, ColumnSubset};
use crate::error::{Error, Result};
use crate::modem::{
    demodulate_direct, modulate_direct, Constellation, DelayDopplerGrid, OverlayMask, TimeSignal,
    Waveform,
};
use crate::multiuser::{compound_uplink, split_users};
use crate::sync::{correct, cyclic_error, fine_to, synchronize, Impairments};

/// Expected received power per sample for a frame carrying `symbols` unit
/// energy data symbols and a pilot of power `rho_p`, through a unit-energy
/// channel.
pub fn signal_power(symbols: usize, rho_p: f64, frame_size: usize) -> f64 {
    (symbols as f64 + rho_p) / frame_size as f64
}

/// `sigma^2 = P / 10^(snr/10)`; zero at infinite SNR.
pub fn noise_variance(snr_db: f64, power: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        power / 10f64.powf(snr_db / 10.0)
    }
}

/// Accumulated statistics of one `(snr, waveform)` cell.
#[derive(Debug, Clone, Default, PartialEq)]
struct Cell {
    bit_errors: u64,
    bits: u64,
    user_errors: Vec<u64>,
    user_bits: Vec<u64>,
    cfo_se: f64,
    to_coarse: f64,
    to_fine: Vec<f64>,
    frames: u64,
}

impl Cell {
    fn merge(&mut self, other: &Cell) {
        self.bit_errors += other.bit_errors;
        self.bits += other.bits;
        self.cfo_se += other.cfo_se;
        self.to_coarse += other.to_coarse;
        self.frames += other.frames;
        merge_vec(&mut self.user_errors, &other.user_errors);
        merge_vec(&mut self.user_bits, &other.user_bits);
        if self.to_fine.len() < other.to_fine.len() {
            self.to_fine.resize(other.to_fine.len(), 0.0);
        }
        for (a, b) in self.to_fine.iter_mut().zip(&other.to_fine) {
            *a += b;
        }
    }
}

fn merge_vec(a: &mut Vec<u64>, b: &[u64]) {
    if a.len() < b.len() {
        a.resize(b.len(), 0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Cells indexed `[snr][waveform]`.
#[derive(Debug, Clone, PartialEq)]
pub(super) struct TrialCells {
    cells: Vec<Vec<Cell>>,
}

impl TrialCells {
    pub(super) fn empty(spec: &ExperimentSpec) -> Self {
        TrialCells {
            cells: vec![vec![Cell::default(); spec.waveforms.len()]; spec.snr_db.len()],
        }
    }

    pub(super) fn merge(&mut self, other: &TrialCells) {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
    }

    pub(super) fn rows(&self, spec: &ExperimentSpec) -> Vec<ResultRow> {
        let mut rows = Vec::new();
        for (si, &snr) in spec.snr_db.iter().enumerate() {
            for (wi, &w) in spec.waveforms.iter().enumerate() {
                let c = &self.cells[si][wi];
                let frames = c.frames.max(1) as f64;
                let mut push = |metric: Metric, parameter: String, value: f64| {
                    rows.push(ResultRow {
                        experiment: spec.id.clone(),
                        waveform: w,
                        snr_db: snr,
                        metric,
                        parameter,
                        value,
                        trials: spec.trials,
                        seed: spec.seed,
                    })
                };
                match spec.kind {
                    ExperimentKind::ThresholdSweep => {
                        push(Metric::ToMeanError, String::new(), c.to_coarse / frames);
                        for (t, v) in spec.thresholds.iter().zip(&c.to_fine) {
                            push(
                                Metric::ToFineMeanError,
                                format!("threshold={t}"),
                                v / frames,
                            );
                        }
                    }
                    ExperimentKind::SyncVsSnr => {
                        push(Metric::CfoMse, String::new(), c.cfo_se / frames);
                        push(Metric::ToMeanError, String::new(), c.to_coarse / frames);
                        push(
                            Metric::ToFineMeanError,
                            format!("threshold={}", spec.sync.threshold),
                            c.to_fine.first().copied().unwrap_or(0.0) / frames,
                        );
                    }
                    ExperimentKind::BerVsSnr => {
                        push(
                            Metric::Ber,
                            String::new(),
                            c.bit_errors as f64 / c.bits.max(1) as f64,
                        );
                    }
                    ExperimentKind::MuUplink => {
                        push(
                            Metric::Ber,
                            String::new(),
                            c.bit_errors as f64 / c.bits.max(1) as f64,
                        );
                        for (q, (e, b)) in c.user_errors.iter().zip(&c.user_bits).enumerate() {
                            push(
                                Metric::Ber,
                                format!("user={q}"),
                                *e as f64 / (*b).max(1) as f64,
                            );
                        }
                    }
                }
            }
        }
        rows
    }
}

fn random_bits(rng: &mut ChaCha20Rng, count: usize) -> Vec<bool> {
    (0..count).map(|_| rng.random::<bool>()).collect()
}

fn count_errors(estimates: &[Complex64], bits: &[bool], c: Constellation) -> u64 {
    let k = c.bits_per_symbol();
    estimates
        .iter()
        .zip(bits.chunks_exact(k))
        .map(|(s, truth)| {
            let decided = c.index_bits(c.decide(*s));
            decided.iter().zip(truth).filter(|(a, b)| a != b).count() as u64
        })
        .sum()
}

fn draw_impairments(spec: &ExperimentSpec, rng: &mut ChaCha20Rng) -> Result<Impairments> {
    let frame = &spec.frame;
    let imp = &spec.impairments;
    let theta_d = match imp.theta_d {
        Some(t) => t,
        None => rng.random_range(0..frame.m()),
    };
    let theta_t = rng.random_range(0..=imp.theta_t_max);
    let mut epsilon = if imp.epsilon_max > 0.0 {
        rng.random_range(-imp.epsilon_max..imp.epsilon_max)
    } else {
        0.0
    };
    if imp.epsilon_grid == DopplerGrid::Integer {
        epsilon = epsilon.round();
    }
    Impairments::new(theta_d, theta_t, epsilon, frame)
}

/// Single-user realization shared by all waveforms and SNR points.
struct Realization {
    channel: LtvChannel,
    impairments: Impairments,
    bits: Vec<bool>,
    mask: OverlayMask,
    data_indices: Vec<usize>,
    tx: DelayDopplerGrid,
    noise_seed: u64,
}

fn draw_realization(spec: &ExperimentSpec, trial: u64) -> Result<Realization> {
    let frame = spec.frame;
    let mut rng_ch = seed_stream(spec.seed, trial, Component::Channel);
    let mut rng_data = seed_stream(spec.seed, trial, Component::Data);
    let mut rng_noise = seed_stream(spec.seed, trial, Component::Noise);
    let mut rng_imp = seed_stream(spec.seed, trial, Component::Impairment);
    let channel = spec.channel.profile.realize(
        &frame,
        spec.channel.velocity_kmh,
        spec.channel.doppler_grid,
        &mut rng_ch,
    );
    let impairments = if spec.sync_enabled {
        draw_impairments(spec, &mut rng_imp)?
    } else {
        Impairments::none()
    };
    let mask = spec.pilot.mask(&frame)?;
    let data_indices = mask.data_indices();
    let bits = random_bits(
        &mut rng_data,
        data_indices.len() * spec.constellation.bits_per_symbol(),
    );
    let mut tx = crate::modem::map_bits(&bits, spec.constellation, frame, Some(&mask))?;
    tx.set(
        spec.pilot.m_p,
        spec.pilot.n_p,
        Complex64::new(spec.pilot.amplitude(), 0.0),
    );
    Ok(Realization {
        channel,
        impairments,
        bits,
        mask,
        data_indices,
        tx,
        noise_seed: rng_noise.random(),
    })
}

/// Transmit, propagate and add noise. With synchronization enabled the
/// frame is followed by one frame of silence so the metric window and the
/// corrected window stay inside the record.
fn receive(
    spec: &ExperimentSpec,
    real: &Realization,
    w: Waveform,
    noise: &NoiseSpec,
) -> Vec<Complex64> {
    let mut x = modulate_direct(&real.tx, w).into_samples();
    if spec.sync_enabled {
        x.resize(x.len() + spec.frame.size(), Complex64::default());
    }
    let mut r = propagate(&x, &real.channel, &real.impairments);
    add_noise(&mut r, noise);
    r
}

fn clamp_window(theta: usize, record_len: usize, frame_len: usize) -> usize {
    theta.min(record_len.saturating_sub(frame_len))
}

/// Pilot-cancelled damped least squares over the data bins.
fn equalize_data<A: LinearOperator>(
    spec: &ExperimentSpec,
    op: &A,
    rx: &DelayDopplerGrid,
    data_indices: &[usize],
    sigma2: f64,
) -> Result<Vec<Complex64>> {
    let pilot = spec.pilot.pilot_grid(&spec.frame);
    let y: Vec<Complex64> = rx
        .as_slice()
        .iter()
        .zip(op.apply(pilot.as_slice()))
        .map(|(a, b)| a - b)
        .collect();
    let sub = ColumnSubset::new(op, data_indices.to_vec())?;
    match spec.eq_method {
        EqMethod::Iterative => Ok(lsmr(&sub, &y, sigma2.sqrt(), spec.eq)?.solution),
        EqMethod::Mmse => {
            let size = spec.frame.size();
            let mut h = DMatrix::zeros(size, data_indices.len());
            let mut unit = vec![Complex64::default(); data_indices.len()];
            for j in 0..data_indices.len() {
                unit[j] = Complex64::new(1.0, 0.0);
                h.set_column(j, &nalgebra::DVector::from_vec(sub.apply(&unit)));
                unit[j] = Complex64::default();
            }
            mmse_solve(&h, &y, sigma2)
        }
    }
}

fn equalized(
    spec: &ExperimentSpec,
    real: &Realization,
    w: Waveform,
    noise: &NoiseSpec,
) -> Result<Vec<Complex64>> {
    let frame = spec.frame;
    let r = receive(spec, real, w, noise);
    let len = frame.len_with_cp();
    let imp = real.impairments;
    let (window, genie): (TimeSignal, LtvChannel) = match (spec.sync_enabled, spec.csi) {
        (false, _) => (frame_window(&r, &frame)?, real.channel.clone()),
        (true, CsiMode::Perfect) => {
            let theta = imp.theta(&frame);
            (
                correct(&r, &frame, theta, imp.epsilon)?,
                real.channel.advanced(theta),
            )
        }
        (true, CsiMode::Estimated) => {
            let est = synchronize(&r, &frame, spec.pilot.m_p, spec.pilot.n_p, &spec.sync)?;
            let theta = clamp_window(est.theta_hat, r.len(), len);
            (
                correct(&r, &frame, theta, est.epsilon_hat)?,
                real.channel.clone(),
            )
        }
    };
    let rx = demodulate_direct(&window, w)?;
    let sigma2 = noise.variance();
    let estimates = match spec.csi {
        CsiMode::Perfect => equalize_data(
            spec,
            &DdChannelOperator::new(&genie, w),
            &rx,
            &real.data_indices,
            sigma2,
        )?,
        CsiMode::Estimated => {
            let sigma_hat = estimate_noise_std(&rx, &spec.pilot)?;
            match estimate_channel(&rx, &spec.pilot, sigma_hat, w) {
                Ok(est) => {
                    equalize_data(spec, &est.to_operator(w)?, &rx, &real.data_indices, sigma2)?
                }
                Err(Error::EmptyEstimate) => vec![Complex64::default(); real.data_indices.len()],
                Err(e) => return Err(e),
            }
        }
    };
    debug_assert_eq!(real.mask.data_count(), estimates.len());
    Ok(estimates)
}

/// Hard decisions of one waveform in one trial of a `ber_vs_snr` spec,
/// one vector per SNR point.
pub fn trial_decisions(spec: &ExperimentSpec, trial: u64, w: Waveform) -> Result<Vec<Vec<usize>>> {
    let real = draw_realization(spec, trial)?;
    let power = signal_power(real.data_indices.len(), spec.pilot.rho_p, spec.frame.size());
    spec.snr_db
        .iter()
        .map(|&snr| {
            let noise = NoiseSpec::new(noise_variance(snr, power), real.noise_seed)?;
            let est = equalized(spec, &real, w, &noise)?;
            Ok(est.iter().map(|s| spec.constellation.decide(*s)).collect())
        })
        .collect()
}

fn sync_cell(
    spec: &ExperimentSpec,
    real: &Realization,
    w: Waveform,
    noise: &NoiseSpec,
) -> Result<Cell> {
    let frame = spec.frame;
    let r = receive(spec, real, w, noise);
    let est = synchronize(&r, &frame, spec.pilot.m_p, spec.pilot.n_p, &spec.sync)?;
    let truth = real.impairments.theta_d;
    let m = frame.m();
    let to_fine = match spec.kind {
        ExperimentKind::ThresholdSweep => spec
            .thresholds
            .iter()
            .map(|&t| {
                fine_to(&est.metric, t, spec.pilot.m_p, frame.cp_len())
                    .map(|f| cyclic_error(f, truth, m) as f64)
            })
            .collect::<Result<Vec<f64>>>()?,
        _ => vec![cyclic_error(est.theta_d_fine, truth, m) as f64],
    };
    Ok(Cell {
        cfo_se: (est.epsilon_hat - real.impairments.epsilon).powi(2),
        to_coarse: cyclic_error(est.theta_d_coarse, truth, m) as f64,
        to_fine,
        frames: 1,
        ..Cell::default()
    })
}

fn single_user_trial(spec: &ExperimentSpec, trial: u64) -> Result<TrialCells> {
    let real = draw_realization(spec, trial)?;
    let power = signal_power(real.data_indices.len(), spec.pilot.rho_p, spec.frame.size());
    let mut out = TrialCells::empty(spec);
    for (si, &snr) in spec.snr_db.iter().enumerate() {
        let noise = NoiseSpec::new(noise_variance(snr, power), real.noise_seed)?;
        for (wi, &w) in spec.waveforms.iter().enumerate() {
            out.cells[si][wi] = match spec.kind {
                ExperimentKind::BerVsSnr => Cell {
                    bit_errors: count_errors(
                        &equalized(spec, &real, w, &noise)?,
                        &real.bits,
                        spec.constellation,
                    ),
                    bits: real.bits.len() as u64,
                    frames: 1,
                    ..Cell::default()
                },
                _ => sync_cell(spec, &real, w, &noise)?,
            };
        }
    }
    Ok(out)
}

fn mu_trial(spec: &ExperimentSpec, trial: u64) -> Result<TrialCells> {
    let frame = spec.frame;
    let alloc = spec
        .allocation
        .as_ref()
        .ok_or_else(|| Error::Allocation("missing allocation".into()))?;
    let mut rng_ch = seed_stream(spec.seed, trial, Component::Channel);
    let mut rng_data = seed_stream(spec.seed, trial, Component::Data);
    let noise_seed: u64 = seed_stream(spec.seed, trial, Component::Noise).random();
    let c = spec.constellation;
    let k = c.bits_per_symbol();
    let mut users = Vec::with_capacity(alloc.num_users());
    let mut user_bits = Vec::with_capacity(alloc.num_users());
    for u in alloc.users() {
        let ch = spec.channel.profile.realize(
            &frame,
            spec.channel.velocity_kmh,
            spec.channel.doppler_grid,
            &mut rng_ch,
        );
        let bits = random_bits(&mut rng_data, u.size() * k);
        let symbols: Vec<Complex64> = bits.chunks_exact(k).map(|b| c.map(b)).collect();
        let (mq, nq) = u.dims();
        users.push((DMatrix::from_column_slice(mq, nq, &symbols), ch));
        user_bits.push(bits);
    }
    let total_symbols: usize = alloc.users().iter().map(|u| u.size()).sum();
    let power = signal_power(total_symbols, 0.0, frame.size());
    let mut out = TrialCells::empty(spec);
    for (wi, &w) in spec.waveforms.iter().enumerate() {
        let clean = compound_uplink(&users, alloc, w, &NoiseSpec::none())?;
        for (si, &snr) in spec.snr_db.iter().enumerate() {
            let noise = NoiseSpec::new(noise_variance(snr, power), noise_seed)?;
            let eta = demodulate_direct(
                &TimeSignal::with_cp(frame, noise.samples(frame.len_with_cp()))?,
                w,
            )?;
            let y: Vec<Complex64> = clean
                .received
                .as_slice()
                .iter()
                .zip(eta.as_slice())
                .map(|(a, b)| a + b)
                .collect();
            let x = mmse_solve(&clean.stacked, &y, noise.variance())?;
            let blocks = split_users(&x, alloc)?;
            let cell = &mut out.cells[si][wi];
            cell.frames = 1;
            for (q, block) in blocks.iter().enumerate() {
                let e = count_errors(block.as_slice(), &user_bits[q], c);
                cell.bit_errors += e;
                cell.bits += user_bits[q].len() as u64;
                cell.user_errors.push(e);
                cell.user_bits.push(user_bits[q].len() as u64);
            }
        }
    }
    Ok(out)
}

pub(super) fn run_trial(spec: &ExperimentSpec, trial: u64) -> Result<TrialCells> {
    match spec.kind {
        ExperimentKind::MuUplink => mu_trial(spec, trial),
        _ => single_user_trial(spec, trial),
    }
}
