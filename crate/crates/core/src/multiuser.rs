//! Uplink multiple access on a shared delay-Doppler grid.
//!
//! User `q` owns delay bins `U_tau^q` and Doppler bins `U_nu^q`; its
//! `M_q x N_q` symbol block lands at `D_q[U_tau[i], U_nu[j]] = D^q[i, j]`.
//! In vectorized form this is `vec(D_q) = Gamma^q vec(D^q)` with the
//! selection matrix `Gamma^q = (Gamma_nu^q)^T kron Gamma_tau^q`.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{add_noise, build_dd_matrix, propagate, LtvChannel, NoiseSpec};
use crate::config::ConfigMap;
use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::modem::{demodulate_direct, modulate_direct, DelayDopplerGrid, TimeSignal, Waveform};
use crate::sync::Impairments;

/// Delay and Doppler bins of one user, in mapping order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserBins {
    pub delay: Vec<usize>,
    pub doppler: Vec<usize>,
}

impl UserBins {
    pub fn new(delay: Vec<usize>, doppler: Vec<usize>) -> Self {
        UserBins { delay, doppler }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.delay.len(), self.doppler.len())
    }

    pub fn size(&self) -> usize {
        self.delay.len() * self.doppler.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    frame: FrameConfig,
    users: Vec<UserBins>,
    relaxed: bool,
}

fn has_duplicates(v: &[usize]) -> bool {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.windows(2).any(|w| w[0] == w[1])
}

fn intersects(a: &[usize], b: &[usize]) -> bool {
    a.iter().any(|x| b.contains(x))
}

impl Allocation {
    /// Validates the bin sets. Users must be disjoint in both the delay and
    /// the Doppler dimension; with `relaxed` it suffices that no bin of the
    /// product grid is shared.
    pub fn new(frame: FrameConfig, users: Vec<UserBins>, relaxed: bool) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::Allocation("no users".into()));
        }
        for (q, u) in users.iter().enumerate() {
            if u.delay.is_empty() || u.doppler.is_empty() {
                return Err(Error::Allocation(format!("user {q} has an empty bin set")));
            }
            if let Some(&b) = u.delay.iter().find(|&&b| b >= frame.m()) {
                return Err(Error::Allocation(format!(
                    "user {q}: delay bin {b} outside 0..{}",
                    frame.m()
                )));
            }
            if let Some(&b) = u.doppler.iter().find(|&&b| b >= frame.n()) {
                return Err(Error::Allocation(format!(
                    "user {q}: Doppler bin {b} outside 0..{}",
                    frame.n()
                )));
            }
            if has_duplicates(&u.delay) || has_duplicates(&u.doppler) {
                return Err(Error::Allocation(format!("user {q} lists a bin twice")));
            }
        }
        for i in 0..users.len() {
            for j in i + 1..users.len() {
                let (a, b) = (&users[i], &users[j]);
                let tau = intersects(&a.delay, &b.delay);
                let nu = intersects(&a.doppler, &b.doppler);
                let overlap = if relaxed { tau && nu } else { tau || nu };
                if overlap {
                    return Err(Error::Allocation(format!("users {i} and {j} overlap")));
                }
            }
        }
        Ok(Allocation {
            frame,
            users,
            relaxed,
        })
    }

    /// Single user on the whole grid in natural order.
    pub fn full(frame: FrameConfig) -> Self {
        Allocation {
            frame,
            users: vec![UserBins::new(
                (0..frame.m()).collect(),
                (0..frame.n()).collect(),
            )],
            relaxed: false,
        }
    }

    /// Reads `user.<q>.delay = [...]`, `user.<q>.doppler = [...]` and an
    /// optional `relaxed = true`. Users are numbered from zero.
    pub fn parse(text: &str, frame: FrameConfig) -> Result<Self> {
        let cfg = ConfigMap::parse(text)?;
        let relaxed = cfg.get_or("relaxed", false)?;
        let mut users = Vec::new();
        for q in 0.. {
            let (dk, nk) = (format!("user.{q}.delay"), format!("user.{q}.doppler"));
            match (cfg.get_list::<usize>(&dk)?, cfg.get_list::<usize>(&nk)?) {
                (Some(delay), Some(doppler)) => users.push(UserBins::new(delay, doppler)),
                (None, None) => break,
                (Some(_), None) => return Err(cfg.error(&dk, format!("missing {nk}"))),
                (None, Some(_)) => return Err(cfg.error(&nk, format!("missing {dk}"))),
            }
        }
        cfg.finish()?;
        Allocation::new(frame, users, relaxed)
    }

    pub fn load(path: &Path, frame: FrameConfig) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, frame)
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    pub fn users(&self) -> &[UserBins] {
        &self.users
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn is_relaxed(&self) -> bool {
        self.relaxed
    }

    fn user(&self, q: usize) -> Result<&UserBins> {
        self.users
            .get(q)
            .ok_or_else(|| Error::Allocation(format!("no user {q} (have {})", self.users.len())))
    }

    /// Grid index of each column of `Gamma^q`: entry `i + j M_q` of the
    /// user's vectorized block goes to `U_tau[i] + U_nu[j] M`.
    pub fn selection(&self, q: usize) -> Result<Vec<usize>> {
        let u = self.user(q)?;
        let m = self.frame.m();
        Ok(u.doppler
            .iter()
            .flat_map(|&nu| u.delay.iter().map(move |&tau| tau + nu * m))
            .collect())
    }

    /// Selections of all users, concatenated in user order.
    pub fn stacked_selection(&self) -> Vec<usize> {
        (0..self.users.len())
            .flat_map(|q| self.selection(q).expect("valid user"))
            .collect()
    }

    /// Owner of every grid bin in `vec` order, `None` for idle bins.
    pub fn owners(&self) -> Vec<Option<usize>> {
        let mut owners = vec![None; self.frame.size()];
        for q in 0..self.users.len() {
            for i in self.selection(q).expect("valid user") {
                owners[i] = Some(q);
            }
        }
        owners
    }
}

/// Embeds user `q`'s `M_q x N_q` block in an otherwise empty grid.
pub fn place_user(
    data: &DMatrix<Complex64>,
    alloc: &Allocation,
    q: usize,
) -> Result<DelayDopplerGrid> {
    let u = alloc.user(q)?;
    let (mq, nq) = u.dims();
    if data.nrows() != mq || data.ncols() != nq {
        return Err(Error::shape(
            format!("{mq}x{nq} block"),
            format!("{}x{}", data.nrows(), data.ncols()),
        ));
    }
    let mut grid = DelayDopplerGrid::zeros(alloc.frame);
    for (j, &nu) in u.doppler.iter().enumerate() {
        for (i, &tau) in u.delay.iter().enumerate() {
            grid.set(tau, nu, data[(i, j)]);
        }
    }
    Ok(grid)
}

/// Received grid and detection model of a multiuser uplink frame.
#[derive(Debug, Clone)]
pub struct CompoundUplink {
    pub received: DelayDopplerGrid,
    /// Sum of the placed user grids.
    pub transmitted: DelayDopplerGrid,
    /// `MN x MN`: column `j` is column `j` of the owning user's channel,
    /// zero for idle bins.
    pub channel: DMatrix<Complex64>,
    /// `MN x sum_q M_q N_q`: `[H^0 Gamma^0, H^1 Gamma^1, ...]`.
    pub stacked: DMatrix<Complex64>,
    pub waveform: Waveform,
}

/// Compound channel from per-user equivalent channels.
pub fn compound_matrix(
    user_channels: &[DMatrix<Complex64>],
    alloc: &Allocation,
) -> Result<DMatrix<Complex64>> {
    let size = alloc.frame.size();
    if user_channels.len() != alloc.num_users() {
        return Err(Error::Allocation(format!(
            "{} channels for {} users",
            user_channels.len(),
            alloc.num_users()
        )));
    }
    let mut h = DMatrix::zeros(size, size);
    for (j, owner) in alloc.owners().into_iter().enumerate() {
        if let Some(q) = owner {
            h.set_column(j, &user_channels[q].column(j));
        }
    }
    Ok(h)
}

/// Simulates all users through their own channels, superposes them at the
/// receiver, adds noise once and demodulates.
pub fn compound_uplink(
    users: &[(DMatrix<Complex64>, LtvChannel)],
    alloc: &Allocation,
    w: Waveform,
    noise: &NoiseSpec,
) -> Result<CompoundUplink> {
    let frame = alloc.frame;
    if users.len() != alloc.num_users() {
        return Err(Error::Allocation(format!(
            "{} users for {} allocations",
            users.len(),
            alloc.num_users()
        )));
    }
    let len = frame.len_with_cp();
    let mut record: Option<Vec<Complex64>> = None;
    let mut transmitted: Option<DelayDopplerGrid> = None;
    let mut channels = Vec::with_capacity(users.len());
    for (q, (data, ch)) in users.iter().enumerate() {
        if ch.frame() != &frame {
            return Err(Error::Frame(format!(
                "user {q} channel uses a different frame"
            )));
        }
        let grid = place_user(data, alloc, q)?;
        let mut r = propagate(
            modulate_direct(&grid, w).samples(),
            ch,
            &Impairments::none(),
        );
        r.truncate(len);
        match record.as_mut() {
            None => record = Some(r),
            Some(acc) => acc.iter_mut().zip(&r).for_each(|(a, b)| *a += b),
        }
        match transmitted.as_mut() {
            None => transmitted = Some(grid),
            Some(acc) => acc
                .as_mut_slice()
                .iter_mut()
                .zip(grid.as_slice())
                .for_each(|(a, b)| *a += b),
        }
        channels.push(build_dd_matrix(ch, w).into_matrix());
    }
    let mut record = record.expect("at least one user");
    add_noise(&mut record, noise);
    let received = demodulate_direct(&TimeSignal::with_cp(frame, record)?, w)?;
    let channel = compound_matrix(&channels, alloc)?;
    let stacked = channel.select_columns(&alloc.stacked_selection());
    Ok(CompoundUplink {
        received,
        transmitted: transmitted.expect("at least one user"),
        channel,
        stacked,
        waveform: w,
    })
}

/// Splits a stacked estimate back into per-user `M_q x N_q` blocks.
pub fn split_users(stacked: &[Complex64], alloc: &Allocation) -> Result<Vec<DMatrix<Complex64>>> {
    let total: usize = alloc.users.iter().map(UserBins::size).sum();
    if stacked.len() != total {
        return Err(Error::shape(
            format!("{total} symbols"),
            format!("{}", stacked.len()),
        ));
    }
    let mut out = Vec::with_capacity(alloc.num_users());
    let mut offset = 0;
    for u in &alloc.users {
        let (mq, nq) = u.dims();
        out.push(DMatrix::from_column_slice(
            mq,
            nq,
            &stacked[offset..offset + mq * nq],
        ));
        offset += mq * nq;
    }
    Ok(out)
}
