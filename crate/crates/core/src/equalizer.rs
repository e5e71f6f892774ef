//! Linear MMSE equalization: a dense direct solve and an iterative
//! damped least-squares solver (LSMR) over any [`LinearOperator`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::LinearOperator;
use crate::error::{Error, Result};
use crate::modem::DelayDopplerGrid;

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `x = (H^H H + sigma2 I)^{-1} H^H y`. With `sigma2 = 0` and square `H`
/// this solves `H x = y` directly.
pub fn mmse_solve(h: &DMatrix<Complex64>, y: &[Complex64], sigma2: f64) -> Result<Vec<Complex64>> {
    if y.len() != h.nrows() {
        return Err(Error::shape(
            format!("{} samples", h.nrows()),
            format!("{}", y.len()),
        ));
    }
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be >= 0, got {sigma2}"
        )));
    }
    let y = DVector::from_column_slice(y);
    let x = if sigma2 == 0.0 && h.is_square() {
        h.clone().lu().solve(&y)
    } else {
        let hh = h.adjoint();
        let mut gram = &hh * h;
        for i in 0..gram.nrows() {
            gram[(i, i)] += Complex64::new(sigma2, 0.0);
        }
        gram.lu().solve(&(hh * y))
    }
    .ok_or(Error::Singular)?;
    if x.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Singular);
    }
    Ok(x.as_slice().to_vec())
}

/// Direct MMSE equalization of a received grid.
pub fn equalize_mmse(
    received: &DelayDopplerGrid,
    h: &DMatrix<Complex64>,
    sigma2: f64,
) -> Result<DelayDopplerGrid> {
    let size = received.frame().size();
    if h.nrows() != size || h.ncols() != size {
        return Err(Error::shape(
            format!("{size}x{size} channel"),
            format!("{}x{}", h.nrows(), h.ncols()),
        ));
    }
    let x = mmse_solve(h, received.as_slice(), sigma2)?;
    DelayDopplerGrid::from_vec(*received.frame(), x)
}

/// Stopping rule and budget for [`lsmr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeConfig {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for IterativeConfig {
    fn default() -> Self {
        IterativeConfig {
            max_iter: 200,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeOutcome {
    pub solution: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of the damped residual `[y - A x; damp x]`.
    pub residual: f64,
    /// Norm of the normal-equation residual `A^H (y - A x) - damp^2 x`.
    pub normal_residual: f64,
}

/// Stable Givens rotation: `(c, s, r)` with `[c s; -s c] [a; b] = [r; 0]`.
fn sym_ortho(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        return (if a == 0.0 { 1.0 } else { a.signum() }, 0.0, a.abs());
    }
    if a == 0.0 {
        return (0.0, b.signum(), b.abs());
    }
    if b.abs() > a.abs() {
        let tau = a / b;
        let s = b.signum() / (1.0 + tau * tau).sqrt();
        let c = s * tau;
        (c, s, b / s)
    } else {
        let tau = b / a;
        let c = a.signum() / (1.0 + tau * tau).sqrt();
        let s = c * tau;
        (c, s, a / c)
    }
}

fn axpy(y: &mut [Complex64], a: f64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * a;
    }
}

fn scale(v: &mut [Complex64], a: f64) {
    for x in v.iter_mut() {
        *x *= a;
    }
}

/// LSMR (Fong and Saunders) for `min ||A x - y||^2 + damp^2 ||x||^2` with
/// complex `A`. Golub-Kahan bidiagonalization keeps all recurrence scalars
/// real, so the real algorithm carries over unchanged.
///
/// Stops when `||A^H r - damp^2 x|| <= tol ||[A; damp I]|| ||r||` or when the
/// right-hand side is reproduced to `tol`.
pub fn lsmr<A: LinearOperator + ?Sized>(
    a: &A,
    y: &[Complex64],
    damp: f64,
    cfg: IterativeConfig,
) -> Result<IterativeOutcome> {
    if y.len() != a.nrows() {
        return Err(Error::shape(
            format!("{} samples", a.nrows()),
            format!("{}", y.len()),
        ));
    }
    let n = a.ncols();
    let mut x = vec![Complex64::default(); n];
    let normb = norm(y);
    let mut u = y.to_vec();
    let mut beta = normb;
    if beta > 0.0 {
        scale(&mut u, 1.0 / beta);
    }
    let mut v = a.apply_adjoint(&u);
    let mut alpha = norm(&v);
    if alpha > 0.0 {
        scale(&mut v, 1.0 / alpha);
    }
    if cfg.max_iter == 0 {
        return Ok(IterativeOutcome {
            solution: x,
            iterations: 0,
            converged: false,
            residual: normb,
            normal_residual: alpha * beta,
        });
    }
    if alpha * beta == 0.0 {
        return Ok(IterativeOutcome {
            solution: x,
            iterations: 0,
            converged: true,
            residual: normb,
            normal_residual: 0.0,
        });
    }

    let mut zetabar = alpha * beta;
    let mut alphabar = alpha;
    let mut rho = 1.0;
    let mut rhobar = 1.0;
    let mut cbar = 1.0;
    let mut sbar = 0.0;
    let mut h = v.clone();
    let mut hbar = vec![Complex64::default(); n];

    // Residual-norm recurrences.
    let mut betadd = beta;
    let mut betad = 0.0;
    let mut rhodold = 1.0;
    let mut tautildeold = 0.0;
    let mut thetatilde = 0.0;
    let mut zeta = 0.0;
    let mut d = 0.0;
    let mut norm_a2 = alpha * alpha;

    let mut normr = beta;
    let mut normar = alpha * beta;
    let mut itn = 0;
    let mut converged = false;
    while itn < cfg.max_iter {
        itn += 1;
        let av = a.apply(&v);
        for (ui, avi) in u.iter_mut().zip(&av) {
            *ui = avi - *ui * alpha;
        }
        beta = norm(&u);
        if beta > 0.0 {
            scale(&mut u, 1.0 / beta);
            let ahu = a.apply_adjoint(&u);
            for (vi, ai) in v.iter_mut().zip(&ahu) {
                *vi = ai - *vi * beta;
            }
            alpha = norm(&v);
            if alpha > 0.0 {
                scale(&mut v, 1.0 / alpha);
            }
        }

        let (chat, shat, alphahat) = sym_ortho(alphabar, damp);
        let rhoold = rho;
        let (c, s, rho_new) = sym_ortho(alphahat, beta);
        rho = rho_new;
        let thetanew = s * alpha;
        alphabar = c * alpha;

        let rhobarold = rhobar;
        let zetaold = zeta;
        let thetabar = sbar * rho;
        let (cb, sb, rb) = sym_ortho(cbar * rho, thetanew);
        cbar = cb;
        sbar = sb;
        rhobar = rb;
        zeta = cbar * zetabar;
        zetabar *= -sbar;

        let f = thetabar * rho / (rhoold * rhobarold);
        for (hb, hi) in hbar.iter_mut().zip(&h) {
            *hb = hi - *hb * f;
        }
        axpy(&mut x, zeta / (rho * rhobar), &hbar);
        let g = thetanew / rho;
        for (hi, vi) in h.iter_mut().zip(&v) {
            *hi = vi - *hi * g;
        }

        let betaacute = chat * betadd;
        let betacheck = -shat * betadd;
        let betahat = c * betaacute;
        betadd = -s * betaacute;
        let thetatildeold = thetatilde;
        let (ctildeold, stildeold, rhotildeold) = sym_ortho(rhodold, thetabar);
        thetatilde = stildeold * rhobar;
        rhodold = ctildeold * rhobar;
        betad = -stildeold * betad + ctildeold * betahat;
        tautildeold = (zetaold - thetatildeold * tautildeold) / rhotildeold;
        let taud = (zeta - thetatilde * tautildeold) / rhodold;
        d += betacheck * betacheck;
        normr = (d + (betad - taud).powi(2) + betadd * betadd).sqrt();

        norm_a2 += beta * beta;
        let norm_a = (norm_a2 + damp * damp).sqrt();
        norm_a2 += alpha * alpha;
        normar = zetabar.abs();

        let test1 = if normb > 0.0 { normr / normb } else { 0.0 };
        let test2 = if norm_a * normr > 0.0 {
            normar / (norm_a * normr)
        } else {
            0.0
        };
        if test2 <= cfg.tol || test1 <= cfg.tol || normar == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(IterativeOutcome {
        solution: x,
        iterations: itn,
        converged,
        residual: normr,
        normal_residual: normar,
    })
}

/// Iterative MMSE equalization: LSMR with damping `sqrt(sigma2)`.
pub fn equalize_iterative<A: LinearOperator + ?Sized>(
    received: &DelayDopplerGrid,
    h: &A,
    sigma2: f64,
    cfg: IterativeConfig,
) -> Result<(DelayDopplerGrid, IterativeOutcome)> {
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be >= 0, got {sigma2}"
        )));
    }
    let size = received.frame().size();
    if h.nrows() != size || h.ncols() != size {
        return Err(Error::shape(
            format!("{size}x{size} channel"),
            format!("{}x{}", h.nrows(), h.ncols()),
        ));
    }
    let out = lsmr(h, received.as_slice(), sigma2.sqrt(), cfg)?;
    let grid = DelayDopplerGrid::from_vec(*received.frame(), out.solution.clone())?;
    Ok((grid, out))
}

/// `A` restricted to a subset of its input coordinates: `A S` with `S` the
/// selection of `columns`.
#[derive(Debug, Clone)]
pub struct ColumnSubset<'a, A: ?Sized> {
    inner: &'a A,
    columns: Vec<usize>,
}

impl<'a, A: LinearOperator + ?Sized> ColumnSubset<'a, A> {
    pub fn new(inner: &'a A, columns: Vec<usize>) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= inner.ncols()) {
            return Err(Error::InvalidParameter(format!("column {c} out of range")));
        }
        Ok(ColumnSubset { inner, columns })
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    /// Places a reduced vector back on the full input space.
    pub fn scatter(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut full = vec![Complex64::default(); self.inner.ncols()];
        for (c, v) in self.columns.iter().zip(x) {
            full[*c] = *v;
        }
        full
    }
}

impl<A: LinearOperator + ?Sized> LinearOperator for ColumnSubset<'_, A> {
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    fn ncols(&self) -> usize {
        self.columns.len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.inner.apply(&self.scatter(x))
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let full = self.inner.apply_adjoint(y);
        self.columns.iter().map(|&c| full[c]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameConfig;
    use crate::transform::PhaseOperator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        let mut h = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        for i in 0..n {
            h[(i, i)] += Complex64::new(3.0, 0.0);
        }
        h
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    fn rel(a: &[Complex64], b: &[Complex64]) -> f64 {
        let d: Vec<_> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm(&d) / norm(b)
    }

    #[test]
    fn identity_passthrough() {
        let frame = FrameConfig::unit(2, 2, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = DelayDopplerGrid::from_vec(frame, random_vec(4, &mut rng)).unwrap();
        let out = equalize_mmse(&g, &DMatrix::identity(4, 4), 0.0).unwrap();
        assert!(rel(out.as_slice(), g.as_slice()) < 1e-15);
    }

    #[test]
    fn zero_forcing_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_matrix(12, &mut rng);
        let y = random_vec(12, &mut rng);
        let x = mmse_solve(&h, &y, 0.0).unwrap();
        let r: Vec<_> = h.apply(&x).iter().zip(&y).map(|(a, b)| a - b).collect();
        assert!(norm(&r) <= 1e-8 * norm(&y));
    }

    #[test]
    fn unitary_diagonal_closed_form() {
        let frame = FrameConfig::unit(4, 3, 0).unwrap();
        let omega = PhaseOperator::omega(frame).diagonal();
        let h = DMatrix::from_diagonal(&DVector::from_vec(omega.clone()));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = random_vec(12, &mut rng);
        let s2 = 0.3;
        let x = mmse_solve(&h, &y, s2).unwrap();
        for i in 0..12 {
            let expected = omega[i].conj() * y[i] / (1.0 + s2);
            assert!((x[i] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_without_noise() {
        let h = DMatrix::<Complex64>::zeros(3, 3);
        assert_eq!(
            mmse_solve(&h, &[Complex64::default(); 3], 0.0),
            Err(Error::Singular)
        );
    }

    #[test]
    fn lsmr_identity_converges_fast() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = random_vec(16, &mut rng);
        let s2: f64 = 0.25;
        let out = lsmr(
            &DMatrix::<Complex64>::identity(16, 16),
            &y,
            s2.sqrt(),
            IterativeConfig::default(),
        )
        .unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 2);
        let expected: Vec<_> = y.iter().map(|v| v / (1.0 + s2)).collect();
        assert!(rel(&out.solution, &expected) < 1e-12);
    }

    #[test]
    fn lsmr_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let h = random_matrix(16, &mut rng);
            let y = random_vec(16, &mut rng);
            let direct = mmse_solve(&h, &y, 0.05).unwrap();
            let out = lsmr(&h, &y, 0.05f64.sqrt(), IterativeConfig::default()).unwrap();
            assert!(out.converged);
            assert!(rel(&out.solution, &direct) < 1e-6);
        }
    }

    #[test]
    fn lsmr_zero_budget() {
        let y = vec![Complex64::new(1.0, 0.0); 4];
        let cfg = IterativeConfig {
            max_iter: 0,
            tol: 1e-10,
        };
        let out = lsmr(&DMatrix::<Complex64>::identity(4, 4), &y, 0.0, cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 0);
        assert!(out.solution.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn column_subset_matches_dense_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_matrix(8, &mut rng);
        let cols = vec![0, 3, 5];
        let sub = ColumnSubset::new(&h, cols.clone()).unwrap();
        let dense = h.select_columns(&cols);
        let y = random_vec(8, &mut rng);
        let a = lsmr(&sub, &y, 0.1, IterativeConfig::default()).unwrap();
        let b = mmse_solve(&dense, &y, 0.01).unwrap();
        assert!(rel(&a.solution, &b) < 1e-8);
    }
}
