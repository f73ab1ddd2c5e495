//! Integration of the Bogoliubov matrix ODE in raw (`U`) and phase-stripped (`Q`) form.
//!
//! Only the top block row `(α, β)` is evolved; the bottom row is its complex conjugate.

use std::sync::Arc;

use num_complex::Complex64;

use crate::coupling::{coupling_at, BasisFamily, CouplingMatrices, DerivativeOptions, DEFAULT_SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::ode::{Integrator, StepControl, StepStats};
use crate::CMatrix;

/// Top block row `(α, β)` of a `2N × 2N` Bogoliubov matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BogoliubovMatrix {
    pub alpha: CMatrix,
    pub beta: CMatrix,
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

impl BogoliubovMatrix {
    pub fn identity(n: usize) -> Self {
        BogoliubovMatrix { alpha: CMatrix::identity(n, n), beta: CMatrix::zeros(n, n) }
    }

    pub fn new(alpha: CMatrix, beta: CMatrix) -> Result<Self> {
        let n = alpha.nrows();
        for m in [&alpha, &beta] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.ncols() });
            }
        }
        Ok(BogoliubovMatrix { alpha, beta })
    }

    pub fn n_modes(&self) -> usize {
        self.alpha.nrows()
    }

    /// The full `2N × 2N` matrix `[[α, β], [β*, α*]]`.
    pub fn to_block(&self) -> CMatrix {
        let n = self.n_modes();
        let mut out = CMatrix::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(&self.alpha);
        out.view_mut((0, n), (n, n)).copy_from(&self.beta);
        out.view_mut((n, 0), (n, n)).copy_from(&self.beta.map(|z| z.conj()));
        out.view_mut((n, n), (n, n)).copy_from(&self.alpha.map(|z| z.conj()));
        out
    }

    /// `self ∘ first`: the transformation `first` followed by `self`.
    pub fn compose(&self, first: &BogoliubovMatrix) -> Result<BogoliubovMatrix> {
        if self.n_modes() != first.n_modes() {
            return Err(Error::DimensionMismatch { expected: self.n_modes(), found: first.n_modes() });
        }
        let alpha = &self.alpha * &first.alpha + &self.beta * first.beta.map(|z| z.conj());
        let beta = &self.alpha * &first.beta + &self.beta * first.alpha.map(|z| z.conj());
        Ok(BogoliubovMatrix { alpha, beta })
    }

    /// `B⁻¹ = J B† J`, exact when the identities hold.
    pub fn inverse(&self) -> BogoliubovMatrix {
        BogoliubovMatrix { alpha: self.alpha.adjoint(), beta: -self.beta.transpose() }
    }

    /// `Σ_m (|α_nm|² - |β_nm|²)` for each row `n`.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.n_modes())
            .map(|i| {
                self.alpha.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>()
                    - self.beta.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .collect()
    }

    /// Largest elementwise difference to `other`.
    pub fn max_difference(&self, other: &BogoliubovMatrix) -> f64 {
        max_abs(&(&self.alpha - &other.alpha)).max(max_abs(&(&self.beta - &other.beta)))
    }

    fn to_state(&self) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = self.alpha.iter().copied().collect();
        v.extend(self.beta.iter().copied());
        v
    }

    fn from_state(n: usize, y: &[Complex64]) -> Self {
        BogoliubovMatrix {
            alpha: CMatrix::from_column_slice(n, n, &y[..n * n]),
            beta: CMatrix::from_column_slice(n, n, &y[n * n..2 * n * n]),
        }
    }
}

/// Largest elementwise violation of `B J B† J = I` and `B† J B J = I`, written in blocks.
pub fn identity_residual(b: &BogoliubovMatrix) -> f64 {
    let n = b.n_modes();
    let eye = CMatrix::identity(n, n);
    let (a, bt) = (&b.alpha, &b.beta);
    let r1 = a * a.adjoint() - bt * bt.adjoint() - &eye;
    let r2 = a * bt.transpose() - bt * a.transpose();
    let r3 = a.adjoint() * a - bt.transpose() * bt.map(|z| z.conj()) - &eye;
    let r4 = a.adjoint() * bt - bt.transpose() * a.map(|z| z.conj());
    [r1, r2, r3, r4].iter().map(max_abs).fold(0.0, f64::max)
}

/// `second ∘ first`.
pub fn compose(second: &BogoliubovMatrix, first: &BogoliubovMatrix) -> Result<BogoliubovMatrix> {
    second.compose(first)
}

/// Frequencies and couplings at one instant.
#[derive(Clone, Debug)]
pub struct DriverSample {
    pub omegas: Vec<f64>,
    pub coupling: CouplingMatrices,
}

/// Source of `Ω(t)` and `K(t)` for the evolution.
pub trait CouplingDriver: Send + Sync {
    fn n_modes(&self) -> usize;
    fn sample(&self, t: f64) -> Result<DriverSample>;
}

impl<D: CouplingDriver + ?Sized> CouplingDriver for Arc<D> {
    fn n_modes(&self) -> usize {
        (**self).n_modes()
    }
    fn sample(&self, t: f64) -> Result<DriverSample> {
        (**self).sample(t)
    }
}

impl<D: CouplingDriver + ?Sized> CouplingDriver for &D {
    fn n_modes(&self) -> usize {
        (**self).n_modes()
    }
    fn sample(&self, t: f64) -> Result<DriverSample> {
        (**self).sample(t)
    }
}

/// Driver built from a basis family, assembling couplings on demand.
pub struct FamilyDriver<F: BasisFamily> {
    family: F,
    n_modes: usize,
    pub derivatives: DerivativeOptions,
    pub symmetry_tol: f64,
}

impl<F: BasisFamily> FamilyDriver<F> {
    pub fn new(family: F, t_ref: f64) -> Result<Self> {
        let n_modes = family.basis_at(t_ref)?.n_modes();
        Ok(FamilyDriver { family, n_modes, derivatives: DerivativeOptions::default(), symmetry_tol: DEFAULT_SYMMETRY_TOL })
    }

    pub fn family(&self) -> &F {
        &self.family
    }
}

impl<F: BasisFamily> CouplingDriver for FamilyDriver<F> {
    fn n_modes(&self) -> usize {
        self.n_modes
    }

    fn sample(&self, t: f64) -> Result<DriverSample> {
        let (basis, coupling) = coupling_at(&self.family, t, self.derivatives, self.symmetry_tol)?;
        Ok(DriverSample { omegas: basis.omegas().to_vec(), coupling })
    }
}

/// Closure-backed driver.
pub struct FnDriver<F> {
    n: usize,
    f: F,
}

impl<F: Fn(f64) -> Result<DriverSample> + Send + Sync> FnDriver<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnDriver { n, f }
    }
}

impl<F: Fn(f64) -> Result<DriverSample> + Send + Sync> CouplingDriver for FnDriver<F> {
    fn n_modes(&self) -> usize {
        self.n
    }
    fn sample(&self, t: f64) -> Result<DriverSample> {
        (self.f)(t)
    }
}

/// Integration settings shared by both forms.
#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    pub tol: f64,
    /// Abort when the identity residual exceeds `drift_factor · tol`.
    pub drift_factor: f64,
    pub max_step: f64,
}

impl EvolveOptions {
    pub fn new(tol: f64) -> Self {
        EvolveOptions { tol, drift_factor: 100.0, max_step: f64::INFINITY }
    }
}

/// An evolved matrix with its diagnostics.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub t0: f64,
    pub t: f64,
    pub matrix: BogoliubovMatrix,
    pub identity_residual: f64,
    pub stats: StepStats,
}

/// Diagonal phases `Θ(t) = exp ∫(iΩ + A)`, stored as angles of the top block.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseAccumulator {
    pub t: f64,
    /// `φ_n` with `Θ_nn = e^{iφ_n}` on the top block and `e^{-iφ_n}` below.
    pub phases: Vec<f64>,
    /// Diagonal of `A(t)` on the top block: `i Im α̂_nn`.
    pub a_diag: Vec<Complex64>,
}

impl PhaseAccumulator {
    /// All `2N` diagonal entries of `Θ`.
    pub fn theta(&self) -> Vec<Complex64> {
        let top: Vec<Complex64> = self.phases.iter().map(|p| Complex64::from_polar(1.0, *p)).collect();
        let bottom: Vec<Complex64> = top.iter().map(|z| z.conj()).collect();
        top.into_iter().chain(bottom).collect()
    }

    /// `U = Θ Q`.
    pub fn apply(&self, q: &BogoliubovMatrix) -> BogoliubovMatrix {
        let mut out = q.clone();
        for (i, p) in self.phases.iter().enumerate() {
            let z = Complex64::from_polar(1.0, *p);
            for j in 0..q.n_modes() {
                out.alpha[(i, j)] *= z;
                out.beta[(i, j)] *= z;
            }
        }
        out
    }
}

fn check_sample(n: usize, s: &DriverSample) -> Result<()> {
    if s.omegas.len() != n || s.coupling.alpha_hat.nrows() != n || s.coupling.beta_hat.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: s.omegas.len() });
    }
    Ok(())
}

fn drift_guard(n: usize, limit: f64) -> impl FnMut(f64, &[Complex64]) -> Result<()> {
    move |t, y| {
        let r = identity_residual(&BogoliubovMatrix::from_state(n, &y[..2 * n * n]));
        if r > limit {
            return Err(Error::IdentityDrift { t, residual: r, limit });
        }
        Ok(())
    }
}

/// `dU/dt = [iΩ + K] U` with `U(t0) = I`.
pub fn evolve_u(driver: &dyn CouplingDriver, t0: f64, tf: f64, opts: EvolveOptions) -> Result<Evolution> {
    let n = driver.n_modes();
    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
        let s = driver.sample(t)?;
        check_sample(n, &s)?;
        let b = BogoliubovMatrix::from_state(n, y);
        let mut gen = s.coupling.alpha_hat.clone();
        for i in 0..n {
            gen[(i, i)] += Complex64::new(0.0, s.omegas[i]);
        }
        let da = &gen * &b.alpha + &s.coupling.beta_hat * b.beta.map(|z| z.conj());
        let db = &gen * &b.beta + &s.coupling.beta_hat * b.alpha.map(|z| z.conj());
        dy[..n * n].copy_from_slice(da.as_slice());
        dy[n * n..].copy_from_slice(db.as_slice());
        Ok(())
    };
    let mut ctrl = StepControl::new(opts.tol);
    ctrl.max_step = opts.max_step;
    let mut it = Integrator::new(rhs, t0, BogoliubovMatrix::identity(n).to_state(), ctrl)?;
    it.advance_to(tf, drift_guard(n, opts.drift_factor * opts.tol))?;
    let matrix = BogoliubovMatrix::from_state(n, it.state());
    Ok(Evolution { t0, t: tf, identity_residual: identity_residual(&matrix), matrix, stats: it.stats })
}

fn q_rhs<'a>(driver: &'a dyn CouplingDriver, n: usize) -> impl FnMut(f64, &[Complex64], &mut [Complex64]) -> Result<()> + 'a {
    move |t, y, dy| {
        let s = driver.sample(t)?;
        check_sample(n, &s)?;
        let q = BogoliubovMatrix::from_state(n, &y[..2 * n * n]);
        let phase: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, y[2 * n * n + i].re)).collect();
        let (ah, bh) = (&s.coupling.alpha_hat, &s.coupling.beta_hat);
        let ka = CMatrix::from_fn(n, n, |i, j| {
            let v = if i == j { Complex64::new(ah[(i, i)].re, 0.0) } else { ah[(i, j)] };
            phase[i].conj() * v * phase[j]
        });
        let kb = CMatrix::from_fn(n, n, |i, j| phase[i].conj() * bh[(i, j)] * phase[j].conj());
        let da = &ka * &q.alpha + &kb * q.beta.map(|z| z.conj());
        let db = &ka * &q.beta + &kb * q.alpha.map(|z| z.conj());
        dy[..n * n].copy_from_slice(da.as_slice());
        dy[n * n..2 * n * n].copy_from_slice(db.as_slice());
        for i in 0..n {
            dy[2 * n * n + i] = Complex64::new(s.omegas[i] + ah[(i, i)].im, 0.0);
        }
        Ok(())
    }
}

fn q_result(n: usize, t0: f64, t: f64, y: &[Complex64], a_diag: Vec<Complex64>, stats: StepStats) -> (Evolution, PhaseAccumulator) {
    let matrix = BogoliubovMatrix::from_state(n, &y[..2 * n * n]);
    let phases = y[2 * n * n..].iter().map(|z| z.re).collect();
    (
        Evolution { t0, t, identity_residual: identity_residual(&matrix), matrix, stats },
        PhaseAccumulator { t, phases, a_diag },
    )
}

fn a_diag_at(driver: &dyn CouplingDriver, t: f64) -> Result<Vec<Complex64>> {
    let s = driver.sample(t)?;
    Ok(s.coupling.alpha_hat.diagonal().iter().map(|z| Complex64::new(0.0, z.im)).collect())
}

/// `dQ/dt = Θ* K̄ Θ Q` with `K̄ = K - A`; returns `Q` and the accumulated `Θ`.
pub fn evolve_q(driver: &dyn CouplingDriver, t0: f64, tf: f64, opts: EvolveOptions) -> Result<(Evolution, PhaseAccumulator)> {
    let mut out = evolve_q_series(driver, t0, &[tf], opts)?;
    Ok(out.pop().unwrap())
}

/// [`evolve_q`] sampled at each of `times`, which must be monotone away from `t0`.
pub fn evolve_q_series(
    driver: &dyn CouplingDriver,
    t0: f64,
    times: &[f64],
    opts: EvolveOptions,
) -> Result<Vec<(Evolution, PhaseAccumulator)>> {
    let n = driver.n_modes();
    let mut y0 = BogoliubovMatrix::identity(n).to_state();
    y0.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), n));
    let mut ctrl = StepControl::new(opts.tol);
    ctrl.max_step = opts.max_step;
    let mut it = Integrator::new(q_rhs(driver, n), t0, y0, ctrl)?.absolute_from(2 * n * n);
    let limit = opts.drift_factor * opts.tol;
    let mut out = Vec::with_capacity(times.len());
    let mut previous = t0;
    for (index, &t) in times.iter().enumerate() {
        if index > 0 && (t - previous) * (times[0] - t0) < 0.0 {
            return Err(Error::NonMonotonicGrid { index });
        }
        previous = t;
        it.advance_to(t, drift_guard(n, limit))?;
        out.push(q_result(n, t0, t, it.state(), a_diag_at(driver, t)?, it.stats));
    }
    Ok(out)
}
