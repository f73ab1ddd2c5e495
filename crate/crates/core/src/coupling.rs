//! Driving matrices `α̂(t)`, `β̂(t)` of the Bogoliubov evolution.

use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{q_factor, rbar_factor, SyncSpacetime};
use crate::spectral::{align_basis, basis_with_labels, instantaneous_basis, ModeBasis, ModeLabel, OperatorSpec};
use crate::CMatrix;

/// Time derivatives of aligned mode functions and frequencies.
#[derive(Clone, Debug)]
pub struct BasisDerivatives {
    pub t: f64,
    /// `dΦ_n/dt` sampled on the basis grid.
    pub dmodes: Vec<Vec<Complex64>>,
    pub domegas: Vec<f64>,
}

impl BasisDerivatives {
    pub fn zeros(b: &ModeBasis) -> Self {
        BasisDerivatives {
            t: b.t(),
            dmodes: vec![vec![Complex64::new(0.0, 0.0); b.grid().len()]; b.n_modes()],
            domegas: vec![0.0; b.n_modes()],
        }
    }
}

/// A time-indexed family of instantaneous bases.
pub trait BasisFamily: Send + Sync {
    fn spacetime(&self) -> &SyncSpacetime;

    /// Basis at `t` in the family's label and phase convention.
    fn basis_at(&self, t: f64) -> Result<ModeBasis>;

    /// Closed-form derivatives, when the family has them.
    fn analytic_derivatives(&self, _basis: &ModeBasis) -> Option<Result<BasisDerivatives>> {
        None
    }

    /// Characteristic time step for derivative stencils.
    fn default_step(&self, basis: &ModeBasis) -> f64 {
        let w = basis.omegas().iter().copied().fold(f64::INFINITY, f64::min);
        1e-4 * 2.0 * std::f64::consts::PI / w
    }
}

enum Selection {
    Lowest(usize),
    Labels(Vec<ModeLabel>),
}

/// Bases solved on demand from an [`OperatorSpec`], each aligned to the nearest basis already produced.
pub struct InstantaneousFamily {
    op: OperatorSpec,
    st: SyncSpacetime,
    selection: Selection,
    cache: Mutex<Vec<ModeBasis>>,
    use_closed_form: bool,
}

const CACHE_LIMIT: usize = 512;

impl InstantaneousFamily {
    /// The `n_modes` lowest modes, with labels fixed by the basis at `t_ref`.
    pub fn new(op: OperatorSpec, st: SyncSpacetime, n_modes: usize, t_ref: f64) -> Result<Self> {
        let first = instantaneous_basis(&op, &st, t_ref, n_modes)?;
        let selection = if first.is_analytic() {
            Selection::Labels(first.labels().to_vec())
        } else {
            Selection::Lowest(n_modes)
        };
        Ok(InstantaneousFamily { op, st, selection, cache: Mutex::new(vec![first]), use_closed_form: true })
    }

    /// A closed-form family restricted to the given labels.
    pub fn with_labels(op: OperatorSpec, st: SyncSpacetime, labels: Vec<ModeLabel>, t_ref: f64) -> Result<Self> {
        let first = basis_with_labels(&op, &st, t_ref, &labels)?;
        Ok(InstantaneousFamily {
            op,
            st,
            selection: Selection::Labels(first.labels().to_vec()),
            cache: Mutex::new(vec![first]),
            use_closed_form: true,
        })
    }

    /// Ignore closed-form derivatives and always difference the bases.
    pub fn finite_difference_only(mut self) -> Self {
        self.use_closed_form = false;
        self
    }

    pub fn labels(&self) -> Vec<ModeLabel> {
        self.cache.lock().unwrap()[0].labels().to_vec()
    }

    fn solve(&self, t: f64) -> Result<ModeBasis> {
        match &self.selection {
            Selection::Lowest(n) => instantaneous_basis(&self.op, &self.st, t, *n),
            Selection::Labels(l) => basis_with_labels(&self.op, &self.st, t, l),
        }
    }

    /// Basis at `t` aligned directly to `reference`.
    pub fn aligned_to(&self, reference: &ModeBasis, t: f64) -> Result<ModeBasis> {
        align_basis(reference, &self.solve(t)?)
    }
}

impl BasisFamily for InstantaneousFamily {
    fn spacetime(&self) -> &SyncSpacetime {
        &self.st
    }

    fn basis_at(&self, t: f64) -> Result<ModeBasis> {
        let nearest = {
            let cache = self.cache.lock().unwrap();
            if let Some(b) = cache.iter().find(|b| b.t() == t) {
                return Ok(b.clone());
            }
            cache.iter().min_by(|a, b| (a.t() - t).abs().total_cmp(&(b.t() - t).abs())).unwrap().clone()
        };
        let aligned = align_basis(&nearest, &self.solve(t)?)?;
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= CACHE_LIMIT {
            cache.drain(1..CACHE_LIMIT / 2);
        }
        cache.push(aligned.clone());
        Ok(aligned)
    }

    fn analytic_derivatives(&self, basis: &ModeBasis) -> Option<Result<BasisDerivatives>> {
        if !self.use_closed_form {
            return None;
        }
        basis.analytic_rates(&self.st).map(|r| {
            r.map(|(dmodes, domegas)| BasisDerivatives { t: basis.t(), dmodes, domegas })
        })
    }
}

impl<F: BasisFamily + ?Sized> BasisFamily for Arc<F> {
    fn spacetime(&self) -> &SyncSpacetime {
        (**self).spacetime()
    }
    fn basis_at(&self, t: f64) -> Result<ModeBasis> {
        (**self).basis_at(t)
    }
    fn analytic_derivatives(&self, basis: &ModeBasis) -> Option<Result<BasisDerivatives>> {
        (**self).analytic_derivatives(basis)
    }
    fn default_step(&self, basis: &ModeBasis) -> f64 {
        (**self).default_step(basis)
    }
}

/// Stencil used when differencing bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Stencil {
    /// Second-order central difference.
    #[default]
    Central,
    /// Fourth-order Richardson combination of two central differences.
    Richardson,
}

/// Options for [`basis_derivatives`].
#[derive(Clone, Copy, Debug, Default)]
pub struct DerivativeOptions {
    /// Step; `None` uses the family default.
    pub dt: Option<f64>,
    pub stencil: Stencil,
    /// Skip closed-form derivatives even if the family offers them.
    pub force_differences: bool,
}

/// `dΦ_n/dt` and `dω_n/dt` at the time of `basis`.
pub fn basis_derivatives(
    family: &dyn BasisFamily,
    basis: &ModeBasis,
    opts: DerivativeOptions,
) -> Result<BasisDerivatives> {
    if !opts.force_differences {
        if let Some(d) = family.analytic_derivatives(basis) {
            return d;
        }
    }
    let dt = opts.dt.unwrap_or_else(|| family.default_step(basis));
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("derivative step must be positive, got {dt}")));
    }
    let t = basis.t();
    let central = |h: f64| -> Result<(Vec<Vec<Complex64>>, Vec<f64>)> {
        let plus = align_basis(basis, &family.basis_at(t + h)?)?;
        let minus = align_basis(basis, &family.basis_at(t - h)?)?;
        let dmodes = (0..basis.n_modes())
            .map(|n| plus.mode(n).iter().zip(minus.mode(n)).map(|(p, m)| (p - m) / (2.0 * h)).collect())
            .collect();
        let domegas = plus.omegas().iter().zip(minus.omegas()).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        Ok((dmodes, domegas))
    };
    let (dmodes, domegas) = match opts.stencil {
        Stencil::Central => central(dt)?,
        Stencil::Richardson => {
            let (fine_m, fine_w) = central(dt)?;
            let (coarse_m, coarse_w) = central(2.0 * dt)?;
            let dmodes = fine_m
                .iter()
                .zip(&coarse_m)
                .map(|(f, c)| f.iter().zip(c).map(|(a, b)| (a * 4.0 - b) / 3.0).collect())
                .collect();
            let domegas = fine_w.iter().zip(&coarse_w).map(|(a, b)| (4.0 * a - b) / 3.0).collect();
            (dmodes, domegas)
        }
    };
    Ok(BasisDerivatives { t, dmodes, domegas })
}

/// `α̂(t)`, `β̂(t)` together with their symmetry diagnostics.
#[derive(Clone, Debug)]
pub struct CouplingMatrices {
    pub t: f64,
    pub alpha_hat: CMatrix,
    pub beta_hat: CMatrix,
    /// Largest single contribution summed into any entry; sets the scale of rounding noise.
    pub term_scale: f64,
}

impl CouplingMatrices {
    pub fn zeros(t: f64, n: usize) -> Self {
        CouplingMatrices { t, alpha_hat: CMatrix::zeros(n, n), beta_hat: CMatrix::zeros(n, n), term_scale: 0.0 }
    }

    /// `max|α̂ + α̂†|`.
    pub fn alpha_residual(&self) -> f64 {
        (&self.alpha_hat + self.alpha_hat.adjoint()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `max|β̂ - β̂ᵀ|`.
    pub fn beta_residual(&self) -> f64 {
        (&self.beta_hat - self.beta_hat.transpose()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest real part on the diagonal of `α̂`, which should vanish.
    pub fn diagonal_health(&self) -> f64 {
        self.alpha_hat.diagonal().iter().fold(0.0, |m, z| m.max(z.re.abs()))
    }

    /// Largest entry of either matrix, or of the contributions to them if larger.
    pub fn magnitude(&self) -> f64 {
        self.alpha_hat.iter().chain(self.beta_hat.iter()).fold(self.term_scale, |m, z| m.max(z.norm()))
    }

    /// Both symmetry residuals relative to [`Self::magnitude`].
    pub fn relative_residuals(&self) -> (f64, f64) {
        let s = self.magnitude();
        let rel = |r: f64| if s > 0.0 { r / s } else { r };
        (rel(self.alpha_residual()), rel(self.beta_residual()))
    }
}

/// Relative tolerance of the symmetry check in [`coupling_matrices`].
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-6;

/// Assemble `α̂`, `β̂` from a normalized basis and its derivatives.
pub fn coupling_matrices(
    st: &SyncSpacetime,
    basis: &ModeBasis,
    derivs: &BasisDerivatives,
    symmetry_tol: f64,
) -> Result<CouplingMatrices> {
    let n = basis.n_modes();
    if derivs.dmodes.len() != n || derivs.domegas.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: derivs.dmodes.len() });
    }
    let t = basis.t();
    let grid = basis.grid();
    let (q, rbar) = slice_factors(st, basis)?;
    let xi = st.coupling();
    let w = basis.omegas();
    let weights = basis.volume_weights();
    let c0 = Complex64::new(0.0, 0.0);
    let mut alpha = CMatrix::zeros(n, n);
    let mut beta = CMatrix::zeros(n, n);
    let mut term_scale = 0.0_f64;
    for a in 0..n {
        let fa = basis.mode(a);
        let da = &derivs.dmodes[a];
        for b in 0..n {
            let fb = basis.mode(b);
            let (mut d_conj, mut d_plain, mut g_conj, mut g_plain, mut plain) = (c0, c0, c0, c0, c0);
            for k in 0..grid.len() {
                let wk = weights[k];
                if wk == 0.0 {
                    continue;
                }
                let g = Complex64::new(w[a] * q.at(k), xi * rbar.at(k));
                let fbc = fb[k].conj();
                d_conj += da[k] * fbc * wk;
                d_plain += da[k] * fb[k] * wk;
                g_conj += fa[k] * g * fbc * wk;
                g_plain += fa[k] * g * fb[k] * wk;
                plain += fa[k] * fb[k] * wk;
            }
            let terms = [
                d_conj * (w[a] + w[b]),
                g_conj,
                Complex64::new(if a == b { derivs.domegas[a] / (2.0 * w[a]) } else { 0.0 }, 0.0),
                d_plain * (w[b] - w[a]),
                -g_plain,
                -plain * derivs.domegas[a],
            ];
            term_scale = terms.iter().fold(term_scale, |m, z| m.max(z.norm()));
            alpha[(a, b)] = terms[0] + terms[1] + terms[2];
            beta[(a, b)] = terms[3] + terms[4] + terms[5];
        }
    }
    let out = CouplingMatrices { t, alpha_hat: alpha, beta_hat: beta, term_scale };
    let (ra, rb) = out.relative_residuals();
    let residual = ra.max(rb);
    if residual > symmetry_tol {
        return Err(Error::SymmetryViolation { t, residual, tolerance: symmetry_tol });
    }
    Ok(out)
}

enum Samples {
    Constant(f64),
    Nodes(Vec<f64>),
}

impl Samples {
    fn at(&self, k: usize) -> f64 {
        match self {
            Samples::Constant(v) => *v,
            Samples::Nodes(v) => v[k],
        }
    }
}

fn slice_factors(st: &SyncSpacetime, basis: &ModeBasis) -> Result<(Samples, Samples)> {
    let t = basis.t();
    let need_rbar = st.coupling() != 0.0;
    if st.is_uniform() {
        let c = st.domain().center();
        let r = if need_rbar { rbar_factor(st, t, &c)? } else { 0.0 };
        return Ok((Samples::Constant(q_factor(st, t, &c)?), Samples::Constant(r)));
    }
    let g = basis.grid();
    let q = (0..g.len()).map(|k| q_factor(st, t, g.point(k))).collect::<Result<Vec<_>>>()?;
    let r = if need_rbar {
        Samples::Nodes((0..g.len()).map(|k| rbar_factor(st, t, g.point(k))).collect::<Result<Vec<_>>>()?)
    } else {
        Samples::Constant(0.0)
    };
    Ok((Samples::Nodes(q), r))
}

/// Coupling matrices straight from a family at time `t`.
pub fn coupling_at(family: &dyn BasisFamily, t: f64, opts: DerivativeOptions, symmetry_tol: f64) -> Result<(ModeBasis, CouplingMatrices)> {
    let basis = family.basis_at(t)?;
    let d = basis_derivatives(family, &basis, opts)?;
    let c = coupling_matrices(family.spacetime(), &basis, &d, symmetry_tol)?;
    Ok((basis, c))
}
