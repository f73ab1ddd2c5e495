//! Instantaneous eigenproblems `Ô(t)Φ = ω²Φ` on a slice.
//!
//! Modes are normalized so that `∫ dV Φ_n Φ_m* = δ_nm / (2ω_n)`.

mod analytic;
mod fd;
mod tridiag;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{sqrt_det, BoundarySpec, SyncSpacetime};

pub use analytic::AxisKind;

/// Stable mode identifier (one integer per axis for closed-form families, a rank for grid solutions).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeLabel(pub Vec<i64>);

impl ModeLabel {
    pub fn single(n: i64) -> Self {
        ModeLabel(vec![n])
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return write!(f, "{}", self.0[0]);
        }
        let parts: Vec<String> = self.0.iter().map(i64::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Tensor-product quadrature grid on a slice. Weights exclude `√h`.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceGrid {
    dim: usize,
    axes: Vec<Vec<f64>>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SliceGrid {
    pub fn tensor(axes: Vec<Vec<f64>>, axis_weights: Vec<Vec<f64>>) -> Self {
        let dim = axes.len();
        let total: usize = axes.iter().map(Vec::len).product();
        let mut nodes = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut w = 1.0;
            for a in 0..dim {
                let k = rem % axes[a].len();
                rem /= axes[a].len();
                nodes.push(axes[a][k]);
                w *= axis_weights[a][k];
            }
            weights.push(w);
        }
        SliceGrid { dim, axes, nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Coordinate weights times `√det h(t, x_i)`.
    pub fn volume_weights(&self, st: &SyncSpacetime, t: f64) -> Result<Vec<f64>> {
        if st.is_uniform() {
            let d = sqrt_det(st, t, &st.domain().center())?;
            return Ok(self.weights.iter().map(|w| w * d).collect());
        }
        (0..self.len()).map(|i| Ok(self.weights[i] * sqrt_det(st, t, self.point(i))?)).collect()
    }
}

/// How the eigenproblem is solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SpectralMethod {
    /// Closed-form families when the spacetime is uniform, finite differences otherwise.
    #[default]
    Auto,
    FiniteDifference,
}

/// The spatial operator `Ô(t) = -∇²_h + ξR^h + m²` together with solver settings.
#[derive(Clone, Debug)]
pub struct OperatorSpec {
    mass_sq_shift: f64,
    grid_points: usize,
    method: SpectralMethod,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec { mass_sq_shift: 0.0, grid_points: 2048, method: SpectralMethod::Auto }
    }
}

impl OperatorSpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of grid nodes used by the finite-difference path.
    pub fn with_grid_points(mut self, points: usize) -> Self {
        self.grid_points = points;
        self
    }

    pub fn with_method(mut self, method: SpectralMethod) -> Self {
        self.method = method;
        self
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    pub fn method(&self) -> SpectralMethod {
        self.method
    }

    /// Extra `dm²` added to `m²`.
    pub fn mass_sq_shift(&self) -> f64 {
        self.mass_sq_shift
    }

    /// Apply `Ô(t)` to samples on the finite-difference grid of `st`.
    pub fn apply_on_grid(&self, st: &SyncSpacetime, t: f64, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let disc = fd::discretize(self, st, t)?;
        if f.len() != disc.nodes.len() {
            return Err(Error::DimensionMismatch { expected: disc.nodes.len(), found: f.len() });
        }
        Ok(disc.apply(f))
    }

    /// Finite-difference grid nodes and coordinate weights for `st`.
    pub fn fd_grid(&self, st: &SyncSpacetime) -> Result<SliceGrid> {
        if st.dim() != 1 {
            return Err(Error::UnsupportedGeometry("finite-difference grids are one dimensional".into()));
        }
        let (nodes, weights, _) = fd::grid(st, self.grid_points);
        Ok(SliceGrid::tensor(vec![nodes], vec![weights]))
    }
}

/// `m² → m² + dm²`, used to lift a zero mode.
pub fn regularize_zero_mode(op: &OperatorSpec, dm: f64) -> Result<OperatorSpec> {
    if !(dm > 0.0 && dm.is_finite()) {
        return Err(Error::InvalidArgument(format!("mass regularization must be positive, got {dm}")));
    }
    Ok(OperatorSpec { mass_sq_shift: op.mass_sq_shift + dm * dm, ..op.clone() })
}

/// Where the mode functions come from.
#[derive(Clone, Debug)]
pub(crate) enum ModeSource {
    Analytic(Arc<analytic::Family>),
    Grid { dx: f64, periodic: bool },
}

/// Truncated instantaneous eigenbasis at one time slice, ordered by label.
#[derive(Clone, Debug)]
pub struct ModeBasis {
    t: f64,
    labels: Vec<ModeLabel>,
    omegas: Vec<f64>,
    grid: Arc<SliceGrid>,
    volume_weights: Arc<Vec<f64>>,
    samples: Vec<Vec<Complex64>>,
    source: ModeSource,
}

/// Value, gradient and Hessian samples of one mode.
#[derive(Clone, Debug)]
pub struct ModeJets {
    pub value: Vec<Complex64>,
    /// `gradient[i][node]`
    pub gradient: Vec<Vec<Complex64>>,
    /// `hessian[i][j][node]`
    pub hessian: Vec<Vec<Vec<Complex64>>>,
}

impl ModeBasis {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n_modes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.labels
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn grid(&self) -> &SliceGrid {
        &self.grid
    }

    pub fn volume_weights(&self) -> &[f64] {
        &self.volume_weights
    }

    /// Samples of mode `n` at the grid nodes.
    pub fn mode(&self, n: usize) -> &[Complex64] {
        &self.samples[n]
    }

    pub fn modes(&self) -> &[Vec<Complex64>] {
        &self.samples
    }

    pub fn index_of(&self, label: &ModeLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.source, ModeSource::Analytic(_))
    }

    /// `∫ dV f g` with the slice weights (no conjugation).
    pub fn integrate(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        self.volume_weights.iter().zip(f).zip(g).map(|((w, a), b)| a * b * *w).sum()
    }

    /// `∫ dV f g*`.
    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        self.volume_weights.iter().zip(f).zip(g).map(|((w, a), b)| a * b.conj() * *w).sum()
    }

    /// Derivatives of mode `n` at the grid nodes.
    pub fn jets(&self, n: usize) -> ModeJets {
        match &self.source {
            ModeSource::Analytic(family) => {
                let det = self.volume_weights[0] / self.grid.weights()[0];
                family.jets(&self.grid, &self.labels[n], 1.0 / (2.0 * self.omegas[n] * det).sqrt())
            }
            ModeSource::Grid { dx, periodic } => {
                let (d1, d2) = fd::derivatives(&self.samples[n], *dx, *periodic);
                ModeJets { value: self.samples[n].clone(), gradient: vec![d1], hessian: vec![vec![d2]] }
            }
        }
    }

    /// Closed-form `(dΦ_n/dt, dω_n/dt)` for uniform families.
    pub(crate) fn analytic_rates(&self, st: &SyncSpacetime) -> Option<Result<(Vec<Vec<Complex64>>, Vec<f64>)>> {
        match &self.source {
            ModeSource::Analytic(family) => Some(family.rates(st, self)),
            ModeSource::Grid { .. } => None,
        }
    }

    /// Same basis with mode `n` multiplied by the unit-modulus `factors[n]`.
    pub fn rephased(&self, factors: &[Complex64]) -> Result<ModeBasis> {
        if factors.len() != self.n_modes() {
            return Err(Error::DimensionMismatch { expected: self.n_modes(), found: factors.len() });
        }
        let samples = self.samples.iter().zip(factors).map(|(m, f)| m.iter().map(|v| v * f).collect()).collect();
        Ok(ModeBasis { samples, ..self.clone() })
    }

    fn with_modes(&self, labels: Vec<ModeLabel>, omegas: Vec<f64>, samples: Vec<Vec<Complex64>>, source: ModeSource) -> Self {
        ModeBasis { labels, omegas, samples, source, ..self.clone() }
    }
}

/// The `n_modes` lowest eigenpairs at `t`, ordered by label.
pub fn instantaneous_basis(op: &OperatorSpec, st: &SyncSpacetime, t: f64, n_modes: usize) -> Result<ModeBasis> {
    if n_modes == 0 {
        return Err(Error::InvalidArgument("n_modes must be at least 1".into()));
    }
    if use_analytic(op, st) {
        analytic::basis(op, st, t, analytic::Selection::Lowest(n_modes))
    } else {
        fd_basis(op, st, t, n_modes)
    }
}

/// Closed-form basis for an explicit label set (uniform spacetimes only).
pub fn basis_with_labels(op: &OperatorSpec, st: &SyncSpacetime, t: f64, labels: &[ModeLabel]) -> Result<ModeBasis> {
    if !use_analytic(op, st) {
        return Err(Error::UnsupportedGeometry(
            "explicit labels need a closed-form family (uniform diagonal metric, no Robin boundary)".into(),
        ));
    }
    analytic::basis(op, st, t, analytic::Selection::Labels(labels.to_vec()))
}

fn use_analytic(op: &OperatorSpec, st: &SyncSpacetime) -> bool {
    op.method == SpectralMethod::Auto
        && st.is_uniform()
        && !st.has_spatial_curvature()
        && !matches!(st.boundary(), BoundarySpec::Robin(_))
}

fn fd_basis(op: &OperatorSpec, st: &SyncSpacetime, t: f64, n_modes: usize) -> Result<ModeBasis> {
    let disc = fd::discretize(op, st, t)?;
    let sym = disc.symmetric_form();
    if n_modes > sym.len() {
        return Err(Error::InvalidArgument(format!("requested {n_modes} modes from {} unknowns", sym.len())));
    }
    let (lo, hi) = sym.gershgorin();
    let tol = 1e-10 * lo.abs().max(hi.abs());
    let (values, vectors) = sym.lowest(n_modes)?;
    check_spectrum(&values, tol)?;
    let grid = Arc::new(SliceGrid::tensor(vec![disc.nodes.clone()], vec![disc.weights.clone()]));
    let volume_weights: Vec<f64> = {
        let mut w = vec![0.0; disc.nodes.len()];
        for j in 0..disc.unknowns {
            w[disc.first + j] = disc.mass[j];
        }
        if disc.first == 1 {
            let last = disc.nodes.len() - 1;
            w[0] = disc.weights[0] * sqrt_det(st, t, &[disc.nodes[0]])?;
            w[last] = disc.weights[last] * sqrt_det(st, t, &[disc.nodes[last]])?;
        }
        w
    };
    let mut omegas = Vec::with_capacity(n_modes);
    let mut samples = Vec::with_capacity(n_modes);
    for (value, v) in values.iter().zip(&vectors) {
        let omega = value.sqrt();
        let peak = v.iter().fold(0.0_f64, |m, x| if x.abs() > m.abs() * (1.0 + 1e-9) { *x } else { m });
        let sign = if peak < 0.0 { -1.0 } else { 1.0 };
        let scale = sign / (2.0 * omega).sqrt();
        let mut f = vec![Complex64::new(0.0, 0.0); disc.nodes.len()];
        for j in 0..disc.unknowns {
            f[disc.first + j] = Complex64::new(v[j] / disc.mass[j].sqrt() * scale, 0.0);
        }
        omegas.push(omega);
        samples.push(f);
    }
    Ok(ModeBasis {
        t,
        labels: (0..n_modes as i64).map(ModeLabel::single).collect(),
        omegas,
        grid,
        volume_weights: Arc::new(volume_weights),
        samples,
        source: ModeSource::Grid { dx: disc.dx, periodic: disc.periodic },
    })
}

pub(crate) fn check_spectrum(values: &[f64], tol: f64) -> Result<()> {
    for &v in values {
        if v < -tol {
            return Err(Error::NegativeEigenvalue { value: v });
        }
        if v.abs() <= tol {
            return Err(Error::ZeroMode { value: v });
        }
    }
    Ok(())
}

/// Relative gap below which eigenvalues are treated as degenerate.
pub(crate) const DEGENERACY_TOL: f64 = 1e-8;

fn clusters(omegas: &[f64], order: &[usize]) -> Vec<Vec<usize>> {
    let mut sorted = order.to_vec();
    sorted.sort_by(|&a, &b| omegas[a].total_cmp(&omegas[b]).then(a.cmp(&b)));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in sorted {
        match out.last_mut() {
            Some(c) if (omegas[i] - omegas[*c.last().unwrap()]).abs() <= DEGENERACY_TOL * omegas[i].abs() => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    for c in &mut out {
        c.sort_unstable();
    }
    out
}

/// Re-express `next` in the labels and phase convention of `prev`.
///
/// Each eigenspace of `next` is matched to the eigenspace of `prev` it overlaps most.
/// Within it, the previous modes are projected onto the new eigenspace and
/// Gram-Schmidt orthogonalized in label order, which fixes phases and rotations.
pub fn align_basis(prev: &ModeBasis, next: &ModeBasis) -> Result<ModeBasis> {
    if prev.n_modes() != next.n_modes() {
        return Err(Error::DimensionMismatch { expected: prev.n_modes(), found: next.n_modes() });
    }
    if prev.grid.len() != next.grid.len() {
        return Err(Error::DimensionMismatch { expected: prev.grid.len(), found: next.grid.len() });
    }
    let n = prev.n_modes();
    if let (ModeSource::Analytic(_), ModeSource::Analytic(_)) = (&prev.source, &next.source) {
        let mut labels = Vec::with_capacity(n);
        let mut omegas = Vec::with_capacity(n);
        let mut samples = Vec::with_capacity(n);
        for l in &prev.labels {
            let j = next.index_of(l).ok_or(Error::DegeneracyMismatch { from: prev.t, to: next.t })?;
            labels.push(l.clone());
            omegas.push(next.omegas[j]);
            samples.push(next.samples[j].clone());
        }
        return Ok(next.with_modes(labels, omegas, samples, next.source.clone()));
    }
    let overlap = DMatrix::from_fn(n, n, |i, j| next.inner(&next.samples[j], &prev.samples[i]));
    let pnorm: Vec<f64> = (0..n).map(|i| next.inner(&prev.samples[i], &prev.samples[i]).re).collect();
    let nnorm: Vec<f64> = (0..n).map(|j| next.inner(&next.samples[j], &next.samples[j]).re).collect();
    let all: Vec<usize> = (0..n).collect();
    let prev_clusters = clusters(&prev.omegas, &all);
    let next_clusters = clusters(&next.omegas, &all);
    let mismatch = Error::DegeneracyMismatch { from: prev.t, to: next.t };
    let mut assigned: Vec<Option<usize>> = vec![None; next_clusters.len()];
    for (ci, nc) in next_clusters.iter().enumerate() {
        let mut best = (f64::NEG_INFINITY, 0);
        for (pi, pc) in prev_clusters.iter().enumerate() {
            let mass: f64 = pc
                .iter()
                .flat_map(|&i| nc.iter().map(move |&j| (i, j)))
                .map(|(i, j)| overlap[(i, j)].norm_sqr() / (pnorm[i] * nnorm[j]))
                .sum();
            if mass > best.0 {
                best = (mass, pi);
            }
        }
        if prev_clusters[best.1].len() != nc.len() || assigned.contains(&Some(best.1)) {
            return Err(mismatch);
        }
        assigned[ci] = Some(best.1);
    }
    let mut omegas = vec![0.0; n];
    let mut samples = vec![Vec::new(); n];
    for (ci, nc) in next_clusters.iter().enumerate() {
        let pc = &prev_clusters[assigned[ci].unwrap()];
        let mean = nc.iter().map(|&j| next.omegas[j]).sum::<f64>() / nc.len() as f64;
        let mut built: Vec<Vec<Complex64>> = Vec::with_capacity(pc.len());
        for &i in pc {
            let mut v = vec![Complex64::new(0.0, 0.0); next.grid.len()];
            for &j in nc {
                let c = overlap[(i, j)].conj() / nnorm[j];
                for (vk, sk) in v.iter_mut().zip(&next.samples[j]) {
                    *vk += sk * c;
                }
            }
            for b in &built {
                let c = next.inner(&v, b) / next.inner(b, b).re;
                for (vk, bk) in v.iter_mut().zip(b) {
                    *vk -= bk * c;
                }
            }
            let norm = next.inner(&v, &v).re;
            if !(norm > 1e-24 * pnorm[i]) {
                return Err(mismatch);
            }
            let scale = 1.0 / (2.0 * mean * norm).sqrt();
            for vk in v.iter_mut() {
                *vk *= scale;
            }
            built.push(v);
        }
        for (&i, v) in pc.iter().zip(built) {
            omegas[i] = if nc.len() == 1 { next.omegas[nc[0]] } else { mean };
            samples[i] = v;
        }
    }
    Ok(next.with_modes(prev.labels.clone(), omegas, samples, next.source.clone()))
}

/// Largest deviation from Klein-Gordon orthonormality of the basis on the slice `(st, t)`.
pub fn orthonormality_residual(b: &ModeBasis, st: &SyncSpacetime, t: f64) -> Result<f64> {
    let w = b.grid.volume_weights(st, t)?;
    let n = b.n_modes();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let (mut conj, mut plain) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for ((wk, a), c) in w.iter().zip(&b.samples[i]).zip(&b.samples[j]) {
                conj += a * c.conj() * *wk;
                plain += a * c * *wk;
            }
            let delta = if i == j { 1.0 } else { 0.0 };
            worst = worst.max(((b.omegas[i] + b.omegas[j]) * conj - delta).norm());
            worst = worst.max(((b.omegas[i] - b.omegas[j]) * plain).norm());
        }
    }
    Ok(worst)
}
