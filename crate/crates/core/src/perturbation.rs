//! First-order response to a small, separable perturbation of a static slice.
//!
//! A perturbation is a sum of terms, each a time profile times a spatial
//! part. The resulting couplings keep that shape, so Fourier amplitudes at
//! the channel frequencies `ω_n ± ω_m` are read off directly for periodic
//! profiles and computed in closed form or by quadrature otherwise.
//!
//! Fourier transforms use the unitary angular convention
//! `F[f](ν) = (2π)^{-1/2} ∫ f(t) e^{-iνt} dt`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::evolution::BogoliubovMatrix;
use crate::geometry::PointFunction;
use crate::quadrature::oscillatory_integrals;
use crate::spectral::{ModeBasis, ModeJets, ModeLabel, DEGENERACY_TOL};
use crate::{CMatrix, Complex64, Error, Result, Warning};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// One periodic component `amplitude · e^{i frequency t}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Harmonic {
    pub frequency: f64,
    pub amplitude: Complex64,
}

/// Time dependence of one perturbation term.
#[derive(Clone)]
pub enum TimeProfile {
    /// A finite sum of complex exponentials.
    Harmonics(Vec<Harmonic>),
    /// `e^{-t²/τ²} sin(Ωt)`.
    GaussianSinusoid { omega: f64, tau: f64 },
    /// An arbitrary function that vanishes outside `support`.
    Transient { f: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>, support: (f64, f64), bandwidth: f64 },
}

impl fmt::Debug for TimeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeProfile::Harmonics(h) => f.debug_tuple("Harmonics").field(h).finish(),
            TimeProfile::GaussianSinusoid { omega, tau } => {
                f.debug_struct("GaussianSinusoid").field("omega", omega).field("tau", tau).finish()
            }
            TimeProfile::Transient { support, bandwidth, .. } => {
                f.debug_struct("Transient").field("support", support).field("bandwidth", bandwidth).finish()
            }
        }
    }
}

impl TimeProfile {
    pub fn constant() -> Self {
        TimeProfile::Harmonics(vec![Harmonic { frequency: 0.0, amplitude: Complex64::new(1.0, 0.0) }])
    }

    /// `sin(ωt)`.
    pub fn sine(omega: f64) -> Self {
        let c = Complex64::new(0.0, -0.5);
        TimeProfile::Harmonics(vec![Harmonic { frequency: omega, amplitude: c }, Harmonic { frequency: -omega, amplitude: -c }])
    }

    /// `cos(ωt)`.
    pub fn cosine(omega: f64) -> Self {
        let c = Complex64::new(0.5, 0.0);
        TimeProfile::Harmonics(vec![Harmonic { frequency: omega, amplitude: c }, Harmonic { frequency: -omega, amplitude: c }])
    }

    pub fn exponential(frequency: f64, amplitude: Complex64) -> Self {
        TimeProfile::Harmonics(vec![Harmonic { frequency, amplitude }])
    }

    pub fn gaussian_sine(omega: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidArgument(format!("gaussian envelope needs tau > 0, got {tau}")));
        }
        Ok(TimeProfile::GaussianSinusoid { omega, tau })
    }

    /// A profile known only by its values; `bandwidth` bounds its spectral content.
    pub fn transient(f: impl Fn(f64) -> Complex64 + Send + Sync + 'static, support: (f64, f64), bandwidth: f64) -> Result<Self> {
        if !(support.1 > support.0) {
            return Err(Error::InvalidArgument("transient support must be a non-empty interval".into()));
        }
        Ok(TimeProfile::Transient { f: Arc::new(f), support, bandwidth: bandwidth.abs() })
    }

    pub fn value(&self, t: f64) -> Complex64 {
        match self {
            TimeProfile::Harmonics(h) => h.iter().map(|c| c.amplitude * Complex64::from_polar(1.0, c.frequency * t)).sum(),
            TimeProfile::GaussianSinusoid { omega, tau } => Complex64::new((-(t / tau).powi(2)).exp() * (omega * t).sin(), 0.0),
            TimeProfile::Transient { f, support, .. } => {
                if t < support.0 || t > support.1 {
                    ZERO
                } else {
                    f(t)
                }
            }
        }
    }

    /// Time derivative, available for periodic profiles.
    pub fn derivative(&self) -> Option<TimeProfile> {
        match self {
            TimeProfile::Harmonics(h) => Some(TimeProfile::Harmonics(
                h.iter()
                    .filter(|c| c.frequency != 0.0)
                    .map(|c| Harmonic { frequency: c.frequency, amplitude: c.amplitude * I * c.frequency })
                    .collect(),
            )),
            _ => None,
        }
    }

    pub fn is_decaying(&self) -> bool {
        !matches!(self, TimeProfile::Harmonics(h) if !h.is_empty())
    }

    /// Periodic components, or the carrier of a Gaussian packet.
    pub fn components(&self) -> Vec<Harmonic> {
        match self {
            TimeProfile::Harmonics(h) => h.clone(),
            TimeProfile::GaussianSinusoid { omega, .. } => match TimeProfile::sine(*omega) {
                TimeProfile::Harmonics(h) => h,
                _ => unreachable!(),
            },
            TimeProfile::Transient { .. } => Vec::new(),
        }
    }

    /// Largest characteristic angular frequency.
    pub fn dominant_frequency(&self) -> f64 {
        match self {
            TimeProfile::Harmonics(h) => h.iter().fold(0.0, |m, c| m.max(c.frequency.abs())),
            TimeProfile::GaussianSinusoid { omega, .. } => omega.abs(),
            TimeProfile::Transient { bandwidth, .. } => *bandwidth,
        }
    }

    /// Unitary Fourier transform at angular frequency `nu`.
    pub fn fourier(&self, nu: f64) -> Result<Complex64> {
        match self {
            TimeProfile::Harmonics(h) if h.is_empty() => Ok(ZERO),
            TimeProfile::Harmonics(_) => Err(Error::NonDecayingProfile),
            TimeProfile::GaussianSinusoid { omega, tau } => {
                let g = |d: f64| (-(d * tau).powi(2) / 4.0).exp();
                let bracket = g(nu - omega) - g(nu + omega);
                Ok(Complex64::new(0.0, -0.5) * (PI.sqrt() * tau * bracket / (2.0 * PI).sqrt()))
            }
            TimeProfile::Transient { .. } => Ok(self.windowed(&[nu], f64::NEG_INFINITY, f64::INFINITY)[0] / (2.0 * PI).sqrt()),
        }
    }

    /// `∫_{t0}^{tf} f(t) e^{-iνt} dt` for each `ν`.
    pub fn windowed(&self, nus: &[f64], t0: f64, tf: f64) -> Vec<Complex64> {
        let (a, b, sign) = if tf >= t0 { (t0, tf, 1.0) } else { (tf, t0, -1.0) };
        match self {
            TimeProfile::Harmonics(h) => nus
                .iter()
                .map(|&nu| h.iter().map(|c| c.amplitude * exp_integral(c.frequency - nu, a, b)).sum::<Complex64>() * sign)
                .collect(),
            TimeProfile::GaussianSinusoid { omega, tau } => {
                let (a, b) = (a.max(-12.0 * tau), b.min(12.0 * tau));
                if a >= b {
                    return vec![ZERO; nus.len()];
                }
                let bw = omega.abs() + 4.0 / tau;
                oscillatory_integrals(|t| self.value(t), a, b, nus, bw).into_iter().map(|z| z * sign).collect()
            }
            TimeProfile::Transient { support, bandwidth, .. } => {
                let (a, b) = (a.max(support.0), b.min(support.1));
                if a >= b {
                    return vec![ZERO; nus.len()];
                }
                oscillatory_integrals(|t| self.value(t), a, b, nus, *bandwidth).into_iter().map(|z| z * sign).collect()
            }
        }
    }
}

/// `∫_a^b e^{iδt} dt` without cancellation for small `δ`.
fn exp_integral(delta: f64, a: f64, b: f64) -> Complex64 {
    let half = 0.5 * delta * (b - a);
    let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
    Complex64::from_polar((b - a) * sinc, 0.5 * delta * (a + b))
}

/// A linear second-order differential operator with coefficients fixed in time:
/// `L f = Σ a_ij ∂_i∂_j f + Σ b_i ∂_i f + V f`.
#[derive(Clone, Default)]
pub struct SpatialOperator {
    second: Option<Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>>,
    first: Option<Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>>,
    potential: Option<PointFunction>,
}

impl fmt::Debug for SpatialOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialOperator")
            .field("second", &self.second.is_some())
            .field("first", &self.first.is_some())
            .field("potential", &self.potential.is_some())
            .finish()
    }
}

impl SpatialOperator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn second_order(mut self, a: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.second = Some(Arc::new(a));
        self
    }

    pub fn constant_second_order(self, a: DMatrix<f64>) -> Self {
        self.second_order(move |_| a.clone())
    }

    pub fn first_order(mut self, b: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.first = Some(Arc::new(b));
        self
    }

    pub fn potential(mut self, v: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.potential = Some(Arc::new(v));
        self
    }

    /// First-order change of `-h^{ij}∂_i∂_j` under `h0 → h0 + δh` with `δh` uniform.
    pub fn from_uniform_metric(h0: &DMatrix<f64>, delta_h: &DMatrix<f64>) -> Result<Self> {
        let inv = h0.clone().try_inverse().ok_or(Error::SingularMetric { t: 0.0 })?;
        Ok(Self::new().constant_second_order(&inv * delta_h * &inv))
    }

    /// Applies the operator to a mode given by its jets on `basis`'s grid.
    pub fn apply(&self, basis: &ModeBasis, jets: &ModeJets) -> Result<Vec<Complex64>> {
        let grid = basis.grid();
        let dim = jets.gradient.len();
        let mut out = vec![ZERO; jets.value.len()];
        for (p, o) in out.iter_mut().enumerate() {
            let x = grid.point(p);
            if let Some(a) = &self.second {
                let a = a(x);
                if a.nrows() != dim || a.ncols() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: a.nrows() });
                }
                for i in 0..dim {
                    for j in 0..dim {
                        *o += jets.hessian[i][j][p] * a[(i, j)];
                    }
                }
            }
            if let Some(b) = &self.first {
                let b = b(x);
                for i in 0..dim {
                    *o += jets.gradient[i][p] * b[i];
                }
            }
            if let Some(v) = &self.potential {
                *o += jets.value[p] * v(x);
            }
        }
        Ok(out)
    }
}

/// First-order eigen-data `(δΦ_n, δω_n)` sampled on a basis grid.
#[derive(Clone, Debug)]
pub struct PerturbedModes {
    pub delta_omegas: Vec<f64>,
    /// `None` means the shapes do not change at first order.
    pub delta_modes: Option<Vec<Vec<Complex64>>>,
}

impl PerturbedModes {
    pub fn frequencies_only(delta_omegas: Vec<f64>) -> Self {
        PerturbedModes { delta_omegas, delta_modes: None }
    }

    /// Standard first-order perturbation theory inside the truncated basis.
    /// Degenerate partners are skipped, so the basis should diagonalize the
    /// perturbation within each eigenspace.
    pub fn first_order(basis: &ModeBasis, op: &SpatialOperator) -> Result<Self> {
        let n = basis.n_modes();
        let w = basis.omegas();
        let applied: Vec<Vec<Complex64>> = (0..n).map(|k| op.apply(basis, &basis.jets(k))).collect::<Result<_>>()?;
        let norms: Vec<f64> = (0..n).map(|k| basis.inner(basis.mode(k), basis.mode(k)).re).collect();
        let mut delta_omegas = Vec::with_capacity(n);
        let mut delta_modes = Vec::with_capacity(n);
        for a in 0..n {
            delta_omegas.push(basis.inner(&applied[a], basis.mode(a)).re / norms[a] / (2.0 * w[a]));
            let mut shape = vec![ZERO; basis.grid().len()];
            for b in 0..n {
                let gap = w[a] * w[a] - w[b] * w[b];
                if b == a || (w[a] - w[b]).abs() <= DEGENERACY_TOL * w[a] {
                    continue;
                }
                let c = basis.inner(&applied[a], basis.mode(b)) / (gap * norms[b]);
                for (s, v) in shape.iter_mut().zip(basis.mode(b)) {
                    *s += c * v;
                }
            }
            delta_modes.push(shape);
        }
        Ok(PerturbedModes { delta_omegas, delta_modes: Some(delta_modes) })
    }
}

/// One separable piece of a perturbation.
#[derive(Clone)]
pub struct PerturbationTerm {
    profile: TimeProfile,
    metric: Option<DMatrix<f64>>,
    operator: Option<SpatialOperator>,
    q: Option<PointFunction>,
    rbar: Option<PointFunction>,
    modes: Option<PerturbedModes>,
}

impl fmt::Debug for PerturbationTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbationTerm")
            .field("profile", &self.profile)
            .field("metric", &self.metric)
            .field("operator", &self.operator)
            .field("q", &self.q.is_some())
            .field("rbar", &self.rbar.is_some())
            .field("modes", &self.modes)
            .finish()
    }
}

impl PerturbationTerm {
    pub fn new(profile: TimeProfile) -> Self {
        PerturbationTerm { profile, metric: None, operator: None, q: None, rbar: None, modes: None }
    }

    pub fn profile(&self) -> &TimeProfile {
        &self.profile
    }

    /// Spatial part of `δh_ij`, recorded for reference.
    pub fn metric(mut self, delta_h: DMatrix<f64>) -> Self {
        self.metric = Some(delta_h);
        self
    }

    pub fn operator(mut self, op: SpatialOperator) -> Self {
        self.operator = Some(op);
        self
    }

    pub fn q(mut self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.q = Some(Arc::new(f));
        self
    }

    pub fn rbar(mut self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.rbar = Some(Arc::new(f));
        self
    }

    pub fn modes(mut self, modes: PerturbedModes) -> Self {
        self.modes = Some(modes);
        self
    }

    fn changes_operator(&self) -> bool {
        self.operator.is_some() || self.metric.is_some()
    }
}

/// `h(t) = h0 + ε Σ f_k(t) δh_k` together with the derived slice quantities.
#[derive(Clone, Debug)]
pub struct PerturbationSpec {
    epsilon: f64,
    coupling: f64,
    terms: Vec<PerturbationTerm>,
}

impl PerturbationSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidArgument(format!("epsilon must be finite and non-negative, got {epsilon}")));
        }
        Ok(PerturbationSpec { epsilon, coupling: 0.0, terms: Vec::new() })
    }

    /// Curvature coupling `ξ` multiplying `δR̄`.
    pub fn with_coupling(mut self, xi: f64) -> Self {
        self.coupling = xi;
        self
    }

    pub fn term(mut self, term: PerturbationTerm) -> Self {
        self.terms.push(term);
        self
    }

    /// A uniform metric perturbation `ε f(t) δh` on the constant metric `h0`.
    /// A trace part adds the matching `δq`, which needs a periodic profile.
    pub fn from_uniform_metric(epsilon: f64, h0: &DMatrix<f64>, delta_h: DMatrix<f64>, profile: TimeProfile) -> Result<Self> {
        let op = SpatialOperator::from_uniform_metric(h0, &delta_h)?;
        let inv = h0.clone().try_inverse().ok_or(Error::SingularMetric { t: 0.0 })?;
        let trace = (&inv * &delta_h).trace();
        let size = delta_h.norm();
        let mut spec = Self::new(epsilon)?.term(PerturbationTerm::new(profile.clone()).metric(delta_h).operator(op));
        if trace.abs() > 1e-14 * size {
            let rate = profile.derivative().ok_or_else(|| {
                Error::InvalidArgument("a metric perturbation with a trace needs a periodic profile".into())
            })?;
            spec = spec.term(PerturbationTerm::new(rate).q(move |_| 0.5 * trace));
        }
        Ok(spec)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn terms(&self) -> &[PerturbationTerm] {
        &self.terms
    }

    pub fn terms_mut(&mut self) -> &mut [PerturbationTerm] {
        &mut self.terms
    }

    /// `δh(t)` for terms that recorded a metric, `None` if none did.
    pub fn delta_metric(&self, t: f64) -> Option<DMatrix<Complex64>> {
        self.terms.iter().filter_map(|k| k.metric.as_ref().map(|m| (k, m))).fold(None, |acc, (k, m)| {
            let v = m.map(|x| Complex64::new(x, 0.0)) * k.profile.value(t);
            Some(match acc {
                None => v,
                Some(a) => a + v,
            })
        })
    }

    /// Slice multiplier `ω δq + iξ δR̄` for mode frequency `w`, per node.
    fn slice_factor(&self, term: &PerturbationTerm, basis: &ModeBasis) -> Option<Vec<(f64, f64)>> {
        if term.q.is_none() && (term.rbar.is_none() || self.coupling == 0.0) {
            return None;
        }
        let grid = basis.grid();
        Some(
            (0..grid.len())
                .map(|p| {
                    let x = grid.point(p);
                    let q = term.q.as_ref().map_or(0.0, |f| f(x));
                    let r = term.rbar.as_ref().map_or(0.0, |f| self.coupling * f(x));
                    (q, r)
                })
                .collect(),
        )
    }
}

/// `δα̂(t) = Σ_k f_k(t) A_k`, `δβ̂(t) = Σ_k f_k(t) B_k`, with `ε` factored out.
#[derive(Clone, Debug)]
pub struct DeltaTerm {
    pub profile: TimeProfile,
    pub alpha: CMatrix,
    pub beta: CMatrix,
}

#[derive(Clone, Debug)]
pub struct DeltaCoupling {
    epsilon: f64,
    n_modes: usize,
    terms: Vec<DeltaTerm>,
}

impl DeltaCoupling {
    pub fn new(epsilon: f64, n_modes: usize, terms: Vec<DeltaTerm>) -> Result<Self> {
        for t in &terms {
            for m in [&t.alpha, &t.beta] {
                if m.nrows() != n_modes || m.ncols() != n_modes {
                    return Err(Error::DimensionMismatch { expected: n_modes, found: m.nrows() });
                }
            }
        }
        Ok(DeltaCoupling { epsilon, n_modes, terms })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn terms(&self) -> &[DeltaTerm] {
        &self.terms
    }

    /// `(δα̂(t), δβ̂(t))`.
    pub fn at(&self, t: f64) -> (CMatrix, CMatrix) {
        let n = self.n_modes;
        self.terms.iter().fold((CMatrix::zeros(n, n), CMatrix::zeros(n, n)), |(a, b), term| {
            let f = term.profile.value(t);
            (a + &term.alpha * f, b + &term.beta * f)
        })
    }

    /// Adds the time-dependent couplings of another delta with the same modes.
    pub fn plus(&self, other: &DeltaCoupling) -> Result<DeltaCoupling> {
        if other.n_modes != self.n_modes {
            return Err(Error::DimensionMismatch { expected: self.n_modes, found: other.n_modes });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        DeltaCoupling::new(self.epsilon, self.n_modes, terms)
    }

    fn scale(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| {
                let amp = t.profile.components().iter().fold(1.0_f64, |m, c| m.max(c.amplitude.norm()));
                t.alpha.iter().chain(t.beta.iter()).map(move |z| z.norm() * amp)
            })
            .fold(0.0, f64::max)
    }

    fn check(&self, basis: &ModeBasis) -> Result<()> {
        if basis.n_modes() != self.n_modes {
            return Err(Error::DimensionMismatch { expected: self.n_modes, found: basis.n_modes() });
        }
        Ok(())
    }
}

fn check_samples(basis: &ModeBasis, len: usize, what: &str) -> Result<()> {
    if len != basis.grid().len() {
        return Err(Error::MissingPerturbedModes(format!("{what} has {len} samples, grid has {}", basis.grid().len())));
    }
    Ok(())
}

/// Couplings from the first-order eigen-data of each term.
pub fn delta_coupling_from_modes(basis: &ModeBasis, spec: &PerturbationSpec) -> Result<DeltaCoupling> {
    let n = basis.n_modes();
    let w = basis.omegas();
    let mut terms = Vec::new();
    if spec.epsilon == 0.0 {
        return DeltaCoupling::new(0.0, n, terms);
    }
    for (k, term) in spec.terms.iter().enumerate() {
        let mut alpha = CMatrix::zeros(n, n);
        let mut beta = CMatrix::zeros(n, n);
        match &term.modes {
            Some(pm) => {
                if pm.delta_omegas.len() != n {
                    return Err(Error::MissingPerturbedModes(format!(
                        "term {k} has {} frequency shifts for {n} modes",
                        pm.delta_omegas.len()
                    )));
                }
                if let Some(shapes) = &pm.delta_modes {
                    if shapes.len() != n {
                        return Err(Error::MissingPerturbedModes(format!("term {k} has {} mode shapes for {n} modes", shapes.len())));
                    }
                    for (a, shape) in shapes.iter().enumerate() {
                        check_samples(basis, shape.len(), "a perturbed mode")?;
                        for b in 0..n {
                            let gap = w[a] * w[a] - w[b] * w[b];
                            alpha[(a, b)] += I * gap * basis.inner(shape, basis.mode(b));
                            beta[(a, b)] -= I * gap * basis.integrate(shape, basis.mode(b));
                        }
                    }
                }
                for a in 0..n {
                    let shift = 2.0 * w[a] * pm.delta_omegas[a];
                    if shift != 0.0 {
                        for b in 0..n {
                            beta[(a, b)] -= I * shift * basis.integrate(basis.mode(a), basis.mode(b));
                        }
                    }
                }
            }
            None if term.changes_operator() => {
                return Err(Error::MissingPerturbedModes(format!("term {k} changes the operator but has no eigen-data")));
            }
            None => {}
        }
        add_slice_terms(spec, term, basis, &mut alpha, &mut beta);
        terms.push(DeltaTerm { profile: term.profile.clone(), alpha, beta });
    }
    DeltaCoupling::new(spec.epsilon, n, terms)
}

/// Couplings from the static modes and the operator change alone.
pub fn delta_coupling_operator_form(basis: &ModeBasis, spec: &PerturbationSpec) -> Result<DeltaCoupling> {
    let n = basis.n_modes();
    let mut terms = Vec::new();
    if spec.epsilon == 0.0 {
        return DeltaCoupling::new(0.0, n, terms);
    }
    for (k, term) in spec.terms.iter().enumerate() {
        let mut alpha = CMatrix::zeros(n, n);
        let mut beta = CMatrix::zeros(n, n);
        match &term.operator {
            Some(op) => {
                for a in 0..n {
                    let applied = op.apply(basis, &basis.jets(a))?;
                    for b in 0..n {
                        alpha[(a, b)] += I * basis.inner(&applied, basis.mode(b));
                        beta[(a, b)] -= I * basis.integrate(&applied, basis.mode(b));
                    }
                }
            }
            None if term.metric.is_some() => {
                return Err(Error::MissingPerturbedModes(format!("term {k} records a metric change but no operator")));
            }
            None => {}
        }
        add_slice_terms(spec, term, basis, &mut alpha, &mut beta);
        terms.push(DeltaTerm { profile: term.profile.clone(), alpha, beta });
    }
    DeltaCoupling::new(spec.epsilon, n, terms)
}

fn add_slice_terms(spec: &PerturbationSpec, term: &PerturbationTerm, basis: &ModeBasis, alpha: &mut CMatrix, beta: &mut CMatrix) {
    let Some(factors) = spec.slice_factor(term, basis) else { return };
    let n = basis.n_modes();
    for a in 0..n {
        let wa = basis.omegas()[a];
        let weighted: Vec<Complex64> =
            basis.mode(a).iter().zip(&factors).map(|(v, (q, r))| v * Complex64::new(wa * q, *r)).collect();
        for b in 0..n {
            alpha[(a, b)] += basis.inner(&weighted, basis.mode(b));
            beta[(a, b)] -= basis.integrate(&weighted, basis.mode(b));
        }
    }
}

/// First-order coefficients with any attached warnings.
#[derive(Clone, Debug)]
pub struct FirstOrder {
    pub matrix: BogoliubovMatrix,
    pub warnings: Vec<Warning>,
}

/// `α_nm = ε∫ e^{-i(ω_n-ω_m)t} δα̂_nm`, `β_nm = ε∫ e^{-i(ω_n+ω_m)t} δβ̂_nm` over `[t0, tf]`.
pub fn window_coefficients(dc: &DeltaCoupling, basis: &ModeBasis, t0: f64, tf: f64) -> Result<FirstOrder> {
    dc.check(basis)?;
    let n = dc.n_modes;
    let w = basis.omegas();
    let mut alpha = CMatrix::identity(n, n);
    let mut beta = CMatrix::zeros(n, n);
    let mut freqs = Vec::with_capacity(2 * n * n);
    for a in 0..n {
        for b in 0..n {
            freqs.push(w[a] - w[b]);
            freqs.push(w[a] + w[b]);
        }
    }
    let eps = Complex64::new(dc.epsilon, 0.0);
    for term in &dc.terms {
        let integrals = term.profile.windowed(&freqs, t0, tf);
        for a in 0..n {
            for b in 0..n {
                let idx = 2 * (a * n + b);
                if a != b {
                    alpha[(a, b)] += eps * term.alpha[(a, b)] * integrals[idx];
                }
                beta[(a, b)] += eps * term.beta[(a, b)] * integrals[idx + 1];
            }
        }
    }
    let omega_p = dc.terms.iter().fold(0.0_f64, |m, t| m.max(t.profile.dominant_frequency()));
    let omega_dt = omega_p * (tf - t0).abs();
    let mut warnings = Vec::new();
    if omega_p > 0.0 && (omega_dt < 10.0 || dc.epsilon * omega_dt > 0.1) {
        warnings.push(Warning::WindowViolation { omega_dt, epsilon: dc.epsilon });
    }
    Ok(FirstOrder { matrix: BogoliubovMatrix { alpha, beta }, warnings })
}

/// Coefficients between the asymptotic past and future, through Fourier transforms.
pub fn asymptotic_coefficients(dc: &DeltaCoupling, basis: &ModeBasis) -> Result<BogoliubovMatrix> {
    dc.check(basis)?;
    let n = dc.n_modes;
    let w = basis.omegas();
    let mut alpha = CMatrix::identity(n, n);
    let mut beta = CMatrix::zeros(n, n);
    let factor = dc.epsilon * (2.0 * PI).sqrt();
    for term in &dc.terms {
        if !term.profile.is_decaying() {
            return Err(Error::NonDecayingProfile);
        }
        for a in 0..n {
            for b in 0..n {
                if a != b && term.alpha[(a, b)] != ZERO {
                    alpha[(a, b)] += term.alpha[(a, b)] * term.profile.fourier(w[a] - w[b])? * factor;
                }
                if term.beta[(a, b)] != ZERO {
                    beta[(a, b)] += term.beta[(a, b)] * term.profile.fourier(w[a] + w[b])? * factor;
                }
            }
        }
    }
    Ok(BogoliubovMatrix { alpha, beta })
}

/// Drops every periodic component that cannot resonate in its channel: all
/// but those within `window` of `ω_n - ω_m` (α) or `ω_n + ω_m` (β).
/// Components of decaying profiles are left untouched.
pub fn equivalence_reduce(dc: &DeltaCoupling, basis: &ModeBasis, window: f64) -> Result<DeltaCoupling> {
    dc.check(basis)?;
    let n = dc.n_modes;
    let w = basis.omegas();
    let mut terms = Vec::new();
    for term in &dc.terms {
        let TimeProfile::Harmonics(components) = &term.profile else {
            terms.push(term.clone());
            continue;
        };
        for c in components {
            let mut alpha = CMatrix::zeros(n, n);
            let mut beta = CMatrix::zeros(n, n);
            let mut any = false;
            for a in 0..n {
                for b in 0..n {
                    if (c.frequency - (w[a] - w[b])).abs() < window && term.alpha[(a, b)] != ZERO {
                        alpha[(a, b)] = term.alpha[(a, b)];
                        any = true;
                    }
                    if (c.frequency - (w[a] + w[b])).abs() < window && term.beta[(a, b)] != ZERO {
                        beta[(a, b)] = term.beta[(a, b)];
                        any = true;
                    }
                }
            }
            if any {
                terms.push(DeltaTerm { profile: TimeProfile::Harmonics(vec![*c]), alpha, beta });
            }
        }
    }
    DeltaCoupling::new(dc.epsilon, n, terms)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelKind {
    Alpha,
    Beta,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Alpha => "alpha",
            ChannelKind::Beta => "beta",
        })
    }
}

/// A channel whose coefficient grows linearly in time.
#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceEntry {
    pub kind: ChannelKind,
    pub n: ModeLabel,
    pub m: ModeLabel,
    pub resonant_frequency: f64,
    /// Growth of the coefficient per unit time, `ε` included.
    pub rate: Complex64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResonanceReport {
    pub entries: Vec<ResonanceEntry>,
}

impl ResonanceReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn find(&self, kind: ChannelKind, n: &ModeLabel, m: &ModeLabel) -> Option<&ResonanceEntry> {
        self.entries.iter().find(|e| e.kind == kind && &e.n == n && &e.m == m)
    }
}

/// Channels with a periodic component within `window` of their resonant
/// frequency. Diagonal α channels are never reported and β channels are
/// listed once per unordered pair.
pub fn resonance_scan(dc: &DeltaCoupling, basis: &ModeBasis, window: f64) -> Result<ResonanceReport> {
    dc.check(basis)?;
    let n = dc.n_modes;
    let w = basis.omegas();
    let floor = 1e-10 * dc.scale();
    let mut entries = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for kind in [ChannelKind::Alpha, ChannelKind::Beta] {
                let (freq, skip) = match kind {
                    ChannelKind::Alpha => (w[a] - w[b], a == b),
                    ChannelKind::Beta => (w[a] + w[b], b < a),
                };
                if skip {
                    continue;
                }
                let mut rate = ZERO;
                for term in &dc.terms {
                    let entry = match kind {
                        ChannelKind::Alpha => term.alpha[(a, b)],
                        ChannelKind::Beta => term.beta[(a, b)],
                    };
                    if entry == ZERO {
                        continue;
                    }
                    for c in term.profile.components() {
                        if (c.frequency - freq).abs() < window {
                            rate += entry * c.amplitude;
                        }
                    }
                }
                if rate.norm() > floor && rate.norm() > 0.0 {
                    entries.push(ResonanceEntry {
                        kind,
                        n: basis.labels()[a].clone(),
                        m: basis.labels()[b].clone(),
                        resonant_frequency: freq,
                        rate: rate * dc.epsilon,
                    });
                }
            }
        }
    }
    Ok(ResonanceReport { entries })
}
