//! Synchronous-gauge spacetimes `ds² = -dt² + h_ij(t,x) dx^i dx^j` on coordinate boxes and tori.

use std::fmt;
use std::ops::{Add, Mul};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Symmetric matrix field `(t, x) -> h_ij`.
pub type TensorField = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;
/// Scalar field `(t, x) -> value`.
pub type ScalarField = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
/// Time-independent scalar function of a point.
pub type PointFunction = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Boundary condition imposed on the spatial eigenproblem.
#[derive(Clone)]
pub enum BoundarySpec {
    /// Closed manifold: every axis is periodic.
    Periodic,
    Dirichlet,
    Neumann,
    /// `n·∇Φ + γ(x) Φ = 0` with outward unit normal `n` and nonvanishing `γ`.
    Robin(PointFunction),
}

/// Discriminant of a [`BoundarySpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Periodic,
    Dirichlet,
    Neumann,
    Robin,
}

impl BoundarySpec {
    /// Robin condition with a constant coefficient.
    pub fn robin_constant(gamma: f64) -> Result<Self> {
        if gamma == 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Robin coefficient must be finite and nonzero, got {gamma}"
            )));
        }
        Ok(BoundarySpec::Robin(Arc::new(move |_| gamma)))
    }

    pub fn robin(gamma: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        BoundarySpec::Robin(Arc::new(gamma))
    }

    pub fn kind(&self) -> BoundaryKind {
        match self {
            BoundarySpec::Periodic => BoundaryKind::Periodic,
            BoundarySpec::Dirichlet => BoundaryKind::Dirichlet,
            BoundarySpec::Neumann => BoundaryKind::Neumann,
            BoundarySpec::Robin(_) => BoundaryKind::Robin,
        }
    }

    /// Robin coefficient at a boundary point, if any.
    pub fn robin_gamma(&self, x: &[f64]) -> Option<f64> {
        match self {
            BoundarySpec::Robin(g) => Some(g(x)),
            _ => None,
        }
    }
}

impl fmt::Debug for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.kind())
    }
}

/// Coordinate box `[lower_i, upper_i]`; periodic axes make it a torus.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidArgument("domain bounds must be nonempty and of equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && b > a)) {
            return Err(Error::InvalidArgument("domain requires finite bounds with upper > lower".into()));
        }
        Ok(Domain { lower, upper })
    }

    /// `[0, L_i]` along each axis.
    pub fn with_lengths(lengths: &[f64]) -> Result<Self> {
        Domain::new(vec![0.0; lengths.len()], lengths.to_vec())
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Domain::new(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// A synchronous-gauge spacetime with its field parameters and boundary data.
///
/// Immutable after construction and cheap to clone.
#[derive(Clone)]
pub struct SyncSpacetime {
    domain: Domain,
    boundary: BoundarySpec,
    metric: TensorField,
    metric_rate: TensorField,
    mass: f64,
    coupling: f64,
    spatial_curvature: Option<ScalarField>,
    uniform: bool,
}

impl fmt::Debug for SyncSpacetime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SyncSpacetime")
            .field("domain", &self.domain)
            .field("boundary", &self.boundary)
            .field("mass", &self.mass)
            .field("coupling", &self.coupling)
            .field("uniform", &self.uniform)
            .finish()
    }
}

/// Builder for [`SyncSpacetime`]; `build` runs the construction checks.
pub struct SpacetimeBuilder {
    domain: Domain,
    boundary: BoundarySpec,
    metric: Option<(TensorField, TensorField)>,
    uniform: bool,
    mass: f64,
    coupling: f64,
    spatial_curvature: Option<ScalarField>,
    check_times: Vec<f64>,
    rate_tolerance: f64,
}

impl SyncSpacetime {
    pub fn builder(domain: Domain, boundary: BoundarySpec) -> SpacetimeBuilder {
        SpacetimeBuilder {
            domain,
            boundary,
            metric: None,
            uniform: false,
            mass: 0.0,
            coupling: 0.0,
            spatial_curvature: None,
            check_times: vec![0.0],
            rate_tolerance: 1e-6,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.boundary
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// True when `h` is diagonal and independent of position.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn metric(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        (self.metric)(t, x)
    }

    pub fn metric_rate(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        (self.metric_rate)(t, x)
    }

    pub fn spatial_curvature(&self, t: f64, x: &[f64]) -> f64 {
        self.spatial_curvature.as_ref().map_or(0.0, |r| r(t, x))
    }

    pub fn has_spatial_curvature(&self) -> bool {
        self.spatial_curvature.is_some()
    }

    /// Same spacetime with a different mass.
    pub fn with_mass(&self, mass: f64) -> Result<Self> {
        check_mass(mass)?;
        Ok(SyncSpacetime { mass, ..self.clone() })
    }
}

fn check_mass(mass: f64) -> Result<()> {
    if !(mass.is_finite() && mass >= 0.0) {
        return Err(Error::InvalidArgument(format!("mass must be finite and non-negative, got {mass}")));
    }
    Ok(())
}

impl SpacetimeBuilder {
    /// General metric and its time derivative.
    pub fn metric(
        mut self,
        h: impl Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        dh_dt: impl Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.metric = Some((Arc::new(h), Arc::new(dh_dt)));
        self.uniform = false;
        self
    }

    /// Position-independent diagonal metric `h = diag(d_i(t))`.
    ///
    /// Such spacetimes use the closed-form mode families in [`crate::spectral`].
    pub fn uniform_diagonal_metric(
        mut self,
        diag: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        diag_rate: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.metric = Some((
            Arc::new(move |t, _| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag(t)))),
            Arc::new(move |t, _| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag_rate(t)))),
        ));
        self.uniform = true;
        self
    }

    /// Static Euclidean metric.
    pub fn flat(self) -> Self {
        let n = self.domain.dim();
        self.uniform_diagonal_metric(move |_| vec![1.0; n], move |_| vec![0.0; n])
    }

    pub fn mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    /// Curvature coupling `ξ`.
    pub fn coupling(mut self, xi: f64) -> Self {
        self.coupling = xi;
        self
    }

    pub fn spatial_curvature(mut self, r: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.spatial_curvature = Some(Arc::new(r));
        self
    }

    /// Times at which the construction checks sample the metric.
    pub fn check_times(mut self, times: &[f64]) -> Self {
        self.check_times = times.to_vec();
        self
    }

    /// Relative tolerance for the metric-rate consistency check.
    pub fn rate_tolerance(mut self, tol: f64) -> Self {
        self.rate_tolerance = tol;
        self
    }

    pub fn build(self) -> Result<SyncSpacetime> {
        let (metric, metric_rate) = self
            .metric
            .ok_or_else(|| Error::InvalidArgument("spacetime requires a metric".into()))?;
        check_mass(self.mass)?;
        if !self.coupling.is_finite() {
            return Err(Error::InvalidArgument("coupling must be finite".into()));
        }
        let st = SyncSpacetime {
            domain: self.domain,
            boundary: self.boundary,
            metric,
            metric_rate,
            mass: self.mass,
            coupling: self.coupling,
            spatial_curvature: self.spatial_curvature,
            uniform: self.uniform,
        };
        let n = st.dim();
        let points = sample_points(&st.domain, false);
        for &t in &self.check_times {
            for x in &points {
                let h = st.metric(t, x);
                let dh = st.metric_rate(t, x);
                if h.nrows() != n || h.ncols() != n || dh.nrows() != n || dh.ncols() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: h.nrows() });
                }
                let scale = h.amax().max(1.0);
                if (&h - h.transpose()).amax() > 1e-12 * scale || (&dh - dh.transpose()).amax() > 1e-12 * dh.amax().max(1.0) {
                    return Err(Error::InvalidArgument(format!("metric is not symmetric at t = {t}")));
                }
                inverse_metric(&h, t)?;
                let step = fd_step(t);
                let fd = (st.metric(t + step, x) - st.metric(t - step, x)) / (2.0 * step);
                let deviation = (&fd - &dh).amax();
                if deviation > self.rate_tolerance * (1.0 + dh.amax()) {
                    return Err(Error::InconsistentMetricRate { t, deviation });
                }
            }
        }
        if let BoundarySpec::Robin(gamma) = &st.boundary {
            for x in sample_points(&st.domain, true) {
                let g = gamma(&x);
                if g == 0.0 || !g.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "Robin coefficient must be nonzero on the boundary, got {g} at {x:?}"
                    )));
                }
            }
        }
        Ok(st)
    }
}

/// Step used for time derivatives of metric-derived scalars.
pub fn fd_step(t: f64) -> f64 {
    1e-5 * t.abs().max(1.0)
}

fn sample_points(domain: &Domain, boundary_only: bool) -> Vec<Vec<f64>> {
    let fractions: &[f64] = if boundary_only { &[0.0, 0.5, 1.0] } else { &[0.0, 0.25, 0.5, 0.75, 1.0] };
    let n = domain.dim();
    let mut out = Vec::new();
    let total = fractions.len().pow(n as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = Vec::with_capacity(n);
        let mut on_face = false;
        for i in 0..n {
            let f = fractions[rem % fractions.len()];
            rem /= fractions.len();
            on_face |= f == 0.0 || f == 1.0;
            x.push(domain.lower[i] + f * (domain.upper[i] - domain.lower[i]));
        }
        if !boundary_only || on_face {
            out.push(x);
        }
    }
    out
}

fn inverse_metric(h: &DMatrix<f64>, t: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let chol = h.clone().cholesky().ok_or(Error::SingularMetric { t })?;
    let l = chol.l_dirty();
    let (lo, hi) = (0..h.nrows()).fold((f64::INFINITY, 0.0_f64), |(lo, hi), i| {
        let d = l[(i, i)].abs();
        (lo.min(d), hi.max(d))
    });
    if !(lo > 1e-12 * hi) {
        return Err(Error::SingularMetric { t });
    }
    Ok(chol)
}

/// `√det h(t,x)`.
pub fn sqrt_det(st: &SyncSpacetime, t: f64, x: &[f64]) -> Result<f64> {
    let chol = inverse_metric(&st.metric(t, x), t)?;
    let l = chol.l_dirty();
    Ok((0..st.dim()).map(|i| l[(i, i)]).product())
}

/// `q = ∂_t log √h = ½ tr(h⁻¹ ∂_t h)`.
pub fn q_factor(st: &SyncSpacetime, t: f64, x: &[f64]) -> Result<f64> {
    let chol = inverse_metric(&st.metric(t, x), t)?;
    Ok(0.5 * chol.solve(&st.metric_rate(t, x)).trace())
}

/// `R̄ = 2 ∂_t q + q² - ¼ (∂_t h^{ij})(∂_t h_ij)`, with `∂_t q` by central differences.
pub fn rbar_factor(st: &SyncSpacetime, t: f64, x: &[f64]) -> Result<f64> {
    let h = st.metric(t, x);
    let dh = st.metric_rate(t, x);
    let chol = inverse_metric(&h, t)?;
    let m = chol.solve(&dh);
    let q = 0.5 * m.trace();
    let step = fd_step(t);
    let dq = (q_factor(st, t + step, x)? - q_factor(st, t - step, x)?) / (2.0 * step);
    // (∂_t h^{ij})(∂_t h_ij) = -tr((h⁻¹ ḣ)²)
    let contraction = -(&m * &m).trace();
    Ok(2.0 * dq + q * q - 0.25 * contraction)
}

/// The two metric-derived scalars entering the reduced field equation.
#[derive(Clone, Debug)]
pub struct GeometryFactors {
    st: SyncSpacetime,
}

impl GeometryFactors {
    pub fn new(st: &SyncSpacetime) -> Self {
        GeometryFactors { st: st.clone() }
    }

    pub fn q(&self, t: f64, x: &[f64]) -> Result<f64> {
        q_factor(&self.st, t, x)
    }

    pub fn rbar(&self, t: f64, x: &[f64]) -> Result<f64> {
        rbar_factor(&self.st, t, x)
    }
}

/// Values that [`volume_integral`] can accumulate.
pub trait FieldValue: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn modulus(self) -> f64;
}

impl FieldValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl FieldValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// `∫ f √h dx` over the slice at `t` by tensor-product Gauss-Legendre with order doubling.
pub fn volume_integral<T: FieldValue>(st: &SyncSpacetime, t: f64, f: impl Fn(&[f64]) -> T) -> Result<T> {
    let n = st.dim();
    let max_order = match n {
        1 => 4096,
        2 => 512,
        3 => 128,
        _ => 32,
    };
    let uniform_det = if st.is_uniform() { Some(sqrt_det(st, t, &st.domain().center())?) } else { None };
    let mut order = 8;
    let mut previous: Option<T> = None;
    let mut change = f64::INFINITY;
    while order <= max_order {
        let rule = gauss_legendre(order);
        let mut acc = T::zero();
        let mut l1 = 0.0;
        let mut x = vec![0.0; n];
        for idx in 0..order.pow(n as u32) {
            let mut rem = idx;
            let mut w = 1.0;
            for i in 0..n {
                let k = rem % order;
                rem /= order;
                let half = 0.5 * (st.domain().upper[i] - st.domain().lower[i]);
                x[i] = st.domain().lower[i] + half * (rule.0[k] + 1.0);
                w *= half * rule.1[k];
            }
            let det = match uniform_det {
                Some(d) => d,
                None => sqrt_det(st, t, &x)?,
            };
            let v = f(&x) * (w * det);
            l1 += v.modulus();
            acc = acc + v;
        }
        if let Some(prev) = previous {
            change = (acc + prev * -1.0).modulus();
            if change <= 1e-10 * l1.max(acc.modulus()) || l1 == 0.0 {
                return Ok(acc);
            }
        }
        previous = Some(acc);
        order *= 2;
    }
    Err(Error::QuadratureFailure { change })
}
