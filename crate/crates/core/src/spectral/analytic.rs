//! Closed-form eigenfunctions for position-independent diagonal metrics on boxes and tori.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::{check_spectrum, ModeBasis, ModeJets, ModeLabel, ModeSource, OperatorSpec, SliceGrid};
use crate::error::{Error, Result};
use crate::geometry::{q_factor, sqrt_det, BoundarySpec, SyncSpacetime};
use crate::quadrature::gauss_legendre;

/// One-dimensional factor of a separable mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AxisKind {
    /// `e^{ikx}/√L`, `k = 2πn/L`, `n ∈ ℤ`.
    Periodic,
    /// `√(2/L) sin(kx)`, `k = nπ/L`, `n ≥ 1`.
    Dirichlet,
    /// `√(c/L) cos(kx)`, `k = nπ/L`, `n ≥ 0`.
    Neumann,
}

impl AxisKind {
    fn admits(self, n: i64) -> bool {
        match self {
            AxisKind::Periodic => true,
            AxisKind::Dirichlet => n >= 1,
            AxisKind::Neumann => n >= 0,
        }
    }

    fn wavenumber(self, n: i64, length: f64) -> f64 {
        match self {
            AxisKind::Periodic => 2.0 * PI * n as f64 / length,
            _ => PI * n as f64 / length,
        }
    }

    /// Value and first two derivatives at local coordinate `s ∈ [0, L]`.
    fn eval(self, n: i64, length: f64, s: f64) -> [Complex64; 3] {
        let k = self.wavenumber(n, length);
        match self {
            AxisKind::Periodic => {
                let f = Complex64::from_polar(1.0 / length.sqrt(), k * s);
                [f, f * Complex64::new(0.0, k), f * (-k * k)]
            }
            AxisKind::Dirichlet => {
                let c = (2.0 / length).sqrt();
                let (sn, cs) = (k * s).sin_cos();
                [(c * sn).into(), (c * k * cs).into(), (-c * k * k * sn).into()]
            }
            AxisKind::Neumann => {
                let c = (if n == 0 { 1.0 } else { 2.0 } / length).sqrt();
                let (sn, cs) = (k * s).sin_cos();
                [(c * cs).into(), (-c * k * sn).into(), (-c * k * k * cs).into()]
            }
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Family {
    kind: AxisKind,
    lower: Vec<f64>,
    lengths: Vec<f64>,
    mass_sq: f64,
}

pub(crate) enum Selection {
    Lowest(usize),
    Labels(Vec<ModeLabel>),
}

impl Family {
    fn new(op: &OperatorSpec, st: &SyncSpacetime) -> Result<Self> {
        let kind = match st.boundary() {
            BoundarySpec::Periodic => AxisKind::Periodic,
            BoundarySpec::Dirichlet => AxisKind::Dirichlet,
            BoundarySpec::Neumann => AxisKind::Neumann,
            BoundarySpec::Robin(_) => {
                return Err(Error::UnsupportedGeometry("no closed-form family for Robin boundaries".into()))
            }
        };
        Ok(Family {
            kind,
            lower: st.domain().lower().to_vec(),
            lengths: st.domain().lengths(),
            mass_sq: st.mass() * st.mass() + op.mass_sq_shift(),
        })
    }

    fn wavenumbers(&self, label: &ModeLabel) -> Vec<f64> {
        label.0.iter().zip(&self.lengths).map(|(&n, &l)| self.kind.wavenumber(n, l)).collect()
    }

    fn omega_sq(&self, label: &ModeLabel, diag: &[f64]) -> f64 {
        self.wavenumbers(label).iter().zip(diag).map(|(k, h)| k * k / h).sum::<f64>() + self.mass_sq
    }

    fn grid(&self, labels: &[ModeLabel]) -> SliceGrid {
        let top = labels.iter().flat_map(|l| l.0.iter()).map(|n| n.unsigned_abs() as usize).max().unwrap_or(0);
        let mut axes = Vec::new();
        let mut weights = Vec::new();
        for (&a, &l) in self.lower.iter().zip(&self.lengths) {
            if self.kind == AxisKind::Periodic {
                let m = 4 * top + 8;
                let dx = l / m as f64;
                axes.push((0..m).map(|j| a + j as f64 * dx).collect());
                weights.push(vec![dx; m]);
            } else {
                let rule = gauss_legendre(3 * top + 10);
                axes.push(rule.0.iter().map(|x| a + 0.5 * l * (x + 1.0)).collect());
                weights.push(rule.1.iter().map(|w| 0.5 * l * w).collect());
            }
        }
        SliceGrid::tensor(axes, weights)
    }

    /// Derivatives up to second order of the coordinate factor `Π f_i` at every node.
    fn product_jets(&self, grid: &SliceGrid, label: &ModeLabel) -> ModeJets {
        let dim = self.lengths.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut value = vec![zero; grid.len()];
        let mut gradient = vec![vec![zero; grid.len()]; dim];
        let mut hessian = vec![vec![vec![zero; grid.len()]; dim]; dim];
        for p in 0..grid.len() {
            let x = grid.point(p);
            let f: Vec<[Complex64; 3]> =
                (0..dim).map(|i| self.kind.eval(label.0[i], self.lengths[i], x[i] - self.lower[i])).collect();
            let prod = |orders: &dyn Fn(usize) -> usize| (0..dim).map(|i| f[i][orders(i)]).product::<Complex64>();
            value[p] = prod(&|_| 0);
            for i in 0..dim {
                gradient[i][p] = prod(&|a| usize::from(a == i));
                for j in 0..dim {
                    hessian[i][j][p] = prod(&|a| usize::from(a == i) + usize::from(a == j));
                }
            }
        }
        ModeJets { value, gradient, hessian }
    }

    pub(crate) fn jets(&self, grid: &SliceGrid, label: &ModeLabel, scale: f64) -> ModeJets {
        let mut j = self.product_jets(grid, label);
        for v in j.value.iter_mut() {
            *v *= scale;
        }
        for g in j.gradient.iter_mut().flatten() {
            *g *= scale;
        }
        for h in j.hessian.iter_mut().flatten().flatten() {
            *h *= scale;
        }
        j
    }

    /// `(dΦ/dt, dω/dt)`: the shapes are fixed, only `ω` and `√h` move.
    pub(crate) fn rates(&self, st: &SyncSpacetime, b: &ModeBasis) -> Result<(Vec<Vec<Complex64>>, Vec<f64>)> {
        let t = b.t();
        let c = st.domain().center();
        let h = st.metric(t, &c);
        let dh = st.metric_rate(t, &c);
        let q = q_factor(st, t, &c)?;
        let mut dmodes = Vec::with_capacity(b.n_modes());
        let mut domegas = Vec::with_capacity(b.n_modes());
        for (n, label) in b.labels().iter().enumerate() {
            let w = b.omegas()[n];
            let k = self.wavenumbers(label);
            let dw2: f64 = (0..k.len()).map(|i| -k[i] * k[i] * dh[(i, i)] / (h[(i, i)] * h[(i, i)])).sum();
            let dw = dw2 / (2.0 * w);
            let factor = -0.5 * (q + dw / w);
            dmodes.push(b.mode(n).iter().map(|v| v * factor).collect());
            domegas.push(dw);
        }
        Ok((dmodes, domegas))
    }
}

fn enumerate(kind: AxisKind, dim: usize, bound: i64) -> Vec<ModeLabel> {
    let axis: Vec<i64> = (-bound..=bound).filter(|&n| kind.admits(n)).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<i64>| {
                axis.iter().map(move |&n| {
                    let mut v = prefix.clone();
                    v.push(n);
                    v
                })
            })
            .collect();
    }
    out.into_iter().map(ModeLabel).collect()
}

pub(crate) fn basis(op: &OperatorSpec, st: &SyncSpacetime, t: f64, selection: Selection) -> Result<ModeBasis> {
    let family = Family::new(op, st)?;
    let dim = st.dim();
    let center = st.domain().center();
    let h = st.metric(t, &center);
    let diag: Vec<f64> = (0..dim).map(|i| h[(i, i)]).collect();
    let labels = match selection {
        Selection::Lowest(n) => {
            let mut all: Vec<(f64, ModeLabel)> =
                enumerate(family.kind, dim, n as i64).into_iter().map(|l| (family.omega_sq(&l, &diag), l)).collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            let mut chosen: Vec<ModeLabel> = all.into_iter().take(n).map(|(_, l)| l).collect();
            chosen.sort();
            chosen
        }
        Selection::Labels(labels) => {
            for l in &labels {
                if l.0.len() != dim || !l.0.iter().all(|&n| family.kind.admits(n)) {
                    return Err(Error::InvalidArgument(format!("label {l} is not valid for a {:?} family", family.kind)));
                }
            }
            let mut sorted = labels.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != labels.len() || labels.is_empty() {
                return Err(Error::InvalidArgument("mode labels must be nonempty and distinct".into()));
            }
            sorted
        }
    };
    let omega_sq: Vec<f64> = labels.iter().map(|l| family.omega_sq(l, &diag)).collect();
    let largest = omega_sq.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    check_spectrum(&omega_sq, 1e-12 * largest.max(f64::MIN_POSITIVE))?;
    let omegas: Vec<f64> = omega_sq.iter().map(|v| v.sqrt()).collect();
    let grid = family.grid(&labels);
    let det = sqrt_det(st, t, &center)?;
    let samples = labels
        .iter()
        .zip(&omegas)
        .map(|(l, w)| family.jets(&grid, l, 1.0 / (2.0 * w * det).sqrt()).value)
        .collect();
    let volume_weights = grid.weights().iter().map(|w| w * det).collect();
    Ok(ModeBasis {
        t,
        labels,
        omegas,
        grid: Arc::new(grid),
        volume_weights: Arc::new(volume_weights),
        samples,
        source: ModeSource::Analytic(Arc::new(family)),
    })
}

impl ModeBasis {
    /// Per-axis wavenumbers of mode `n` for closed-form families.
    pub fn wavenumbers(&self, n: usize) -> Option<Vec<f64>> {
        match &self.source {
            ModeSource::Analytic(f) => Some(f.wavenumbers(&self.labels[n])),
            ModeSource::Grid { .. } => None,
        }
    }
}
