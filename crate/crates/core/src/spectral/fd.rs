//! Second-order finite differences for `-(1/√h)∂_x(√h h^{xx} ∂_x ·) + V` on an interval or circle.

use num_complex::Complex64;

use super::tridiag::SymTridiagonal;
use super::OperatorSpec;
use crate::error::{Error, Result};
use crate::geometry::{BoundarySpec, SyncSpacetime};

/// Stiffness `K` and lumped mass `M` so that `Ô ≈ M⁻¹K` on the unknown nodes.
#[derive(Clone, Debug)]
pub(crate) struct Discretization {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub first: usize,
    pub unknowns: usize,
    pub k_diag: Vec<f64>,
    pub k_off: Vec<f64>,
    pub k_corner: f64,
    pub mass: Vec<f64>,
    pub periodic: bool,
    pub dx: f64,
}

pub(crate) fn grid(st: &SyncSpacetime, points: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let (a, b) = (st.domain().lower()[0], st.domain().upper()[0]);
    if matches!(st.boundary(), BoundarySpec::Periodic) {
        let dx = (b - a) / points as f64;
        ((0..points).map(|i| a + i as f64 * dx).collect(), vec![dx; points], dx)
    } else {
        let dx = (b - a) / (points - 1) as f64;
        let nodes: Vec<f64> = (0..points).map(|i| a + i as f64 * dx).collect();
        let mut w = vec![dx; points];
        w[0] = 0.5 * dx;
        w[points - 1] = 0.5 * dx;
        (nodes, w, dx)
    }
}

fn sqrt_h(st: &SyncSpacetime, t: f64, x: f64) -> Result<f64> {
    let h = st.metric(t, &[x])[(0, 0)];
    if !(h > 0.0) {
        return Err(Error::SingularMetric { t });
    }
    Ok(h.sqrt())
}

pub(crate) fn discretize(op: &OperatorSpec, st: &SyncSpacetime, t: f64) -> Result<Discretization> {
    if st.dim() != 1 {
        return Err(Error::UnsupportedGeometry(format!(
            "finite-difference eigensolver handles one spatial dimension, got {}",
            st.dim()
        )));
    }
    let points = op.grid_points();
    if points < 8 {
        return Err(Error::InvalidArgument("finite-difference grid needs at least 8 points".into()));
    }
    let (nodes, weights, dx) = grid(st, points);
    let periodic = matches!(st.boundary(), BoundarySpec::Periodic);
    let dirichlet = matches!(st.boundary(), BoundarySpec::Dirichlet);
    let (first, unknowns) = if dirichlet { (1, points - 2) } else { (0, points) };
    let base_mass_sq = st.mass() * st.mass() + op.mass_sq_shift();
    let xi = st.coupling();

    let mut k_diag = vec![0.0; unknowns];
    let mut k_off = vec![0.0; unknowns.saturating_sub(1)];
    let mut k_corner = 0.0;
    let mut mass = vec![0.0; unknowns];
    for j in 0..unknowns {
        let i = first + j;
        let s = sqrt_h(st, t, nodes[i])?;
        mass[j] = weights[i] * s;
        let v = base_mass_sq + xi * st.spatial_curvature(t, &[nodes[i]]);
        k_diag[j] += mass[j] * v;
    }
    let edges = if periodic { points } else { points - 1 };
    for e in 0..edges {
        let (i, k) = (e, (e + 1) % points);
        let mid = nodes[i] + 0.5 * dx;
        let c = 1.0 / (sqrt_h(st, t, mid)? * dx);
        let ui = i.checked_sub(first).filter(|&u| u < unknowns);
        let uk = k.checked_sub(first).filter(|&u| u < unknowns);
        if let Some(u) = ui {
            k_diag[u] += c;
        }
        if let Some(u) = uk {
            k_diag[u] += c;
        }
        if let (Some(u), Some(w)) = (ui, uk) {
            if w == u + 1 {
                k_off[u] -= c;
            } else {
                k_corner -= c;
            }
        }
    }
    if let BoundarySpec::Robin(gamma) = st.boundary() {
        k_diag[0] += gamma(&[nodes[0]]);
        k_diag[unknowns - 1] += gamma(&[nodes[points - 1]]);
    }
    Ok(Discretization { nodes, weights, first, unknowns, k_diag, k_off, k_corner, mass, periodic, dx })
}

impl Discretization {
    pub fn symmetric_form(&self) -> SymTridiagonal {
        let d = self.k_diag.iter().zip(&self.mass).map(|(k, m)| k / m).collect();
        let e = (0..self.unknowns - 1)
            .map(|j| self.k_off[j] / (self.mass[j] * self.mass[j + 1]).sqrt())
            .collect();
        let corner = if self.periodic {
            self.k_corner / (self.mass[0] * self.mass[self.unknowns - 1]).sqrt()
        } else {
            0.0
        };
        SymTridiagonal { d, e, corner }
    }

    /// `M⁻¹K f` on all nodes; Dirichlet boundary nodes map to zero.
    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.unknowns;
        let mut out = vec![Complex64::new(0.0, 0.0); self.nodes.len()];
        for j in 0..n {
            let i = self.first + j;
            let mut v = f[i] * self.k_diag[j];
            if j > 0 {
                v += f[i - 1] * self.k_off[j - 1];
            }
            if j + 1 < n {
                v += f[i + 1] * self.k_off[j];
            }
            if self.periodic {
                if j == 0 {
                    v += f[self.first + n - 1] * self.k_corner;
                } else if j == n - 1 {
                    v += f[self.first] * self.k_corner;
                }
            }
            out[i] = v / self.mass[j];
        }
        out
    }
}

/// First and second derivatives of grid samples by second-order stencils.
pub(crate) fn derivatives(f: &[Complex64], dx: f64, periodic: bool) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = f.len();
    let mut d1 = vec![Complex64::new(0.0, 0.0); n];
    let mut d2 = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        if periodic || (i > 0 && i + 1 < n) {
            let (l, r) = ((i + n - 1) % n, (i + 1) % n);
            d1[i] = (f[r] - f[l]) / (2.0 * dx);
            d2[i] = (f[r] - f[i] * 2.0 + f[l]) / (dx * dx);
        } else if i == 0 {
            d1[i] = (f[0] * -3.0 + f[1] * 4.0 - f[2]) / (2.0 * dx);
            d2[i] = (f[0] * 2.0 - f[1] * 5.0 + f[2] * 4.0 - f[3]) / (dx * dx);
        } else {
            d1[i] = (f[i] * 3.0 - f[i - 1] * 4.0 + f[i - 2]) / (2.0 * dx);
            d2[i] = (f[i] * 2.0 - f[i - 1] * 5.0 + f[i - 2] * 4.0 - f[i - 3]) / (dx * dx);
        }
    }
    (d1, d2)
}
