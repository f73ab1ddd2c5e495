//! Pair creation on an expanding 1+1 torus with `a(η) = √(A + B tanh(ρη))`.
//!
//! Each momentum pair `(n, -n)` decouples into a two-component system for
//! `α_nn` and `β_(-n)n`. It is integrated in conformal time, where the scale
//! factor is explicit, and reported against cosmic time `t` with `t(η=0) = 0`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::InstantaneousFamily;
use crate::evolution::{evolve_q, EvolveOptions, FamilyDriver};
use crate::geometry::{BoundarySpec, Domain, SyncSpacetime};
use crate::ode::{Integrator, StepControl, StepStats};
use crate::quadrature::gauss_legendre;
use crate::spectral::{ModeLabel, OperatorSpec};
use crate::{Complex64, Error, Result, Warning};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlrwConfig {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub rho: f64,
    pub mass: f64,
    #[serde(rename = "L")]
    pub length: f64,
    pub n_max: usize,
    #[serde(default = "default_eta_span")]
    pub eta_span: (f64, f64),
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Highest `|n|` included in the cross-check against the generic evolution.
    #[serde(default = "default_cross_check")]
    pub cross_check_modes: usize,
}

fn default_eta_span() -> (f64, f64) {
    (-10.0, 10.0)
}

fn default_tol() -> f64 {
    1e-10
}

fn default_samples() -> usize {
    401
}

fn default_cross_check() -> usize {
    2
}

impl FlrwConfig {
    pub fn new(a: f64, b: f64, rho: f64, mass: f64, length: f64, n_max: usize) -> Self {
        let span = if rho > 0.0 { (-10.0 / rho, 10.0 / rho) } else { default_eta_span() };
        FlrwConfig {
            a,
            b,
            rho,
            mass,
            length,
            n_max,
            eta_span: span,
            tol: default_tol(),
            samples: default_samples(),
            cross_check_modes: default_cross_check(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > self.b.abs()) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scale factor a(eta) = sqrt(A + B tanh(rho eta)) must stay real and positive, which needs A > |B| (A = {}, B = {})",
                self.a, self.b
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidArgument(format!("mass must be non-negative, got {}", self.mass)));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidArgument(format!("torus length L must be positive, got {}", self.length)));
        }
        let (lo, hi) = self.eta_span;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!("eta_span must be a finite increasing pair, got ({lo}, {hi})")));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.samples < 2 {
            return Err(Error::InvalidArgument("samples must be at least 2".into()));
        }
        Ok(())
    }

    /// `(a, da/dη)`.
    pub fn scale(&self, eta: f64) -> (f64, f64) {
        let th = (self.rho * eta).tanh();
        let a = (self.a + self.b * th).sqrt();
        (a, self.b * self.rho * (1.0 - th * th) / (2.0 * a))
    }

    pub fn wavenumber(&self, n: i64) -> f64 {
        2.0 * PI * n as f64 / self.length
    }

    /// Wavenumbers `n` tracked by the run: `0..=n_max`, without `0` for a massless field.
    pub fn modes(&self) -> Vec<i64> {
        let first = if self.mass > 0.0 { 0 } else { 1 };
        (first..=self.n_max as i64).collect()
    }
}

/// Closed-form `|β_(-n)n(∞, -∞)|²` for wavenumber `k`.
pub fn flrw_asymptote(cfg: &FlrwConfig, k: f64) -> f64 {
    let m2 = cfg.mass * cfg.mass;
    let w_in = (k * k + m2 * (cfg.a - cfg.b)).sqrt();
    let w_out = (k * k + m2 * (cfg.a + cfg.b)).sqrt();
    let w_minus = 0.5 * (w_out - w_in).abs();
    if w_minus == 0.0 || w_in == 0.0 {
        return 0.0;
    }
    let ln_sinh = |x: f64| x + (0.5 * (-(-2.0 * x).exp_m1())).ln();
    let s = PI / cfg.rho;
    (2.0 * ln_sinh(s * w_minus) - ln_sinh(s * w_in) - ln_sinh(s * w_out)).exp()
}

/// Monotone map between conformal time `η` and cosmic time `t`, with `t(0) = 0`.
#[derive(Clone, Debug)]
pub struct TimeMap {
    cfg: FlrwConfig,
    eta: Vec<f64>,
    t: Vec<f64>,
}

/// Value and first derivative of the quintic Hermite interpolant on `[x0, x1]`.
fn hermite5(x0: f64, x1: f64, left: [f64; 3], right: [f64; 3], x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let (s4, s5) = (s3 * s, s3 * s2);
    let basis = [
        1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
        h * (s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5),
        h * h * 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5),
        10.0 * s3 - 15.0 * s4 + 6.0 * s5,
        h * (-4.0 * s3 + 7.0 * s4 - 3.0 * s5),
        h * h * 0.5 * (s3 - 2.0 * s4 + s5),
    ];
    let slope = [
        (-30.0 * s2 + 60.0 * s3 - 30.0 * s4) / h,
        1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4,
        h * 0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4),
        (30.0 * s2 - 60.0 * s3 + 30.0 * s4) / h,
        -12.0 * s2 + 28.0 * s3 - 15.0 * s4,
        h * 0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4),
    ];
    let coeffs = [left[0], left[1], left[2], right[0], right[1], right[2]];
    (
        coeffs.iter().zip(&basis).map(|(c, b)| c * b).sum(),
        coeffs.iter().zip(&slope).map(|(c, b)| c * b).sum(),
    )
}

impl TimeMap {
    pub fn eta_nodes(&self) -> &[f64] {
        &self.eta
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t
    }

    /// Range of `t` covered by the grid.
    pub fn t_range(&self) -> (f64, f64) {
        (self.t[0], *self.t.last().unwrap())
    }

    fn segment(nodes: &[f64], x: f64) -> usize {
        nodes.partition_point(|v| *v <= x).clamp(1, nodes.len() - 1) - 1
    }

    fn eta_jet(&self, i: usize) -> [f64; 3] {
        let (a, da) = self.cfg.scale(self.eta[i]);
        [self.t[i], a, da]
    }

    /// `(t(η), dt/dη)`.
    pub fn t_of_eta(&self, eta: f64) -> (f64, f64) {
        let i = Self::segment(&self.eta, eta);
        hermite5(self.eta[i], self.eta[i + 1], self.eta_jet(i), self.eta_jet(i + 1), eta)
    }

    /// `(η(t), dη/dt)`.
    pub fn eta_of_t(&self, t: f64) -> (f64, f64) {
        let i = Self::segment(&self.t, t);
        let jet = |j: usize| {
            let (a, da) = self.cfg.scale(self.eta[j]);
            [self.eta[j], 1.0 / a, -da / (a * a * a)]
        };
        hermite5(self.t[i], self.t[i + 1], jet(i), jet(i + 1), t)
    }

    /// `(a(t), da/dt)` by composition with `η(t)`.
    pub fn scale_at(&self, t: f64) -> (f64, f64) {
        let (eta, _) = self.eta_of_t(t);
        let (a, da) = self.cfg.scale(eta);
        (a, da / a)
    }
}

/// Cumulative `t(η) = ∫_0^η a` on a dense grid covering `eta_span`.
pub fn flrw_time_grid(cfg: &FlrwConfig) -> Result<TimeMap> {
    cfg.validate()?;
    let (lo, hi) = cfg.eta_span;
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo.min(0.0) - pad, hi.max(0.0) + pad);
    let step = (0.02 / cfg.rho).min((hi - lo) / 2000.0);
    let below = ((0.0 - lo) / step).ceil() as usize;
    let above = ((hi - 0.0) / step).ceil() as usize;
    let eta: Vec<f64> = (0..=below + above).map(|i| (i as f64 - below as f64) * step).collect();
    let rule = gauss_legendre(8);
    let piece = |a: f64, b: f64| -> f64 {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        rule.0.iter().zip(&rule.1).map(|(x, w)| w * r * cfg.scale(c + r * x).0).sum()
    };
    let mut t = vec![0.0; eta.len()];
    for i in below + 1..eta.len() {
        t[i] = t[i - 1] + piece(eta[i - 1], eta[i]);
    }
    for i in (0..below).rev() {
        t[i] = t[i + 1] - piece(eta[i], eta[i + 1]);
    }
    if let Some(index) = t.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotonicGrid { index });
    }
    Ok(TimeMap { cfg: cfg.clone(), eta, t })
}

/// Trajectory of one momentum pair.
#[derive(Clone, Debug)]
pub struct FlrwCurve {
    /// Mode number, `None` for a continuous wavenumber.
    pub n: Option<i64>,
    pub k: f64,
    pub eta: Vec<f64>,
    pub t: Vec<f64>,
    pub beta_sq: Vec<f64>,
    pub alpha_sq: Vec<f64>,
    /// Largest `||α|² - |β|² - 1|` along the trajectory.
    pub identity_residual: f64,
    pub final_beta_sq: f64,
    pub oracle: f64,
    pub stats: StepStats,
}

impl FlrwCurve {
    /// Relative change of `|β|²` over the last tenth of the samples.
    pub fn tail_change(&self) -> f64 {
        let last = *self.beta_sq.last().unwrap();
        let idx = self.beta_sq.len() - 1 - (self.beta_sq.len() / 10).max(1);
        let change = (last - self.beta_sq[idx]).abs();
        if last == 0.0 {
            change
        } else {
            change / last
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlrwOutcome {
    pub curves: Vec<FlrwCurve>,
    pub warnings: Vec<Warning>,
    /// Largest `||β|² - |β_Q|²|` against the generic evolution on `|n| ≤ cross_check_modes`.
    pub cross_check: Option<f64>,
}

fn channel(cfg: &FlrwConfig, map: &TimeMap, n: Option<i64>, k: f64) -> Result<FlrwCurve> {
    let (lo, hi) = cfg.eta_span;
    let m2 = cfg.mass * cfg.mass;
    let rhs = |eta: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
        let (a, da) = cfg.scale(eta);
        let w2 = k * k / (a * a) + m2;
        // a·β̂, since d/dη = a d/dt
        let c = if m2 == 0.0 { 0.0 } else { -da * m2 / (2.0 * a * w2) };
        let rot = Complex64::from_polar(c, -2.0 * y[2].re);
        dy[0] = rot * y[1].conj();
        dy[1] = rot * y[0].conj();
        dy[2] = Complex64::new(a * w2.sqrt(), 0.0);
        Ok(())
    };
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut it = Integrator::new(rhs, lo, vec![one, zero, zero], StepControl::new(cfg.tol))?.absolute_from(2);
    let samples = cfg.samples;
    let mut curve = FlrwCurve {
        n,
        k,
        eta: Vec::with_capacity(samples),
        t: Vec::with_capacity(samples),
        beta_sq: Vec::with_capacity(samples),
        alpha_sq: Vec::with_capacity(samples),
        identity_residual: 0.0,
        final_beta_sq: 0.0,
        oracle: flrw_asymptote(cfg, k),
        stats: StepStats::default(),
    };
    let mut worst = 0.0_f64;
    for i in 0..samples {
        let eta = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
        it.advance_to(eta, |_, y| {
            worst = worst.max((y[0].norm_sqr() - y[1].norm_sqr() - 1.0).abs());
            Ok(())
        })?;
        let y = it.state();
        curve.eta.push(eta);
        curve.t.push(map.t_of_eta(eta).0);
        curve.alpha_sq.push(y[0].norm_sqr());
        curve.beta_sq.push(y[1].norm_sqr());
    }
    curve.identity_residual = worst;
    curve.final_beta_sq = *curve.beta_sq.last().unwrap();
    curve.stats = it.stats;
    Ok(curve)
}

fn plateau_warnings(curves: &[FlrwCurve]) -> Vec<Warning> {
    curves
        .iter()
        .filter(|c| c.tail_change() > 1e-4)
        .map(|c| Warning::AsymptoteNotReached { mode: c.n.unwrap_or(-1), relative_change: c.tail_change() })
        .collect()
}

/// `|β_(-n)n|²` and `|α_nn|²` along the expansion for `n = 0..=n_max`
/// (the pairs `±n` give identical curves), plus the generic cross-check.
pub fn flrw_run(cfg: &FlrwConfig) -> Result<FlrwOutcome> {
    let map = flrw_time_grid(cfg)?;
    let curves = cfg
        .modes()
        .into_par_iter()
        .map(|n| channel(cfg, &map, Some(n), cfg.wavenumber(n)))
        .collect::<Result<Vec<_>>>()?;
    let warnings = plateau_warnings(&curves);
    let cross_check = if cfg.cross_check_modes > 0 && cfg.mass > 0.0 { Some(cross_check(cfg, &map, &curves)?) } else { None };
    Ok(FlrwOutcome { curves, warnings, cross_check })
}

fn cross_check(cfg: &FlrwConfig, map: &TimeMap, curves: &[FlrwCurve]) -> Result<f64> {
    let top = cfg.cross_check_modes.min(cfg.n_max) as i64;
    let labels: Vec<ModeLabel> = (-top..=top).map(ModeLabel::single).collect();
    let (t0, tf) = (map.t_of_eta(cfg.eta_span.0).0, map.t_of_eta(cfg.eta_span.1).0);
    let (m1, m2) = (map.clone(), map.clone());
    let st = SyncSpacetime::builder(Domain::interval(0.0, cfg.length)?, BoundarySpec::Periodic)
        .uniform_diagonal_metric(
            move |t| vec![m1.scale_at(t).0.powi(2)],
            move |t| {
                let (a, da) = m2.scale_at(t);
                vec![2.0 * a * da]
            },
        )
        .mass(cfg.mass)
        .check_times(&[t0, 0.0, tf])
        .build()?;
    let family = InstantaneousFamily::with_labels(OperatorSpec::new(), st, labels.clone(), t0)?;
    let driver = FamilyDriver::new(family, t0)?;
    let (q, _) = evolve_q(&driver, t0, tf, EvolveOptions::new(cfg.tol))?;
    let mut worst = 0.0_f64;
    for n in 0..=top {
        let Some(curve) = curves.iter().find(|c| c.n == Some(n)) else { continue };
        let i = labels.iter().position(|l| l.0[0] == -n).unwrap();
        let j = labels.iter().position(|l| l.0[0] == n).unwrap();
        worst = worst.max((q.matrix.beta[(i, j)].norm_sqr() - curve.final_beta_sq).abs());
    }
    Ok(worst)
}

/// The same pair system with a continuous wavenumber `k`.
pub fn flrw_unconfined_limit(cfg: &FlrwConfig, k: f64) -> Result<FlrwCurve> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("wavenumber must be positive, got {k}")));
    }
    let map = flrw_time_grid(cfg)?;
    channel(cfg, &map, None, k)
}
