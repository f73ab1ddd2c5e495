//! Adaptive Dormand-Prince 5(4) stepping for complex linear systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Right-hand side `dy/dt = f(t, y)`.
pub trait System {
    fn rhs(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()>;
}

impl<F: FnMut(f64, &[Complex64], &mut [Complex64]) -> Result<()>> System for F {
    fn rhs(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) -> Result<()> {
        self(t, y, dy)
    }
}

/// Stepper settings.
#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    /// Local error target, used as both absolute and relative tolerance.
    pub tol: f64,
    /// First trial step; `None` picks one from the initial derivative.
    pub initial_step: Option<f64>,
    /// Largest allowed step magnitude.
    pub max_step: f64,
    pub max_steps: usize,
}

impl StepControl {
    pub fn new(tol: f64) -> Self {
        StepControl { tol, initial_step: None, max_step: f64::INFINITY, max_steps: 5_000_000 }
    }
}

/// Counters accumulated by an [`Integrator`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrator state that can be advanced to successive output times.
pub struct Integrator<S: System> {
    system: S,
    ctrl: StepControl,
    t: f64,
    y: Vec<Complex64>,
    k: [Vec<Complex64>; 7],
    fresh: bool,
    h: Option<f64>,
    /// Components from this index on are controlled in absolute error only.
    absolute_from: usize,
    pub stats: StepStats,
}

impl<S: System> Integrator<S> {
    pub fn new(system: S, t0: f64, y0: Vec<Complex64>, ctrl: StepControl) -> Result<Self> {
        if !(ctrl.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", ctrl.tol)));
        }
        let n = y0.len();
        let z = vec![Complex64::new(0.0, 0.0); n];
        Ok(Integrator {
            system,
            ctrl,
            t: t0,
            y: y0,
            k: std::array::from_fn(|_| z.clone()),
            fresh: false,
            h: ctrl.initial_step,
            absolute_from: n,
            stats: StepStats::default(),
        })
    }

    pub fn absolute_from(mut self, index: usize) -> Self {
        self.absolute_from = index.min(self.y.len());
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[Complex64] {
        &self.y
    }

    pub fn system(&self) -> &S {
        &self.system
    }

    /// Advance to `target`, calling `accepted(t, y)` after every accepted step.
    pub fn advance_to(
        &mut self,
        target: f64,
        mut accepted: impl FnMut(f64, &[Complex64]) -> Result<()>,
    ) -> Result<()> {
        if target == self.t {
            return Ok(());
        }
        let dir = (target - self.t).signum();
        let n = self.y.len();
        if !self.fresh {
            let (t, y) = (self.t, self.y.clone());
            self.system.rhs(t, &y, &mut self.k[0])?;
            self.stats.evaluations += 1;
            self.fresh = true;
        }
        let mut h = match self.h {
            Some(h) => h.abs(),
            None => self.initial_step(target),
        }
        .min(self.ctrl.max_step);
        let mut stage = vec![Complex64::new(0.0, 0.0); n];
        let mut y_new = vec![Complex64::new(0.0, 0.0); n];
        let mut steps = 0;
        while (target - self.t) * dir > 0.0 {
            steps += 1;
            if steps > self.ctrl.max_steps {
                return Err(Error::StepFailure { t: self.t, h });
            }
            let remaining = (target - self.t).abs();
            let last = h >= remaining * (1.0 - 1e-12);
            let hs = if last { remaining } else { h } * dir;
            let floor = 1e-14 * self.t.abs().max(1.0);
            if hs.abs() < floor {
                return Err(Error::StepFailure { t: self.t, h: hs.abs() });
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = self.y[i];
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        if *a != 0.0 {
                            acc += self.k[j][i] * (hs * a);
                        }
                    }
                    stage[i] = acc;
                }
                let ts = self.t + C[s] * hs;
                let (_, tail) = self.k.split_at_mut(s);
                self.system.rhs(ts, &stage, &mut tail[0])?;
                self.stats.evaluations += 1;
                if s == 6 {
                    y_new.copy_from_slice(&stage);
                }
            }
            let mut err = 0.0_f64;
            for i in 0..n {
                let mut e = Complex64::new(0.0, 0.0);
                for (j, c) in E.iter().enumerate() {
                    if *c != 0.0 {
                        e += self.k[j][i] * c;
                    }
                }
                let e = (e * hs).norm();
                let scale = if i < self.absolute_from {
                    self.ctrl.tol * (1.0 + self.y[i].norm().max(y_new[i].norm()))
                } else {
                    self.ctrl.tol
                };
                err = err.max(e / scale);
            }
            if !err.is_finite() {
                h *= 0.2;
                self.stats.rejected += 1;
                continue;
            }
            if err <= 1.0 {
                self.t = if last { target } else { self.t + hs };
                std::mem::swap(&mut self.y, &mut y_new);
                self.k.swap(0, 6);
                self.stats.accepted += 1;
                accepted(self.t, &self.y)?;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || grow < 1.0 {
                    h = (h * grow).min(self.ctrl.max_step);
                }
            } else {
                self.stats.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        self.h = Some(h);
        Ok(())
    }

    fn initial_step(&self, target: f64) -> f64 {
        let scale = |v: &[Complex64]| v.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let d0 = scale(&self.y).max(1.0);
        let d1 = scale(&self.k[0]);
        let span = (target - self.t).abs();
        let h = if d1 > 0.0 { 0.01 * d0 / d1 } else { span };
        (h * self.ctrl.tol.powf(0.2) * 10.0).min(span).max(span * 1e-12)
    }
}

/// Integrate from `t0` to `tf` in one call.
pub fn integrate(
    system: impl System,
    t0: f64,
    tf: f64,
    y0: Vec<Complex64>,
    ctrl: StepControl,
) -> Result<(Vec<Complex64>, StepStats)> {
    let mut it = Integrator::new(system, t0, y0, ctrl)?;
    it.advance_to(tf, |_, _| Ok(()))?;
    Ok((it.y, it.stats))
}
