//! Rectangular cavity in the field of a `+`-polarized gravitational wave
//! travelling along `z`: `h = diag(1 + ε f(t), 1 - ε f(t), 1)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coupling::InstantaneousFamily;
use crate::evolution::{evolve_q, EvolveOptions, Evolution, FamilyDriver, PhaseAccumulator};
use crate::geometry::{BoundarySpec, Domain, SyncSpacetime};
use crate::perturbation::{
    asymptotic_coefficients, delta_coupling_from_modes, delta_coupling_operator_form, resonance_scan, window_coefficients,
    ChannelKind, FirstOrder, PerturbationSpec, PerturbationTerm, PerturbedModes, ResonanceReport, SpatialOperator,
    TimeProfile,
};
use crate::spectral::{basis_with_labels, regularize_zero_mode, ModeBasis, ModeLabel, OperatorSpec};
use crate::{Complex64, Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CavityBoundary {
    #[default]
    Dirichlet,
    Neumann,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GwCavityConfig {
    pub lengths: [f64; 3],
    pub epsilon: f64,
    /// Wave frequency; defaults to twice the frequency of `resonant_mode`.
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default = "default_resonant_mode")]
    pub resonant_mode: [i64; 3],
    /// Gaussian envelope duration; `None` means a steady wave.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub boundary: CavityBoundary,
    #[serde(default = "default_modes_per_axis")]
    pub modes_per_axis: usize,
    /// Window length for a steady wave; defaults to `ε^{-1/2}/Ω`.
    #[serde(default)]
    pub duration: Option<f64>,
    /// Mass `dm` lifting the Neumann zero mode.
    #[serde(default = "default_regulator")]
    pub mass_regulator: f64,
    #[serde(default)]
    pub detuning_window: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_resonant_mode() -> [i64; 3] {
    [1, 1, 1]
}

fn default_modes_per_axis() -> usize {
    2
}

fn default_regulator() -> f64 {
    1e-3
}

fn default_samples() -> usize {
    101
}

impl GwCavityConfig {
    pub fn new(lengths: [f64; 3], epsilon: f64) -> Self {
        GwCavityConfig {
            lengths,
            epsilon,
            omega: None,
            resonant_mode: default_resonant_mode(),
            tau: None,
            boundary: CavityBoundary::Dirichlet,
            modes_per_axis: default_modes_per_axis(),
            duration: None,
            mass_regulator: default_regulator(),
            detuning_window: None,
            samples: default_samples(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!("cavity lengths must be positive, got {:?}", self.lengths)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("wave amplitude epsilon must be positive, got {}", self.epsilon)));
        }
        if let Some(w) = self.omega {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!("wave frequency Omega must be positive, got {w}")));
            }
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::InvalidArgument(format!("envelope duration tau must be positive, got {tau}")));
            }
        }
        if self.modes_per_axis == 0 {
            return Err(Error::InvalidArgument("modes_per_axis must be at least 1".into()));
        }
        if self.boundary == CavityBoundary::Neumann && !(self.mass_regulator > 0.0) {
            return Err(Error::InvalidArgument("a Neumann cavity needs a positive mass_regulator".into()));
        }
        if self.duration.is_some_and(|d| !(d > 0.0)) || self.detuning_window.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::InvalidArgument("duration and detuning_window must be positive".into()));
        }
        if self.samples < 2 {
            return Err(Error::InvalidArgument("samples must be at least 2".into()));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<ModeLabel> {
        let first = match self.boundary {
            CavityBoundary::Dirichlet => 1,
            CavityBoundary::Neumann => 0,
        };
        let axis = first..first + self.modes_per_axis as i64;
        let mut out = Vec::new();
        for a in axis.clone() {
            for b in axis.clone() {
                for c in axis.clone() {
                    out.push(ModeLabel(vec![a, b, c]));
                }
            }
        }
        out
    }

    fn regulator_sq(&self) -> f64 {
        match self.boundary {
            CavityBoundary::Dirichlet => 0.0,
            CavityBoundary::Neumann => self.mass_regulator.powi(2),
        }
    }

    /// Static frequency of a mode label.
    pub fn static_frequency(&self, label: [i64; 3]) -> f64 {
        let k2: f64 = (0..3).map(|i| (PI * label[i] as f64 / self.lengths[i]).powi(2)).sum();
        (k2 + self.regulator_sq()).sqrt()
    }

    pub fn drive_frequency(&self) -> f64 {
        self.omega.unwrap_or_else(|| 2.0 * self.static_frequency(self.resonant_mode))
    }

    pub fn window_length(&self) -> f64 {
        self.duration.unwrap_or_else(|| self.epsilon.powf(-0.5) / self.drive_frequency())
    }

    pub fn resonance_window(&self) -> f64 {
        self.detuning_window.unwrap_or_else(|| match self.tau {
            Some(tau) => 4.0 / tau,
            None => 2.0 * PI / self.window_length(),
        })
    }

    fn profile(&self) -> Result<TimeProfile> {
        match self.tau {
            Some(tau) => TimeProfile::gaussian_sine(self.drive_frequency(), tau),
            None => Ok(TimeProfile::sine(self.drive_frequency())),
        }
    }

    fn operator(&self, regulator: f64) -> Result<OperatorSpec> {
        match self.boundary {
            CavityBoundary::Dirichlet => Ok(OperatorSpec::new()),
            CavityBoundary::Neumann => regularize_zero_mode(&OperatorSpec::new(), regulator),
        }
    }

    fn boundary_spec(&self) -> BoundarySpec {
        match self.boundary {
            CavityBoundary::Dirichlet => BoundarySpec::Dirichlet,
            CavityBoundary::Neumann => BoundarySpec::Neumann,
        }
    }

    /// The unperturbed cavity.
    pub fn static_spacetime(&self) -> Result<SyncSpacetime> {
        SyncSpacetime::builder(Domain::with_lengths(&self.lengths)?, self.boundary_spec()).flat().build()
    }

    pub fn static_basis(&self) -> Result<ModeBasis> {
        self.static_basis_with(self.mass_regulator)
    }

    fn static_basis_with(&self, regulator: f64) -> Result<ModeBasis> {
        basis_with_labels(&self.operator(regulator)?, &self.static_spacetime()?, 0.0, &self.labels())
    }

    /// The wave as a perturbation: the operator change `f(t)(∂_x² - ∂_y²)`
    /// and the closed-form shifts `δω = (k_y² - k_x²)/(2ω)` with unchanged shapes.
    pub fn perturbation(&self, basis: &ModeBasis) -> Result<PerturbationSpec> {
        let delta_h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, 0.0]));
        let shifts = (0..basis.n_modes())
            .map(|n| {
                let k = basis.wavenumbers(n).ok_or_else(|| Error::MissingPerturbedModes("cavity modes must be closed form".into()))?;
                Ok((k[1] * k[1] - k[0] * k[0]) / (2.0 * basis.omegas()[n]))
            })
            .collect::<Result<Vec<f64>>>()?;
        let term = PerturbationTerm::new(self.profile()?)
            .operator(SpatialOperator::from_uniform_metric(&DMatrix::identity(3, 3), &delta_h)?)
            .metric(delta_h)
            .modes(PerturbedModes::frequencies_only(shifts));
        Ok(PerturbationSpec::new(self.epsilon)?.term(term))
    }

    /// The full metric `diag(1 + ε f, 1 - ε f, 1)`.
    pub fn spacetime(&self) -> Result<SyncSpacetime> {
        let (eps, w, tau) = (self.epsilon, self.drive_frequency(), self.tau);
        let shape = move |t: f64| -> (f64, f64) {
            match tau {
                Some(tau) => {
                    let g = (-(t / tau).powi(2)).exp();
                    (g * (w * t).sin(), g * (w * (w * t).cos() - 2.0 * t / (tau * tau) * (w * t).sin()))
                }
                None => ((w * t).sin(), w * (w * t).cos()),
            }
        };
        SyncSpacetime::builder(Domain::with_lengths(&self.lengths)?, self.boundary_spec())
            .uniform_diagonal_metric(
                move |t| {
                    let s = shape(t).0;
                    vec![1.0 + eps * s, 1.0 - eps * s, 1.0]
                },
                move |t| {
                    let d = shape(t).1;
                    vec![eps * d, -eps * d, 0.0]
                },
            )
            .build()
    }
}

/// Resonant `β` channel values at one window end time.
#[derive(Clone, Debug, PartialEq)]
pub struct GwSample {
    pub t: f64,
    pub beta: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct GwOutcome {
    pub basis: ModeBasis,
    pub drive_frequency: f64,
    pub report: ResonanceReport,
    /// Windowed over `[0, duration]` for a steady wave, asymptotic for a packet.
    pub coefficients: FirstOrder,
    pub window: Option<(f64, f64)>,
    /// Resonant `β` entries along the window, in report order.
    pub series: Vec<GwSample>,
    /// Largest relative disagreement of resonance rates between the mode and operator forms.
    pub form_mismatch: f64,
    /// Largest change of a resonance rate when the Neumann regulator is divided by ten.
    pub regulator_shift: Option<f64>,
}

pub fn gw_cavity_run(cfg: &GwCavityConfig) -> Result<GwOutcome> {
    cfg.validate()?;
    let basis = cfg.static_basis()?;
    let spec = cfg.perturbation(&basis)?;
    let window = cfg.resonance_window();
    let modes = delta_coupling_from_modes(&basis, &spec)?;
    let report = resonance_scan(&modes, &basis, window)?;
    let operator = resonance_scan(&delta_coupling_operator_form(&basis, &spec)?, &basis, window)?;
    let form_mismatch = compare_reports(&report, &operator);
    let regulator_shift = match cfg.boundary {
        CavityBoundary::Dirichlet => None,
        CavityBoundary::Neumann => {
            let fine = cfg.static_basis_with(cfg.mass_regulator / 10.0)?;
            let spec = cfg.perturbation(&fine)?;
            let other = resonance_scan(&delta_coupling_from_modes(&fine, &spec)?, &fine, window)?;
            Some(absolute_shift(&report, &other))
        }
    };
    let (coefficients, span, series) = match cfg.tau {
        Some(_) => (FirstOrder { matrix: asymptotic_coefficients(&modes, &basis)?, warnings: Vec::new() }, None, Vec::new()),
        None => {
            let tf = cfg.window_length();
            let coefficients = window_coefficients(&modes, &basis, 0.0, tf)?;
            let channels: Vec<(usize, usize)> = report
                .entries
                .iter()
                .filter(|e| e.kind == ChannelKind::Beta)
                .filter_map(|e| Some((basis.index_of(&e.n)?, basis.index_of(&e.m)?)))
                .collect();
            let mut series = Vec::with_capacity(cfg.samples);
            for i in 0..cfg.samples {
                let t = tf * i as f64 / (cfg.samples - 1) as f64;
                let m = window_coefficients(&modes, &basis, 0.0, t)?.matrix;
                series.push(GwSample { t, beta: channels.iter().map(|&(a, b)| m.beta[(a, b)]).collect() });
            }
            (coefficients, Some((0.0, tf)), series)
        }
    };
    Ok(GwOutcome {
        basis,
        drive_frequency: cfg.drive_frequency(),
        report,
        coefficients,
        window: span,
        series,
        form_mismatch,
        regulator_shift,
    })
}

fn compare_reports(a: &ResonanceReport, b: &ResonanceReport) -> f64 {
    let mut worst = 0.0_f64;
    for e in &a.entries {
        match b.find(e.kind, &e.n, &e.m) {
            Some(f) => worst = worst.max((e.rate - f.rate).norm() / e.rate.norm()),
            None => return f64::INFINITY,
        }
    }
    if b.entries.iter().any(|f| a.find(f.kind, &f.n, &f.m).is_none()) {
        return f64::INFINITY;
    }
    worst
}

fn absolute_shift(a: &ResonanceReport, b: &ResonanceReport) -> f64 {
    let mut worst = 0.0_f64;
    for e in a.entries.iter().chain(&b.entries) {
        let r1 = a.find(e.kind, &e.n, &e.m).map_or(Complex64::new(0.0, 0.0), |x| x.rate);
        let r2 = b.find(e.kind, &e.n, &e.m).map_or(Complex64::new(0.0, 0.0), |x| x.rate);
        worst = worst.max((r1 - r2).norm());
    }
    worst
}

/// Nonperturbative evolution of the listed modes on the full metric.
pub fn gw_nonperturbative(
    cfg: &GwCavityConfig,
    labels: &[ModeLabel],
    t0: f64,
    tf: f64,
    tol: f64,
) -> Result<(Evolution, PhaseAccumulator)> {
    cfg.validate()?;
    let family = InstantaneousFamily::with_labels(cfg.operator(cfg.mass_regulator)?, cfg.spacetime()?, labels.to_vec(), t0)?;
    let driver = FamilyDriver::new(family, t0)?;
    evolve_q(&driver, t0, tf, EvolveOptions::new(tol))
}
