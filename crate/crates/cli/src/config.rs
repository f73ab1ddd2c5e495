use bogoliubov::geometry::{BoundarySpec, Domain, SyncSpacetime};
use bogoliubov::scenarios::{FlrwConfig, GwCavityConfig};
use bogoliubov::spectral::{regularize_zero_mode, OperatorSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    GwCavity,
    Flrw,
    Custom,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::GwCavity => "gw_cavity",
            ScenarioKind::Flrw => "flrw",
            ScenarioKind::Custom => "custom",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// File stem; defaults to the config file stem.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub ode: Option<f64>,
    #[serde(default = "default_oracle_tol")]
    pub oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { ode: None, oracle: default_oracle_tol() }
    }
}

fn default_oracle_tol() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CustomBoundary {
    Periodic,
    Dirichlet,
    Neumann,
    Robin(f64),
}

/// Uniform diagonal metric `h_ii(t) = A + B tanh(rho t)` on every axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleProfile {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomConfig {
    pub lengths: Vec<f64>,
    pub boundary: CustomBoundary,
    #[serde(default)]
    pub mass: f64,
    #[serde(default)]
    pub mass_regulator: Option<f64>,
    pub scale: ScaleProfile,
    pub t0: f64,
    pub tf: f64,
    #[serde(default = "default_custom_modes")]
    pub n_modes: usize,
    #[serde(default = "default_custom_samples")]
    pub samples: usize,
    #[serde(default = "default_custom_tol")]
    pub tol: f64,
}

fn default_custom_modes() -> usize {
    4
}

fn default_custom_samples() -> usize {
    51
}

fn default_custom_tol() -> f64 {
    1e-10
}

impl CustomConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::Validation(m));
        if self.lengths.is_empty() || self.lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return bad(format!("lengths must be positive, got {:?}", self.lengths));
        }
        let ScaleProfile { a, b, rho } = self.scale;
        if !(a > b.abs()) || !rho.is_finite() {
            return bad(format!(
                "metric h_ii(t) = A + B tanh(rho t) must stay positive definite, which needs A > |B| (A = {a}, B = {b})"
            ));
        }
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return bad(format!("mass must be non-negative, got {}", self.mass));
        }
        if !(self.t0.is_finite() && self.tf.is_finite() && self.t0 < self.tf) {
            return bad(format!("need t0 < tf, got ({}, {})", self.t0, self.tf));
        }
        if self.n_modes == 0 || self.samples < 2 {
            return bad("n_modes must be at least 1 and samples at least 2".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        Ok(())
    }

    pub fn boundary_spec(&self) -> Result<BoundarySpec, Failure> {
        Ok(match self.boundary {
            CustomBoundary::Periodic => BoundarySpec::Periodic,
            CustomBoundary::Dirichlet => BoundarySpec::Dirichlet,
            CustomBoundary::Neumann => BoundarySpec::Neumann,
            CustomBoundary::Robin(gamma) => BoundarySpec::robin_constant(gamma)?,
        })
    }

    pub fn spacetime(&self) -> Result<SyncSpacetime, Failure> {
        let ScaleProfile { a, b, rho } = self.scale;
        let d = self.lengths.len();
        Ok(SyncSpacetime::builder(Domain::with_lengths(&self.lengths)?, self.boundary_spec()?)
            .uniform_diagonal_metric(
                move |t| vec![a + b * (rho * t).tanh(); d],
                move |t| vec![b * rho / (rho * t).cosh().powi(2); d],
            )
            .mass(self.mass)
            .check_times(&[self.t0, 0.5 * (self.t0 + self.tf), self.tf])
            .build()?)
    }

    pub fn operator(&self) -> Result<OperatorSpec, Failure> {
        match self.mass_regulator {
            Some(dm) => Ok(regularize_zero_mode(&OperatorSpec::new(), dm)?),
            None => Ok(OperatorSpec::new()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub gw_cavity: Option<GwCavityConfig>,
    #[serde(default)]
    pub flrw: Option<FlrwConfig>,
    #[serde(default)]
    pub custom: Option<CustomConfig>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub n_modes: Option<usize>,
    /// Seeds the randomized property checks.
    #[serde(default)]
    pub seed: Option<u64>,
}

/// The selected scenario block after overrides.
pub enum Scenario {
    Gw(GwCavityConfig),
    Flrw(FlrwConfig),
    Custom(CustomConfig),
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<(RunConfig, Value), Failure> {
        let value: Value = serde_json::from_str(text).map_err(|e| Failure::Validation(format!("config is not valid JSON: {e}")))?;
        let cfg: RunConfig =
            serde_json::from_value(value.clone()).map_err(|e| Failure::Validation(format!("config does not match the schema: {e}")))?;
        Ok((cfg, value))
    }

    /// Checks the block structure and tolerances, then applies CLI overrides.
    pub fn scenario(&self, tol: Option<f64>, n_modes: Option<usize>) -> Result<Scenario, Failure> {
        let present: Vec<&str> = [
            self.gw_cavity.as_ref().map(|_| "gw_cavity"),
            self.flrw.as_ref().map(|_| "flrw"),
            self.custom.as_ref().map(|_| "custom"),
        ]
        .into_iter()
        .flatten()
        .collect();
        if present != [self.scenario.name()] {
            return Err(Failure::Validation(format!(
                "exactly one scenario block named '{}' must be present, found {present:?}",
                self.scenario.name()
            )));
        }
        let tol = tol.or(self.tolerances.ode);
        if let Some(t) = tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Failure::Validation(format!("ODE tolerance must be positive, got {t}")));
            }
        }
        if !(self.tolerances.oracle > 0.0 && self.tolerances.oracle.is_finite()) {
            return Err(Failure::Validation(format!("oracle tolerance must be positive, got {}", self.tolerances.oracle)));
        }
        let n_modes = n_modes.or(self.n_modes);
        Ok(match self.scenario {
            ScenarioKind::GwCavity => {
                let mut c = self.gw_cavity.clone().unwrap();
                if let Some(n) = n_modes {
                    c.modes_per_axis = n;
                }
                Scenario::Gw(c)
            }
            ScenarioKind::Flrw => {
                let mut c = self.flrw.clone().unwrap();
                if let Some(n) = n_modes {
                    c.n_max = n;
                }
                if let Some(t) = tol {
                    c.tol = t;
                }
                Scenario::Flrw(c)
            }
            ScenarioKind::Custom => {
                let mut c = self.custom.clone().unwrap();
                if let Some(n) = n_modes {
                    c.n_modes = n;
                }
                if let Some(t) = tol {
                    c.tol = t;
                }
                Scenario::Custom(c)
            }
        })
    }
}

/// SHA-256 of the compact, key-sorted serialization of the input document.
pub fn config_hash(value: &Value) -> String {
    let canonical = serde_json::to_string(&sorted(value)).expect("JSON values always serialize");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn sorted(value: &Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            Value::Object(keys.into_iter().map(|k| (k.clone(), sorted(&map[k]))).collect())
        }
        Value::Array(items) => Value::Array(items.iter().map(sorted).collect()),
        other => other.clone(),
    }
}
