//! Batch front end: `bogoliubov run <config>` and `bogoliubov validate <config>`.

mod config;
mod record;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use bogoliubov::scenarios::{CavityBoundary, GwCavityConfig};
use bogoliubov::spectral::{instantaneous_basis, regularize_zero_mode, OperatorSpec};
use clap::{Parser, Subcommand};

use config::{config_hash, Format, RunConfig, Scenario};
use record::{Metadata, ResultRecord};

#[derive(Parser)]
#[command(name = "bogoliubov", version, about = "Bogoliubov coefficients for confined fields in time-dependent spacetimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker thread cap for parallel sections
    #[arg(long, global = true, env = "BOGOLIUBOV_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its result files
    Run {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// Override the ODE tolerance
        #[arg(long)]
        tol: Option<f64>,
        /// Override the mode count of the scenario
        #[arg(long)]
        n_modes: Option<usize>,
    },
    /// Check a config without evolving anything
    Validate {
        config: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        n_modes: Option<usize>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
    Oracle(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Oracle(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) | Failure::Oracle(m) => m,
        }
    }
}

impl From<bogoliubov::Error> for Failure {
    fn from(e: bogoliubov::Error) -> Self {
        use bogoliubov::Error as E;
        match e {
            E::InvalidArgument(_)
            | E::UnsupportedGeometry(_)
            | E::NegativeEigenvalue { .. }
            | E::ZeroMode { .. }
            | E::SingularMetric { .. }
            | E::InconsistentMetricRate { .. }
            | E::MissingPerturbedModes(_)
            | E::DimensionMismatch { .. } => Failure::Validation(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn read_config(path: &Path) -> Result<(RunConfig, serde_json::Value), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text)
}

fn run(path: &Path, output_dir: &Path, tol: Option<f64>, n_modes: Option<usize>) -> Result<(), Failure> {
    let started = now();
    let (cfg, raw) = read_config(path)?;
    let scenario = cfg.scenario(tol, n_modes)?;
    let oracle_tol = cfg.tolerances.oracle;
    let body = match &scenario {
        Scenario::Flrw(c) => {
            c.validate()?;
            run::flrw(c, oracle_tol)?
        }
        Scenario::Gw(c) => {
            c.validate()?;
            run::gw(c, oracle_tol, cfg.seed)?
        }
        Scenario::Custom(c) => run::custom(c)?,
    };
    let record = ResultRecord {
        metadata: Metadata {
            config_hash: config_hash(&raw),
            scenario: cfg.scenario.name(),
            version: env!("CARGO_PKG_VERSION"),
            started_unix_s: started,
            finished_unix_s: now(),
            seed: cfg.seed,
            ode_tolerance: tol.or(cfg.tolerances.ode),
            n_modes: n_modes.or(cfg.n_modes),
            converged: body.convergence.change <= body.convergence.limit,
            convergence_change: body.convergence.change,
            convergence_limit: body.convergence.limit,
            refinement: body.convergence.refinement,
            warnings: body.warnings,
        },
        series: body.series,
        resonance_report: body.resonance_report,
        identity_residuals: body.identity_residuals,
        oracle_comparisons: body.oracle_comparisons,
    };

    let stem = cfg
        .output
        .name
        .clone()
        .unwrap_or_else(|| path.file_stem().map_or("result".into(), |s| s.to_string_lossy().into_owned()));
    let write = |name: String, contents: String| {
        let target = output_dir.join(name);
        std::fs::write(&target, contents).map_err(|e| Failure::Numerical(format!("cannot write {}: {e}", target.display())))
    };
    std::fs::create_dir_all(output_dir)
        .map_err(|e| Failure::Numerical(format!("cannot create {}: {e}", output_dir.display())))?;
    if cfg.output.format == Format::Csv {
        write(format!("{stem}.csv"), record.series.to_csv())?;
    }
    let json = serde_json::to_string_pretty(&record).map_err(|e| Failure::Numerical(e.to_string()))?;
    write(format!("{stem}.json"), json + "\n")?;
    print!("{}", record.summary());

    let failed: Vec<String> = record
        .oracle_comparisons
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{}: error {:e} > {:e}", c.quantity, c.error, c.tolerance))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Oracle(format!("oracle mismatch beyond tolerance: {}", failed.join("; "))))
    }
}

struct Report {
    lines: Vec<String>,
    ok: bool,
}

impl Report {
    fn check(&mut self, name: &str, outcome: Result<String, String>) -> bool {
        match outcome {
            Ok(detail) => {
                self.lines.push(format!("ok    {name}: {detail}"));
                true
            }
            Err(detail) => {
                self.lines.push(format!("FAIL  {name}: {detail}"));
                self.ok = false;
                false
            }
        }
    }

    fn hint(&mut self, text: &str) {
        self.lines.push(format!("hint  {text}"));
    }
}

/// Minimum eigenvalue of the spatial operator at the start of the run.
fn condition_d(op: &OperatorSpec, st: Result<bogoliubov::geometry::SyncSpacetime, Failure>, t0: f64) -> Result<f64, String> {
    let st = st.map_err(|f| f.message().to_string())?;
    match instantaneous_basis(op, &st, t0, 1) {
        Ok(b) => Ok(b.omegas()[0].powi(2)),
        Err(bogoliubov::Error::ZeroMode { value }) => Err(format!(
            "operator is only positive semidefinite: lowest eigenvalue {value:e} is a zero mode"
        )),
        Err(e) => Err(e.to_string()),
    }
}

fn gw_operator(c: &GwCavityConfig) -> OperatorSpec {
    match c.boundary {
        CavityBoundary::Neumann if c.mass_regulator > 0.0 => {
            regularize_zero_mode(&OperatorSpec::new(), c.mass_regulator).unwrap_or_else(|_| OperatorSpec::new())
        }
        _ => OperatorSpec::new(),
    }
}

fn validate(path: &Path, tol: Option<f64>, n_modes: Option<usize>) -> Report {
    let mut report = Report { lines: Vec::new(), ok: true };
    let parsed = read_config(path);
    let Some((cfg, raw)) = parsed.as_ref().ok() else {
        report.check("config parses", Err(parsed.err().unwrap().message().to_string()));
        return report;
    };
    report.check("config parses", Ok(format!("hash {}", config_hash(raw))));
    let scenario = match cfg.scenario(tol, n_modes) {
        Ok(s) => s,
        Err(f) => {
            report.check("scenario block and tolerances", Err(f.message().to_string()));
            return report;
        }
    };
    report.check("scenario block and tolerances", Ok(cfg.scenario.name().to_string()));
    let threshold = |v: f64| if v > 0.0 { Ok(format!("min eigenvalue {v:e} > 0")) } else { Err(format!("min eigenvalue {v:e}")) };
    match &scenario {
        Scenario::Flrw(c) => {
            report.check("parameters", c.validate().map(|_| "A > |B|, rho > 0, m >= 0, L > 0".into()).map_err(|e| e.to_string()));
            let (a, _) = c.scale(c.eta_span.0);
            let modes = c.modes();
            let d = if modes.is_empty() {
                Err("no modes to evolve".into())
            } else {
                let min = modes.iter().map(|&n| (c.wavenumber(n) / a).powi(2) + c.mass * c.mass).fold(f64::INFINITY, f64::min);
                threshold(min)
            };
            report.check("condition D", d);
        }
        Scenario::Gw(c) => {
            let params = c.validate().map(|_| "lengths, epsilon, Omega positive".into()).map_err(|e| e.to_string());
            report.check("parameters", params);
            let d = condition_d(&gw_operator(c), c.static_spacetime().map_err(Into::into), 0.0).and_then(threshold);
            if !report.check("condition D", d) && c.boundary == CavityBoundary::Neumann {
                report.hint("lift the Neumann zero mode with mass_regulator > 0 (regularize_zero_mode adds dm^2 to m^2)");
            }
        }
        Scenario::Custom(c) => {
            let params = c.validate().map(|_| "geometry, metric and time range".into()).map_err(|f| f.message().to_string());
            if !report.check("parameters", params) {
                return report;
            }
            let boundary = c.boundary_spec().map(|_| format!("{:?}", c.boundary)).map_err(|f| f.message().to_string());
            if !report.check("boundary", boundary) {
                return report;
            }
            let d = c
                .operator()
                .map_err(|f| f.message().to_string())
                .and_then(|op| condition_d(&op, c.spacetime(), c.t0))
                .and_then(threshold);
            if !report.check("condition D", d) && c.mass == 0.0 && c.mass_regulator.is_none() {
                report.hint("set mass_regulator > 0 so regularize_zero_mode lifts the zero mode, then take dm -> 0");
            }
        }
    }
    report
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: cannot set worker count: {e}");
        }
    }
    match cli.command {
        Command::Run { config, output_dir, tol, n_modes } => match run(&config, &output_dir, tol, n_modes) {
            Ok(()) => ExitCode::SUCCESS,
            Err(f) => {
                eprintln!("error: {}", f.message());
                ExitCode::from(f.code())
            }
        },
        Command::Validate { config, tol, n_modes } => {
            let report = validate(&config, tol, n_modes);
            for line in &report.lines {
                println!("{line}");
            }
            if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
