use std::f64::consts::PI;

use bogoliubov::coupling::InstantaneousFamily;
use bogoliubov::evolution::{evolve_q, evolve_q_series, identity_residual, EvolveOptions, FamilyDriver};
use bogoliubov::perturbation::{
    delta_coupling_from_modes, resonance_scan, window_coefficients, ChannelKind, DeltaCoupling, DeltaTerm, ResonanceReport,
    TimeProfile,
};
use bogoliubov::scenarios::{flrw_run, gw_cavity_run, FlrwConfig, GwCavityConfig};
use bogoliubov::{CMatrix, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::CustomConfig;
use crate::record::{column_label, resonance_rows, OracleComparison, Residual, ResonanceRow, Series};
use crate::Failure;

/// Everything in a result record except the run metadata.
pub struct Body {
    pub series: Series,
    pub resonance_report: Vec<ResonanceRow>,
    pub identity_residuals: Vec<Residual>,
    pub oracle_comparisons: Vec<OracleComparison>,
    pub warnings: Vec<String>,
    pub convergence: Convergence,
}

pub struct Convergence {
    pub change: f64,
    pub limit: f64,
    pub refinement: String,
}

const CONVERGENCE_LIMIT: f64 = 1e-6;

pub fn flrw(cfg: &FlrwConfig, oracle_tol: f64) -> Result<Body, Failure> {
    let out = flrw_run(cfg)?;
    let shown: Vec<_> = out.curves.iter().filter(|c| c.n.is_some_and(|n| n >= 1)).collect();
    let mut series = Series::default();
    series.columns.push("t".into());
    series.columns.extend(shown.iter().map(|c| format!("beta_sq_{}", c.n.unwrap())));
    series.columns.extend(shown.iter().map(|c| format!("oracle_{}", c.n.unwrap())));
    if let Some(first) = out.curves.first() {
        for (i, t) in first.t.iter().enumerate() {
            let mut row = vec![*t];
            row.extend(shown.iter().map(|c| c.beta_sq[i]));
            row.extend(shown.iter().map(|c| c.oracle));
            series.rows.push(row);
        }
    }
    let mut comparisons: Vec<OracleComparison> = out
        .curves
        .iter()
        .map(|c| OracleComparison::new(format!("final |beta|^2, n = {}", c.n.unwrap()), c.final_beta_sq, c.oracle, oracle_tol))
        .collect();
    if let Some(x) = out.cross_check {
        comparisons.push(OracleComparison::absolute("evolve_q cross-check of |beta|^2".into(), x, 0.0, CONVERGENCE_LIMIT));
    }
    let residuals = out
        .curves
        .iter()
        .map(|c| Residual { matrix: format!("n = {}", c.n.unwrap()), value: c.identity_residual })
        .collect();

    let mut fine = cfg.clone();
    fine.tol = cfg.tol / 100.0;
    let refined = flrw_run(&fine)?;
    let change = out
        .curves
        .iter()
        .zip(&refined.curves)
        .map(|(a, b)| {
            let d = (a.final_beta_sq - b.final_beta_sq).abs();
            if b.final_beta_sq > 0.0 {
                d / b.final_beta_sq
            } else {
                d
            }
        })
        .fold(0.0, f64::max);
    Ok(Body {
        series,
        resonance_report: Vec::new(),
        identity_residuals: residuals,
        oracle_comparisons: comparisons,
        warnings: out.warnings.iter().map(ToString::to_string).collect(),
        convergence: Convergence { change, limit: CONVERGENCE_LIMIT, refinement: "ODE tolerance / 100".into() },
    })
}

fn beta_channels(report: &ResonanceReport) -> Vec<(String, bogoliubov::spectral::ModeLabel, bogoliubov::spectral::ModeLabel)> {
    report
        .entries
        .iter()
        .filter(|e| e.kind == ChannelKind::Beta)
        .map(|e| {
            let name = if e.n == e.m {
                format!("beta_sq_{}", column_label(&e.n))
            } else {
                format!("beta_sq_{}__{}", column_label(&e.n), column_label(&e.m))
            };
            (name, e.n.clone(), e.m.clone())
        })
        .collect()
}

pub fn gw(cfg: &GwCavityConfig, oracle_tol: f64, seed: Option<u64>) -> Result<Body, Failure> {
    let out = gw_cavity_run(cfg)?;
    let basis = &out.basis;
    let eps = cfg.epsilon;
    let channels = beta_channels(&out.report);
    let mut series = Series::default();
    series.columns.push("t".into());
    series.columns.extend(channels.iter().map(|c| c.0.clone()));
    let mut comparisons = Vec::new();
    let split = |label: &[i64], i: usize| {
        let k = |a: usize| PI * label[a] as f64 / cfg.lengths[a];
        (k(0) * k(0) - k(1) * k(1), basis.omegas()[i])
    };
    match cfg.tau {
        None => {
            for s in &out.series {
                let mut row = vec![s.t];
                row.extend(s.beta.iter().map(|b| b.norm_sqr()));
                series.rows.push(row);
            }
            for e in out.report.entries.iter().filter(|e| e.kind == ChannelKind::Beta && e.n == e.m) {
                let i = basis.index_of(&e.n).unwrap();
                let (d, w) = split(&e.n.0, i);
                comparisons.push(OracleComparison::new(format!("resonant beta rate {}", e.n), e.rate.re, eps * d / (4.0 * w), oracle_tol));
            }
        }
        Some(tau) => {
            let spec = cfg.perturbation(basis)?;
            let dc = delta_coupling_from_modes(basis, &spec)?;
            let idx: Vec<(usize, usize)> =
                channels.iter().map(|c| (basis.index_of(&c.1).unwrap(), basis.index_of(&c.2).unwrap())).collect();
            let (t0, tf) = (-5.0 * tau, 5.0 * tau);
            for s in 0..cfg.samples {
                let t = t0 + (tf - t0) * s as f64 / (cfg.samples - 1) as f64;
                let m = window_coefficients(&dc, basis, t0, t)?.matrix;
                let mut row = vec![t];
                row.extend(idx.iter().map(|&(a, b)| m.beta[(a, b)].norm_sqr()));
                series.rows.push(row);
            }
            let omega = out.drive_frequency;
            for (i, l) in basis.labels().iter().enumerate() {
                let (d, w) = split(&l.0, i);
                let closed = eps * PI.sqrt() * d / (4.0 * w)
                    * tau
                    * ((-(omega - 2.0 * w).powi(2) * tau * tau / 4.0).exp() - (-(omega + 2.0 * w).powi(2) * tau * tau / 4.0).exp());
                let got = out.coefficients.matrix.beta[(i, i)].re;
                comparisons.push(OracleComparison::new(format!("asymptotic beta {l}"), got, closed, oracle_tol));
            }
        }
    }
    comparisons.push(OracleComparison::absolute("operator vs mode form rates".into(), out.form_mismatch, 0.0, 1e-8));
    if let Some(shift) = out.regulator_shift {
        comparisons.push(OracleComparison::absolute("mass regulator shift of rates".into(), shift, 0.0, 1e-6));
    }
    if let (Some(seed), false) = (seed, out.report.is_empty()) {
        let shift = basis_change_shift(cfg, &out.report, seed)?;
        comparisons.push(OracleComparison::absolute("basis-change rate shift (relative)".into(), shift, 0.0, 10.0 * eps));
    }

    let mut fine = cfg.clone();
    fine.modes_per_axis = 2 * cfg.modes_per_axis;
    fine.samples = 2;
    let refined = gw_cavity_run(&fine)?;
    let mut change = 0.0_f64;
    for e in &out.report.entries {
        change = match refined.report.find(e.kind, &e.n, &e.m) {
            Some(f) => change.max((f.rate - e.rate).norm() / e.rate.norm()),
            None => f64::INFINITY,
        };
    }
    Ok(Body {
        series,
        resonance_report: resonance_rows(&out.report),
        identity_residuals: vec![Residual { matrix: "first-order coefficients".into(), value: identity_residual(&out.coefficients.matrix) }],
        oracle_comparisons: comparisons,
        warnings: out.coefficients.warnings.iter().map(ToString::to_string).collect(),
        convergence: Convergence { change, limit: CONVERGENCE_LIMIT, refinement: "modes per axis doubled".into() },
    })
}

/// Largest relative rate change under random near-identity basis changes.
fn basis_change_shift(cfg: &GwCavityConfig, report: &ResonanceReport, seed: u64) -> Result<f64, Failure> {
    let basis = cfg.static_basis()?;
    let dc = delta_coupling_from_modes(&basis, &cfg.perturbation(&basis)?)?;
    let (n, w) = (basis.n_modes(), basis.omegas().to_vec());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..16 {
        let terms = (0..rng.random_range(1..6))
            .map(|_| {
                let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
                let freq = rng.random_range(-4.0 * w[n - 1]..4.0 * w[n - 1]);
                let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let alpha = rng.random_bool(0.5);
                let mut m = CMatrix::zeros(n, n);
                let base = if alpha { w[i] - w[j] } else { w[i] + w[j] };
                m[(i, j)] = Complex64::new(0.0, 1.0) * c * (freq - base);
                let (a, b) = if alpha { (m, CMatrix::zeros(n, n)) } else { (CMatrix::zeros(n, n), m) };
                DeltaTerm { profile: TimeProfile::exponential(freq, Complex64::new(1.0, 0.0)), alpha: a, beta: b }
            })
            .collect();
        let changed = dc.plus(&DeltaCoupling::new(cfg.epsilon, n, terms)?)?;
        let after = resonance_scan(&changed, &basis, cfg.resonance_window())?;
        for e in &report.entries {
            let moved = after.find(e.kind, &e.n, &e.m).map_or(0.0, |f| f.rate.norm());
            worst = worst.max((moved - e.rate.norm()).abs() / e.rate.norm());
        }
    }
    Ok(worst)
}

pub fn custom(cfg: &CustomConfig) -> Result<Body, Failure> {
    cfg.validate()?;
    let st = cfg.spacetime()?;
    let family = InstantaneousFamily::new(cfg.operator()?, st, cfg.n_modes, cfg.t0)?;
    let labels = family.labels();
    let driver = FamilyDriver::new(family, cfg.t0)?;
    let times: Vec<f64> =
        (1..cfg.samples).map(|i| cfg.t0 + (cfg.tf - cfg.t0) * i as f64 / (cfg.samples - 1) as f64).collect();
    let opts = EvolveOptions::new(cfg.tol);
    let runs = evolve_q_series(&driver, cfg.t0, &times, opts)?;

    let mut series = Series::default();
    series.columns.push("t".into());
    series.columns.extend(labels.iter().map(|l| format!("alpha_sq_{}", column_label(l))));
    series.columns.extend(labels.iter().map(|l| format!("beta_sq_{}", column_label(l))));
    let n = labels.len();
    let mut first = vec![cfg.t0];
    first.extend(std::iter::repeat_n(1.0, n));
    first.extend(std::iter::repeat_n(0.0, n));
    series.rows.push(first);
    let mut residuals = Vec::new();
    for (e, _) in &runs {
        let mut row = vec![e.t];
        row.extend((0..n).map(|i| e.matrix.alpha[(i, i)].norm_sqr()));
        row.extend((0..n).map(|i| e.matrix.beta.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>()));
        series.rows.push(row);
        residuals.push(Residual { matrix: format!("t = {:e}", e.t), value: e.identity_residual });
    }

    let refined = evolve_q(&driver, cfg.t0, cfg.tf, EvolveOptions::new(cfg.tol / 100.0))?;
    let change = runs.last().map_or(0.0, |(e, _)| e.matrix.max_difference(&refined.0.matrix));
    Ok(Body {
        series,
        resonance_report: Vec::new(),
        identity_residuals: residuals,
        oracle_comparisons: Vec::new(),
        warnings: Vec::new(),
        convergence: Convergence { change, limit: CONVERGENCE_LIMIT, refinement: "ODE tolerance / 100".into() },
    })
}
