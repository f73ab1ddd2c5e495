use std::fmt::Write as _;

use bogoliubov::perturbation::ResonanceReport;
use bogoliubov::spectral::ModeLabel;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Metadata {
    pub config_hash: String,
    pub scenario: &'static str,
    pub version: &'static str,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub seed: Option<u64>,
    pub ode_tolerance: Option<f64>,
    pub n_modes: Option<usize>,
    /// True when the refined rerun changed the headline numbers by less than `convergence_limit`.
    pub converged: bool,
    pub convergence_change: f64,
    pub convergence_limit: f64,
    pub refinement: String,
    pub warnings: Vec<String>,
}

/// Plot-ready table. Every column after `t` is named after a mode label.
#[derive(Debug, Default, Serialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Serialize)]
pub struct ResonanceRow {
    pub kind: String,
    pub n: String,
    pub m: String,
    pub resonant_frequency: f64,
    pub rate_re: f64,
    pub rate_im: f64,
}

pub fn resonance_rows(report: &ResonanceReport) -> Vec<ResonanceRow> {
    report
        .entries
        .iter()
        .map(|e| ResonanceRow {
            kind: e.kind.to_string(),
            n: e.n.to_string(),
            m: e.m.to_string(),
            resonant_frequency: e.resonant_frequency,
            rate_re: e.rate.re,
            rate_im: e.rate.im,
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct Residual {
    pub matrix: String,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct OracleComparison {
    pub quantity: String,
    pub computed: f64,
    pub oracle: f64,
    pub error: f64,
    pub relative: bool,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleComparison {
    /// Relative comparison, falling back to absolute when the oracle vanishes.
    pub fn new(quantity: String, computed: f64, oracle: f64, tolerance: f64) -> Self {
        let relative = oracle != 0.0;
        let error = if relative { (computed - oracle).abs() / oracle.abs() } else { (computed - oracle).abs() };
        OracleComparison { quantity, computed, oracle, error, relative, tolerance, pass: error <= tolerance }
    }

    pub fn absolute(quantity: String, computed: f64, oracle: f64, tolerance: f64) -> Self {
        let error = (computed - oracle).abs();
        OracleComparison { quantity, computed, oracle, error, relative: false, tolerance, pass: error <= tolerance }
    }
}

#[derive(Debug, Serialize)]
pub struct ResultRecord {
    pub metadata: Metadata,
    pub series: Series,
    pub resonance_report: Vec<ResonanceRow>,
    pub identity_residuals: Vec<Residual>,
    pub oracle_comparisons: Vec<OracleComparison>,
}

impl ResultRecord {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let m = &self.metadata;
        let _ = writeln!(s, "scenario {} (config {})", m.scenario, &m.config_hash[..12]);
        let _ = writeln!(s, "resonant channels: {}", self.resonance_report.len());
        let worst = self.identity_residuals.iter().map(|r| r.value).fold(0.0, f64::max);
        let _ = writeln!(s, "max identity residual: {worst:e}");
        let failed = self.oracle_comparisons.iter().filter(|c| !c.pass).count();
        let _ = writeln!(s, "oracle comparisons: {} ({failed} failed)", self.oracle_comparisons.len());
        let _ = writeln!(s, "converged: {} (change {:e})", m.converged, m.convergence_change);
        for w in &m.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Label usable as a CSV column suffix.
pub fn column_label(l: &ModeLabel) -> String {
    l.0.iter().map(i64::to_string).collect::<Vec<_>>().join("_")
}
