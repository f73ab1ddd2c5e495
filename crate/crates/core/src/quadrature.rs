//! Gauss-Legendre rules and composite integration helpers.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let rule = Arc::new(compute_rule(n));
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn compute_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1e-3) {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        let wi = 2.0 / ((1.0 - z * z) * d * d);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Composite Gauss-Legendre nodes and weights on `[a, b]`.
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(order);
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let left = a + p as f64 * h;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            nodes.push(left + 0.5 * h * (x + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    (nodes, weights)
}

/// Number of panels so that each covers at most a quarter period of `frequency`.
pub(crate) fn panels_for(length: f64, frequency: f64) -> usize {
    let per = (length.abs() * frequency.abs() / (2.0 * PI) * 4.0).ceil() as usize;
    per.max(8)
}

/// `∫_a^b f(t) e^{-i w t} dt` for each `w`, sharing the samples of `f`.
pub fn oscillatory_integrals(
    f: impl Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    frequencies: &[f64],
    bandwidth: f64,
) -> Vec<Complex64> {
    let top = frequencies.iter().fold(bandwidth.abs(), |m, w| m.max(w.abs() + bandwidth.abs()));
    let (nodes, weights) = composite_rule(a, b, panels_for(b - a, top), 16);
    let samples: Vec<Complex64> = nodes.iter().zip(&weights).map(|(&t, &w)| f(t) * w).collect();
    frequencies
        .iter()
        .map(|&freq| {
            nodes
                .iter()
                .zip(&samples)
                .map(|(&t, s)| s * Complex64::from_polar(1.0, -freq * t))
                .sum()
        })
        .collect()
}
