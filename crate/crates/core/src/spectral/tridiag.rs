//! Lowest eigenpairs of symmetric tridiagonal matrices, optionally with a periodic corner.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// `d` on the diagonal, `e[i]` at `(i, i+1)`, `corner` at `(0, n-1)`.
#[derive(Clone, Debug)]
pub(crate) struct SymTridiagonal {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub corner: f64,
}

struct Factor {
    pivots: Vec<f64>,
    band: Vec<f64>,
    last: Vec<f64>,
}

impl SymTridiagonal {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.e[i - 1].abs();
            }
            if i + 1 < n {
                r += self.e[i].abs();
            }
            if n > 2 && (i == 0 || i == n - 1) {
                r += self.corner.abs();
            }
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// LDLᵀ of `T - σI` without pivoting; fill-in is confined to the last column.
    fn factor(&self, sigma: f64, tiny: f64) -> Factor {
        let n = self.len();
        let mut d: Vec<f64> = self.d.iter().map(|v| v - sigma).collect();
        let mut g = vec![0.0; n];
        if n >= 2 {
            g[n - 2] = self.e[n - 2];
            g[0] += self.corner;
        }
        let mut pivots = vec![0.0; n];
        let mut band = vec![0.0; n];
        let mut last = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            let mut p = d[i];
            if p.abs() < tiny {
                p = if p < 0.0 { -tiny } else { tiny };
            }
            pivots[i] = p;
            if i + 2 < n {
                let l = self.e[i] / p;
                band[i] = l;
                d[i + 1] -= l * self.e[i];
                g[i + 1] -= l * g[i];
            }
            let m = g[i] / p;
            last[i] = m;
            d[n - 1] -= m * g[i];
        }
        let mut p = d[n - 1];
        if p.abs() < tiny {
            p = if p < 0.0 { -tiny } else { tiny };
        }
        pivots[n - 1] = p;
        Factor { pivots, band, last }
    }

    /// Number of eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: f64, tiny: f64) -> usize {
        self.factor(sigma, tiny).pivots.iter().filter(|p| **p < 0.0).count()
    }

    fn solve_shifted(&self, sigma: f64, tiny: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let f = self.factor(sigma, tiny);
        let mut y = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if i + 2 < n {
                y[i + 1] -= f.band[i] * y[i];
            }
            y[n - 1] -= f.last[i] * y[i];
        }
        for i in 0..n {
            y[i] /= f.pivots[i];
        }
        let xn = y[n - 1];
        for i in (0..n.saturating_sub(1)).rev() {
            let mut v = y[i] - f.last[i] * xn;
            if i + 2 < n {
                v -= f.band[i] * y[i + 1];
            }
            y[i] = v;
        }
        y
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out: Vec<f64> = self.d.iter().zip(v).map(|(d, x)| d * x).collect();
        for i in 0..n - 1 {
            out[i] += self.e[i] * v[i + 1];
            out[i + 1] += self.e[i] * v[i];
        }
        if n > 2 {
            out[0] += self.corner * v[n - 1];
            out[n - 1] += self.corner * v[0];
        } else if n == 2 {
            out[0] += self.corner * v[1];
            out[1] += self.corner * v[0];
        }
        out
    }

    fn bisect(&self, k: usize, lo: f64, hi: f64, tiny: f64) -> f64 {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..300 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.count_below(mid, tiny) > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    }

    /// The `count` smallest eigenvalues (ascending) with orthonormal eigenvectors.
    ///
    /// Subspace iteration with a shift below the spectrum keeps every factorization positive definite.
    pub fn lowest(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.len();
        if count == 0 || count > n {
            return Err(Error::InvalidArgument(format!("cannot extract {count} eigenpairs from a matrix of size {n}")));
        }
        let (lo, hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let tiny = f64::EPSILON * scale * 1e-3;
        let block = (2 * count + 8).min(n);
        let (a, b) = (lo - 1e-12 * scale, hi + 1e-12 * scale);
        let first = self.bisect(0, a, b, tiny);
        let last = self.bisect(block - 1, a, b, tiny);
        let sigma = first - 0.25 * (last - first) - 1e-10 * scale;
        let mut v: Vec<Vec<f64>> = (0..block).map(|k| (0..n).map(|i| start_vector(i, k)).collect()).collect();
        orthonormalize(&mut v);
        let mut values = vec![0.0; block];
        for _ in 0..500 {
            let mut w: Vec<Vec<f64>> = v.iter().map(|x| self.solve_shifted(sigma, tiny, x)).collect();
            orthonormalize(&mut w);
            let tw: Vec<Vec<f64>> = w.iter().map(|x| self.matvec(x)).collect();
            let h = DMatrix::from_fn(block, block, |i, j| 0.5 * (dot(&w[i], &tw[j]) + dot(&w[j], &tw[i])));
            let eig = SymmetricEigen::new(h);
            let mut order: Vec<usize> = (0..block).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            let mut worst = 0.0_f64;
            for (slot, &c) in order.iter().enumerate() {
                values[slot] = eig.eigenvalues[c];
                let mut x = vec![0.0; n];
                let mut tx = vec![0.0; n];
                for (r, (wr, twr)) in w.iter().zip(&tw).enumerate() {
                    let q = eig.eigenvectors[(r, c)];
                    for i in 0..n {
                        x[i] += q * wr[i];
                        tx[i] += q * twr[i];
                    }
                }
                if slot < count {
                    let res = tx.iter().zip(&x).map(|(a, b)| (a - values[slot] * b).abs()).fold(0.0, f64::max);
                    worst = worst.max(res);
                }
                v[slot] = x;
            }
            if worst <= 1e-12 * scale {
                break;
            }
        }
        orthonormalize(&mut v);
        v.truncate(count);
        values.truncate(count);
        Ok((values, v))
    }
}

fn orthonormalize(v: &mut [Vec<f64>]) {
    for k in 0..v.len() {
        for _ in 0..2 {
            for j in 0..k {
                let (done, rest) = v.split_at_mut(k);
                let c = dot(&rest[0], &done[j]);
                for (x, y) in rest[0].iter_mut().zip(&done[j]) {
                    *x -= c * y;
                }
            }
        }
        normalize(&mut v[k]);
    }
}

fn start_vector(i: usize, k: usize) -> f64 {
    let x = (i as f64 + 1.0) * (0.618_033_988_749_895 + 0.137 * k as f64);
    (x.fract() - 0.5) + 1e-3 * ((i * 7 + k * 13) % 17) as f64
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
}
