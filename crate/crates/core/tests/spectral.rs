use std::f64::consts::PI;

use bogoliubov::geometry::{BoundarySpec, Domain, SyncSpacetime};
use bogoliubov::spectral::{
    align_basis, basis_with_labels, instantaneous_basis, orthonormality_residual, regularize_zero_mode, ModeLabel,
    OperatorSpec, SpectralMethod,
};
use bogoliubov::{Complex64, Error};
use proptest::prelude::*;

fn torus(length: f64, mass: f64) -> SyncSpacetime {
    SyncSpacetime::builder(Domain::interval(0.0, length).unwrap(), BoundarySpec::Periodic)
        .flat()
        .mass(mass)
        .build()
        .unwrap()
}

fn fd(points: usize) -> OperatorSpec {
    OperatorSpec::new().with_method(SpectralMethod::FiniteDifference).with_grid_points(points)
}

#[test]
fn torus_frequency_matches_dispersion() {
    let st = torus(1000.0, 0.1);
    let b = instantaneous_basis(&OperatorSpec::new(), &st, 0.0, 3).unwrap();
    let labels: Vec<i64> = b.labels().iter().map(|l| l.0[0]).collect();
    assert_eq!(labels, vec![-1, 0, 1]);
    let expected = ((2.0 * PI / 1000.0).powi(2) + 0.01).sqrt();
    assert!((b.omegas()[2] - expected).abs() < 1e-15);
    assert!((b.omegas()[2] - 0.1002).abs() < 1e-4);
    assert!(orthonormality_residual(&b, &st, 0.0).unwrap() < 1e-12);
}

#[test]
fn dirichlet_box_ground_state() {
    let st = SyncSpacetime::builder(Domain::with_lengths(&[1.0, 1.0, 1.0]).unwrap(), BoundarySpec::Dirichlet)
        .flat()
        .build()
        .unwrap();
    let b = instantaneous_basis(&OperatorSpec::new(), &st, 0.0, 4).unwrap();
    let ground = b.index_of(&ModeLabel(vec![1, 1, 1])).unwrap();
    assert!((b.omegas()[ground] - 3.0_f64.sqrt() * PI).abs() < 1e-13);
    assert!(orthonormality_residual(&b, &st, 0.0).unwrap() < 1e-12);
}

#[test]
fn normalization_by_volume_integral() {
    let st = torus(3.0, 0.4);
    let b = instantaneous_basis(&OperatorSpec::new(), &st, 0.0, 3).unwrap();
    let w = b.omegas()[2];
    let k = 2.0 * PI / 3.0;
    let amp = 1.0 / (3.0 * 2.0 * w).sqrt();
    let v: f64 = bogoliubov::geometry::volume_integral(&st, 0.0, |x| {
        (Complex64::from_polar(amp, k * x[0]) * Complex64::from_polar(amp, -k * x[0])).re
    })
    .unwrap();
    assert!((v - 1.0 / (2.0 * w)).abs() < 1e-14);
}

#[test]
fn finite_differences_match_torus_modes() {
    let st = torus(1000.0, 0.1);
    let exact = instantaneous_basis(&OperatorSpec::new(), &st, 0.0, 7).unwrap();
    let approx = instantaneous_basis(&fd(2048), &st, 0.0, 7).unwrap();
    let mut e: Vec<f64> = exact.omegas().iter().map(|w| w * w).collect();
    e.sort_by(f64::total_cmp);
    let worst = approx
        .omegas()
        .iter()
        .zip(&e)
        .map(|(w, x)| (w * w - x).abs() / x)
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
    assert!(orthonormality_residual(&approx, &st, 0.0).unwrap() < 1e-8);
}

#[test]
fn finite_differences_converge_at_second_order() {
    let st = torus(10.0, 0.5);
    let exact = (2.0 * 2.0 * PI / 10.0_f64).powi(2) + 0.25;
    let errors: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&p| {
            let b = instantaneous_basis(&fd(p), &st, 0.0, 5).unwrap();
            (b.omegas()[4].powi(2) - exact).abs()
        })
        .collect();
    for pair in errors.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!((order - 2.0).abs() < 0.05, "{order}");
    }
}

#[test]
fn finite_differences_on_a_warped_circle() {
    let warp = |x: f64| 1.0 + 0.3 * (2.0 * PI * x).sin();
    let st = SyncSpacetime::builder(Domain::interval(0.0, 1.0).unwrap(), BoundarySpec::Periodic)
        .metric(
            move |_, x| nalgebra::DMatrix::from_element(1, 1, warp(x[0]).powi(2)),
            |_, _| nalgebra::DMatrix::zeros(1, 1),
        )
        .mass(1.0)
        .build()
        .unwrap();
    // proper length is 1 because the sine averages out
    let b = instantaneous_basis(&fd(1024), &st, 0.0, 3).unwrap();
    let exact = (2.0 * PI).powi(2) + 1.0;
    assert!((b.omegas()[1].powi(2) - exact).abs() / exact < 1e-4);
    assert!((b.omegas()[2].powi(2) - exact).abs() / exact < 1e-4);
    assert!(orthonormality_residual(&b, &st, 0.0).unwrap() < 1e-8);
}

fn robin_roots(gamma: f64, length: f64, count: usize) -> Vec<f64> {
    // zeros of (k² - γ²) sin(kL) - 2γk cos(kL)
    let g = |k: f64| (k * k - gamma * gamma) * (k * length).sin() - 2.0 * gamma * k * (k * length).cos();
    let mut roots = Vec::new();
    let mut a = 1e-6;
    while roots.len() < count {
        let b = a + 1e-3;
        if g(a) * g(b) < 0.0 {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if g(lo) * g(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
    }
    roots
}

#[test]
fn robin_interval_matches_transcendental_roots() {
    let gamma = 2.0;
    let st = SyncSpacetime::builder(Domain::interval(0.0, 1.0).unwrap(), BoundarySpec::robin_constant(gamma).unwrap())
        .flat()
        .build()
        .unwrap();
    let roots = robin_roots(gamma, 1.0, 3);
    let err = |p: usize| {
        let b = instantaneous_basis(&OperatorSpec::new().with_grid_points(p), &st, 0.0, 3).unwrap();
        b.omegas().iter().zip(&roots).map(|(w, k)| (w * w - k * k).abs() / (k * k)).fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(400), err(800));
    assert!(fine < 1e-4, "{fine}");
    assert!(((coarse / fine).log2() - 2.0).abs() < 0.1);
}

#[test]
fn dirichlet_modes_vanish_on_the_boundary() {
    let st = SyncSpacetime::builder(Domain::interval(0.0, 2.0).unwrap(), BoundarySpec::Dirichlet)
        .flat()
        .mass(0.3)
        .build()
        .unwrap();
    let b = instantaneous_basis(&fd(512), &st, 0.0, 4).unwrap();
    for m in b.modes() {
        assert_eq!(m[0], Complex64::new(0.0, 0.0));
        assert_eq!(m[m.len() - 1], Complex64::new(0.0, 0.0));
    }
    assert!(orthonormality_residual(&b, &st, 0.0).unwrap() < 1e-10);
}

#[test]
fn eigen_residual_on_the_grid() {
    let st = SyncSpacetime::builder(Domain::interval(0.0, 1.0).unwrap(), BoundarySpec::Neumann)
        .metric(
            |_, x| nalgebra::DMatrix::from_element(1, 1, 1.0 + 0.5 * x[0] * x[0]),
            |_, _| nalgebra::DMatrix::zeros(1, 1),
        )
        .mass(0.7)
        .build()
        .unwrap();
    let op = fd(600);
    let b = instantaneous_basis(&op, &st, 0.0, 5).unwrap();
    for n in 0..5 {
        let w2 = b.omegas()[n].powi(2);
        let lhs = op.apply_on_grid(&st, 0.0, b.mode(n)).unwrap();
        let worst = lhs.iter().zip(b.mode(n)).map(|(a, f)| (a - f * w2).norm()).fold(0.0, f64::max);
        let scale = b.mode(n).iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        assert!(worst < 1e-6 * w2 * scale, "{n}: {worst}");
    }
}

#[test]
fn neumann_zero_mode_and_regularization() {
    let st = SyncSpacetime::builder(Domain::with_lengths(&[1.0, 2.0]).unwrap(), BoundarySpec::Neumann)
        .flat()
        .build()
        .unwrap();
    let op = OperatorSpec::new();
    assert!(matches!(instantaneous_basis(&op, &st, 0.0, 3), Err(Error::ZeroMode { .. })));
    let reg = regularize_zero_mode(&op, 1e-3).unwrap();
    let b = instantaneous_basis(&reg, &st, 0.0, 3).unwrap();
    let min = b.omegas().iter().copied().fold(f64::INFINITY, f64::min);
    assert!((min - 1e-3).abs() < 1e-15);
    assert!(matches!(regularize_zero_mode(&op, 0.0), Err(Error::InvalidArgument(_))));
}

#[test]
fn negative_operator_is_rejected() {
    let st = SyncSpacetime::builder(Domain::interval(0.0, 1.0).unwrap(), BoundarySpec::Neumann)
        .flat()
        .coupling(1.0)
        .spatial_curvature(|_, _| -5.0)
        .mass(1.0)
        .build()
        .unwrap();
    let r = instantaneous_basis(&fd(64), &st, 0.0, 2);
    assert!(matches!(r, Err(Error::NegativeEigenvalue { .. })));
}

#[test]
fn alignment_is_identity_on_equal_bases() {
    let st = torus(5.0, 0.2);
    let b = instantaneous_basis(&fd(128), &st, 0.0, 5).unwrap();
    let a = align_basis(&b, &b).unwrap();
    for n in 0..5 {
        let d = a.mode(n).iter().zip(b.mode(n)).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(d < 1e-12, "{n}: {d}");
    }
}

#[test]
fn alignment_undoes_sign_flips() {
    let st = SyncSpacetime::builder(Domain::interval(0.0, 1.0).unwrap(), BoundarySpec::Dirichlet)
        .flat()
        .mass(1.0)
        .build()
        .unwrap();
    let b = instantaneous_basis(&fd(256), &st, 0.0, 4).unwrap();
    let flips = [-1.0, 1.0, -1.0, -1.0].map(|s| Complex64::new(s, 0.0));
    let flipped = b.rephased(&flips).unwrap();
    let a = align_basis(&b, &flipped).unwrap();
    for n in 0..4 {
        let overlap = b.inner(a.mode(n), b.mode(n));
        assert!(overlap.re > 0.0 && overlap.im.abs() < 1e-14);
        let d = a.mode(n).iter().zip(b.mode(n)).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(d < 1e-12);
    }
}

#[test]
fn alignment_keeps_torus_labels() {
    let a_of = |t: f64| 1.0 + 0.1 * t;
    let st = SyncSpacetime::builder(Domain::interval(0.0, 1.0).unwrap(), BoundarySpec::Periodic)
        .uniform_diagonal_metric(move |t| vec![a_of(t).powi(2)], move |t| vec![0.2 * a_of(t)])
        .mass(1.0)
        .build()
        .unwrap();
    let op = OperatorSpec::new();
    let b0 = instantaneous_basis(&op, &st, 0.0, 5).unwrap();
    let b1 = instantaneous_basis(&op, &st, 3.0, 5).unwrap();
    let a = align_basis(&b0, &b1).unwrap();
    assert_eq!(a.labels(), b0.labels());
    let plus = ModeLabel::single(1);
    let i = a.index_of(&plus).unwrap();
    let overlap = b0.inner(a.mode(i), b0.mode(i));
    assert!(overlap.re > 0.0);
}

#[test]
fn degenerate_pairs_follow_the_previous_slice() {
    let a_of = |t: f64| 1.0 + 0.05 * t;
    let st = SyncSpacetime::builder(Domain::interval(0.0, 2.0).unwrap(), BoundarySpec::Periodic)
        .uniform_diagonal_metric(move |t| vec![a_of(t).powi(2)], move |t| vec![0.1 * a_of(t)])
        .mass(0.5)
        .build()
        .unwrap();
    let op = fd(128);
    let b0 = instantaneous_basis(&op, &st, 0.0, 5).unwrap();
    let b1 = align_basis(&b0, &instantaneous_basis(&op, &st, 0.2, 5).unwrap()).unwrap();
    assert!(orthonormality_residual(&b1, &st, 0.2).unwrap() < 1e-10);
    // shapes do not change under a uniform stretch, so the overlaps are diagonal
    for n in 0..5 {
        for m in 0..5 {
            let o = b1.inner(b1.mode(n), b0.mode(m)).norm() / b1.inner(b0.mode(m), b0.mode(m)).re.sqrt()
                / b1.inner(b1.mode(n), b1.mode(n)).re.sqrt();
            if n == m {
                assert!((o - 1.0).abs() < 1e-10, "{n}: {o}");
            } else {
                assert!(o < 1e-10, "{n},{m}: {o}");
            }
        }
    }
}

#[test]
fn explicit_labels_require_a_closed_form_family() {
    let st = torus(1.0, 1.0);
    let r = basis_with_labels(&fd(64), &st, 0.0, &[ModeLabel::single(1)]);
    assert!(matches!(r, Err(Error::UnsupportedGeometry(_))));
    let r = basis_with_labels(&OperatorSpec::new(), &st, 0.0, &[ModeLabel::single(1), ModeLabel::single(1)]);
    assert!(r.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn box_bases_are_orthonormal(lx in 0.5f64..3.0, ly in 0.5f64..3.0, mass in 0.0f64..2.0, n in 1usize..12) {
        let st = SyncSpacetime::builder(Domain::with_lengths(&[lx, ly]).unwrap(), BoundarySpec::Dirichlet)
            .flat()
            .mass(mass)
            .build()
            .unwrap();
        let b = instantaneous_basis(&OperatorSpec::new(), &st, 0.0, n).unwrap();
        prop_assert!(orthonormality_residual(&b, &st, 0.0).unwrap() < 1e-11);
        let sorted = b.labels().windows(2).all(|w| w[0] < w[1]);
        prop_assert!(sorted);
    }

    #[test]
    fn fd_operator_is_self_adjoint(seed in proptest::collection::vec(-1.0f64..1.0, 16), warp in 0.0f64..0.5) {
        let st = SyncSpacetime::builder(Domain::interval(0.0, 1.0).unwrap(), BoundarySpec::Neumann)
            .metric(
                move |_, x| nalgebra::DMatrix::from_element(1, 1, (1.0 + warp * x[0]).powi(2)),
                |_, _| nalgebra::DMatrix::zeros(1, 1),
            )
            .mass(0.5)
            .build()
            .unwrap();
        let op = fd(96);
        let grid = op.fd_grid(&st).unwrap();
        let w = grid.volume_weights(&st, 0.0).unwrap();
        let smooth = |c: &[f64]| -> Vec<Complex64> {
            (0..grid.len()).map(|i| {
                let x = grid.point(i)[0];
                let mut v = Complex64::new(0.0, 0.0);
                for (k, pair) in c.chunks(2).enumerate() {
                    v += Complex64::new(pair[0], pair[1]) * (PI * k as f64 * x).cos();
                }
                v
            }).collect()
        };
        let f = smooth(&seed[..8]);
        let g = smooth(&seed[8..]);
        let of = op.apply_on_grid(&st, 0.0, &f).unwrap();
        let og = op.apply_on_grid(&st, 0.0, &g).unwrap();
        let lhs: Complex64 = (0..w.len()).map(|i| of[i] * g[i].conj() * w[i]).sum();
        let rhs: Complex64 = (0..w.len()).map(|i| f[i] * og[i].conj() * w[i]).sum();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
    }
}
