use std::f64::consts::PI;

use bogoliubov::geometry::{BoundarySpec, Domain, SyncSpacetime};
use bogoliubov::perturbation::{
    asymptotic_coefficients, delta_coupling_from_modes, delta_coupling_operator_form, equivalence_reduce, resonance_scan,
    window_coefficients, ChannelKind, DeltaCoupling, DeltaTerm, PerturbationSpec, PerturbationTerm, PerturbedModes,
    SpatialOperator, TimeProfile,
};
use bogoliubov::scenarios::GwCavityConfig;
use bogoliubov::spectral::{basis_with_labels, ModeBasis, ModeLabel, OperatorSpec};
use bogoliubov::{CMatrix, Complex64, Error, Warning};
use nalgebra::DMatrix;
use proptest::prelude::*;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn gw(lengths: [f64; 3], eps: f64) -> (GwCavityConfig, ModeBasis, PerturbationSpec) {
    let cfg = GwCavityConfig::new(lengths, eps);
    let basis = cfg.static_basis().unwrap();
    let spec = cfg.perturbation(&basis).unwrap();
    (cfg, basis, spec)
}

fn omega0(lengths: [f64; 3], l: &[i64]) -> f64 {
    (0..3).map(|i| (PI * l[i] as f64 / lengths[i]).powi(2)).sum::<f64>().sqrt()
}

fn gaussian_spec(cfg: &GwCavityConfig, basis: &ModeBasis, tau: f64) -> PerturbationSpec {
    let mut c = cfg.clone();
    c.tau = Some(tau);
    c.perturbation(basis).unwrap()
}

#[test]
fn wave_couples_each_mode_only_to_its_partner() {
    let lengths = [1.0, 2.0, 1.0];
    let (cfg, basis, spec) = gw(lengths, 1e-5);
    let dc = delta_coupling_from_modes(&basis, &spec).unwrap();
    let omega = cfg.drive_frequency();
    for t in [0.0, 0.13, 1.7] {
        let (a, b) = dc.at(t);
        assert_eq!(max_abs(&a), 0.0);
        for (i, li) in basis.labels().iter().enumerate() {
            for j in 0..basis.n_modes() {
                if i != j {
                    assert!(b[(i, j)].norm() < 1e-14, "{li} {j} {}", b[(i, j)]);
                    continue;
                }
                let kx = PI * li.0[0] as f64 / lengths[0];
                let ky = PI * li.0[1] as f64 / lengths[1];
                let w = omega0(lengths, &li.0);
                let expected = I * (kx * kx - ky * ky) / (2.0 * w) * (omega * t).sin();
                assert!((b[(i, i)] - expected).norm() < 1e-12 * (1.0 + expected.norm()), "{li}");
            }
        }
    }
}

#[test]
fn zero_perturbation_gives_zero_couplings() {
    let (_, basis, spec) = gw([1.0, 2.0, 1.0], 1e-5);
    let mut zero = PerturbationSpec::new(0.0).unwrap();
    for t in spec.terms() {
        zero = zero.term(t.clone());
    }
    for dc in [delta_coupling_from_modes(&basis, &zero).unwrap(), delta_coupling_operator_form(&basis, &zero).unwrap()] {
        let (a, b) = dc.at(0.4);
        assert_eq!(max_abs(&a) + max_abs(&b), 0.0);
        let w = window_coefficients(&dc, &basis, 0.0, 10.0).unwrap().matrix;
        assert!(w.max_difference(&bogoliubov::evolution::BogoliubovMatrix::identity(basis.n_modes())) == 0.0);
    }
    let n = basis.n_modes();
    let empty = PerturbationSpec::new(1e-3)
        .unwrap()
        .term(PerturbationTerm::new(TimeProfile::sine(2.0)).modes(PerturbedModes::frequencies_only(vec![0.0; n])));
    let (a, b) = delta_coupling_from_modes(&basis, &empty).unwrap().at(0.3);
    assert_eq!(max_abs(&a) + max_abs(&b), 0.0);
    let asym = asymptotic_coefficients(&DeltaCoupling::new(1e-3, n, vec![]).unwrap(), &basis).unwrap();
    assert_eq!(asym, bogoliubov::evolution::BogoliubovMatrix::identity(n));
}

#[test]
fn square_cross_section_has_no_diagonal_coupling_for_equal_indices() {
    let (_, basis, spec) = gw([1.5, 1.5, 1.0], 1e-4);
    let (_, b) = delta_coupling_from_modes(&basis, &spec).unwrap().at(0.2);
    for (i, l) in basis.labels().iter().enumerate() {
        if l.0[0] == l.0[1] {
            assert_eq!(b[(i, i)].norm(), 0.0, "{l}");
        } else {
            assert!(b[(i, i)].norm() > 1e-3, "{l}");
        }
    }
}

#[test]
fn operator_and_mode_forms_share_resonant_amplitudes() {
    let (cfg, basis, spec) = gw([1.0, 2.0, 1.0], 1e-5);
    let modes = delta_coupling_from_modes(&basis, &spec).unwrap();
    let op = delta_coupling_operator_form(&basis, &spec).unwrap();
    let window = 1e-6;
    let r1 = resonance_scan(&modes, &basis, window).unwrap();
    let r2 = resonance_scan(&op, &basis, window).unwrap();
    assert_eq!(r1.entries.len(), 1);
    assert_eq!(r1.entries.len(), r2.entries.len());
    for (a, b) in r1.entries.iter().zip(&r2.entries) {
        assert_eq!((a.kind, &a.n, &a.m), (b.kind, &b.n, &b.m));
        assert!((a.rate - b.rate).norm() < 1e-8 * a.rate.norm());
    }
    // every β channel agrees, resonant or not; α differs only on the diagonal
    let (am, bm) = modes.at(0.37);
    let (ao, bo) = op.at(0.37);
    assert!(max_abs(&(&bm - &bo)) < 1e-12 * max_abs(&bm));
    let mut off = ao.clone();
    off.fill_diagonal(Complex64::new(0.0, 0.0));
    assert!(max_abs(&off) < 1e-14 && max_abs(&am) == 0.0);
    assert!(cfg.drive_frequency() > 0.0);
}

#[test]
fn cross_polarization_leaves_diagonal_channels_untouched() {
    let (cfg, basis, _) = gw([1.0, 2.0, 1.0], 1e-5);
    let mut cross = DMatrix::zeros(3, 3);
    cross[(0, 1)] = 1.0;
    cross[(1, 0)] = 1.0;
    let spec = PerturbationSpec::new(1e-5)
        .unwrap()
        .term(PerturbationTerm::new(TimeProfile::sine(cfg.drive_frequency())).operator(SpatialOperator::new().constant_second_order(cross)));
    let dc = delta_coupling_operator_form(&basis, &spec).unwrap();
    let (a, b) = dc.at(0.21);
    for i in 0..basis.n_modes() {
        assert!(a[(i, i)].norm() < 1e-13 && b[(i, i)].norm() < 1e-13, "{}", basis.labels()[i]);
    }
    assert!(resonance_scan(&dc, &basis, 1e-3).unwrap().is_empty());
}

#[test]
fn uniform_potential_shift_is_diagonal() {
    let (_, basis, _) = gw([1.0, 2.0, 1.0], 1e-5);
    let c = 0.7;
    let spec = PerturbationSpec::new(1e-4)
        .unwrap()
        .term(PerturbationTerm::new(TimeProfile::cosine(3.0)).operator(SpatialOperator::new().potential(move |_| c)));
    let dc = delta_coupling_operator_form(&basis, &spec).unwrap();
    let (a, b) = (&dc.terms()[0].alpha, &dc.terms()[0].beta);
    for i in 0..basis.n_modes() {
        let w = basis.omegas()[i];
        for j in 0..basis.n_modes() {
            if i == j {
                assert!((b[(i, i)] + I * c / (2.0 * w)).norm() < 1e-13);
                assert!((a[(i, i)] - I * c / (2.0 * w)).norm() < 1e-13);
            } else {
                assert!(a[(i, j)].norm() < 1e-14 && b[(i, j)].norm() < 1e-14);
            }
        }
    }
}

fn dirichlet_line(length: f64, n: i64) -> ModeBasis {
    let st = SyncSpacetime::builder(Domain::interval(0.0, length).unwrap(), BoundarySpec::Dirichlet)
        .flat()
        .mass(0.5)
        .build()
        .unwrap();
    let labels: Vec<ModeLabel> = (1..=n).map(ModeLabel::single).collect();
    basis_with_labels(&OperatorSpec::new(), &st, 0.0, &labels).unwrap()
}

/// `<cos(2πx/L) Φ_n, Φ_m>` for unit-interval Dirichlet modes, by trigonometric identities.
fn cosine_element(basis: &ModeBasis, i: usize, j: usize) -> f64 {
    let (n, m) = (basis.labels()[i].0[0], basis.labels()[j].0[0]);
    let hits = i64::from((n - m).abs() == 2) - i64::from(n + m == 2);
    hits as f64 / (4.0 * (basis.omegas()[i] * basis.omegas()[j]).sqrt())
}

#[test]
fn inhomogeneous_potential_forms_agree() {
    let length = 1.0;
    let basis = dirichlet_line(length, 6);
    let n = basis.n_modes();
    let op = SpatialOperator::new().potential(move |x| (2.0 * PI * x[0] / length).cos());
    // perturbed shapes built from the closed-form matrix elements
    let mut shapes = vec![vec![Complex64::new(0.0, 0.0); basis.grid().len()]; n];
    let mut shifts = vec![0.0; n];
    for i in 0..n {
        let wi = basis.omegas()[i];
        shifts[i] = cosine_element(&basis, i, i) * 2.0 * wi / (2.0 * wi);
        for j in 0..n {
            if i != j {
                let wj = basis.omegas()[j];
                let coef = cosine_element(&basis, i, j) * 2.0 * wj / (wi * wi - wj * wj);
                for (s, v) in shapes[i].iter_mut().zip(basis.mode(j)) {
                    *s += v * coef;
                }
            }
        }
    }
    let spec = PerturbationSpec::new(1e-4).unwrap().term(
        PerturbationTerm::new(TimeProfile::constant())
            .operator(op.clone())
            .modes(PerturbedModes { delta_omegas: shifts.clone(), delta_modes: Some(shapes) }),
    );
    let from_modes = delta_coupling_from_modes(&basis, &spec).unwrap();
    let from_op = delta_coupling_operator_form(&basis, &spec).unwrap();
    let (am, bm) = from_modes.at(0.0);
    let (ao, bo) = from_op.at(0.0);
    for i in 0..n {
        for j in 0..n {
            let v = cosine_element(&basis, i, j);
            if i != j {
                assert!((ao[(i, j)] - I * v).norm() < 1e-12, "{i} {j}");
                assert!((am[(i, j)] - ao[(i, j)]).norm() < 1e-8 * (v.abs() + 1e-3));
            }
            assert!((bm[(i, j)] - bo[(i, j)]).norm() < 1e-8 * (v.abs() + 1e-3), "{i} {j} {} {}", bm[(i, j)], bo[(i, j)]);
        }
    }
    let library = PerturbedModes::first_order(&basis, &op).unwrap();
    for i in 0..n {
        assert!((library.delta_omegas[i] - shifts[i]).abs() < 1e-12);
    }
}

#[test]
fn resonant_beta_grows_with_predicted_slope() {
    let lengths = [1.0, 2.0, 1.0];
    let eps = 1e-5;
    let (cfg, basis, spec) = gw(lengths, eps);
    let omega = cfg.drive_frequency();
    assert!((omega - 2.0 * 1.5 * PI).abs() < 1e-12);
    let dc = delta_coupling_from_modes(&basis, &spec).unwrap();
    let idx = basis.index_of(&ModeLabel(vec![1, 1, 1])).unwrap();
    let times: Vec<f64> = (1..=20).map(|k| k as f64 * 10.0).collect();
    let values: Vec<f64> =
        times.iter().map(|&t| window_coefficients(&dc, &basis, 0.0, t).unwrap().matrix.beta[(idx, idx)].re).collect();
    let (mt, mv) = (times.iter().sum::<f64>() / 20.0, values.iter().sum::<f64>() / 20.0);
    let slope = times.iter().zip(&values).map(|(t, v)| (t - mt) * (v - mv)).sum::<f64>()
        / times.iter().map(|t| (t - mt).powi(2)).sum::<f64>();
    let expected = eps * PI / 8.0;
    assert!((slope / expected - 1.0).abs() < 5e-3, "{slope} {expected}");
    let report = resonance_scan(&dc, &basis, 1e-6).unwrap();
    assert_eq!(report.entries.len(), 1);
    assert!((report.entries[0].rate - expected).norm() < 1e-12 * expected);
}

#[test]
fn detuned_drive_follows_sinc_envelope() {
    let lengths = [1.0, 2.0, 1.0];
    let eps = 1e-5;
    let (cfg, basis, _) = gw(lengths, eps);
    let idx = basis.index_of(&ModeLabel(vec![1, 1, 1])).unwrap();
    let dt = 200.0;
    let at = |shift: f64| {
        let mut c = cfg.clone();
        c.omega = Some(cfg.drive_frequency() + shift);
        let spec = c.perturbation(&basis).unwrap();
        let dc = delta_coupling_from_modes(&basis, &spec).unwrap();
        window_coefficients(&dc, &basis, 0.0, dt).unwrap().matrix.beta[(idx, idx)].norm()
    };
    let base = at(0.0);
    for x in [0.05, 0.1, 0.2, -0.2] {
        let shift = x / dt;
        let sinc = (shift * dt / 2.0).sin() / (shift * dt / 2.0);
        let ratio = at(shift) / base;
        assert!((ratio / sinc - 1.0).abs() < 0.02, "{x} {ratio} {sinc}");
    }
}

#[test]
fn gaussian_packet_matches_closed_form() {
    let lengths = [1.0, 2.0, 1.0];
    let eps = 1e-5;
    let (cfg, basis, _) = gw(lengths, eps);
    let idx = basis.index_of(&ModeLabel(vec![1, 1, 1])).unwrap();
    let w0 = omega0(lengths, &[1, 1, 1]);
    let kx2_minus_ky2 = PI * PI - (PI / 2.0).powi(2);
    for (shift, tau) in [(0.0, 3.0), (0.0, 8.0), (0.3, 5.0), (-1.0, 2.5)] {
        let mut c = cfg.clone();
        c.omega = Some(2.0 * w0 + shift);
        let omega = c.omega.unwrap();
        let spec = gaussian_spec(&c, &basis, tau);
        let dc = delta_coupling_from_modes(&basis, &spec).unwrap();
        let asym = asymptotic_coefficients(&dc, &basis).unwrap();
        let closed = eps * PI.sqrt() * kx2_minus_ky2 / (4.0 * w0)
            * tau
            * ((-(omega - 2.0 * w0).powi(2) * tau * tau / 4.0).exp() - (-(omega + 2.0 * w0).powi(2) * tau * tau / 4.0).exp());
        let got = asym.beta[(idx, idx)];
        assert!((got - closed).norm() < 1e-10 * closed.abs(), "{got} {closed}");
        if omega * tau >= 20.0 {
            let numeric = window_coefficients(&dc, &basis, -5.0 * tau, 5.0 * tau).unwrap().matrix.beta[(idx, idx)];
            assert!((numeric - got).norm() < 0.01 * got.norm(), "{numeric} {got}");
        }
    }
    let (_, _, periodic) = gw(lengths, eps);
    let dc = delta_coupling_from_modes(&basis, &periodic).unwrap();
    assert_eq!(asymptotic_coefficients(&dc, &basis), Err(Error::NonDecayingProfile));
}

#[test]
fn transient_profile_fourier_matches_gaussian() {
    let (omega, tau) = (3.0, 2.0);
    let g = TimeProfile::gaussian_sine(omega, tau).unwrap();
    let f = TimeProfile::transient(
        move |t| Complex64::new((-(t / tau).powi(2)).exp() * (omega * t).sin(), 0.0),
        (-14.0 * tau, 14.0 * tau),
        omega + 4.0 / tau,
    )
    .unwrap();
    for nu in [-4.0, 0.0, 2.5, 3.0, 6.1] {
        let (a, b) = (g.fourier(nu).unwrap(), f.fourier(nu).unwrap());
        assert!((a - b).norm() < 1e-12, "{nu} {a} {b}");
    }
}

#[test]
fn short_windows_are_flagged() {
    let (cfg, basis, spec) = gw([1.0, 2.0, 1.0], 1e-5);
    let dc = delta_coupling_from_modes(&basis, &spec).unwrap();
    let short = window_coefficients(&dc, &basis, 0.0, 0.5 / cfg.drive_frequency()).unwrap();
    assert!(matches!(short.warnings[..], [Warning::WindowViolation { .. }]));
    let long = window_coefficients(&dc, &basis, 0.0, 1e3 / cfg.drive_frequency()).unwrap();
    assert!(long.warnings.is_empty());
    let too_long = window_coefficients(&dc, &basis, 0.0, 1e5 / cfg.drive_frequency()).unwrap();
    assert_eq!(too_long.warnings.len(), 1);
}

#[test]
fn missing_eigen_data_is_reported() {
    let (_, basis, _) = gw([1.0, 2.0, 1.0], 1e-5);
    let spec = PerturbationSpec::from_uniform_metric(
        1e-5,
        &DMatrix::identity(3, 3),
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, 0.0])),
        TimeProfile::sine(2.0),
    )
    .unwrap();
    assert!(matches!(delta_coupling_from_modes(&basis, &spec), Err(Error::MissingPerturbedModes(_))));
    assert!(delta_coupling_operator_form(&basis, &spec).is_ok());
    let short = PerturbationSpec::new(1e-5)
        .unwrap()
        .term(PerturbationTerm::new(TimeProfile::sine(2.0)).modes(PerturbedModes::frequencies_only(vec![0.0; 3])));
    assert!(matches!(delta_coupling_from_modes(&basis, &short), Err(Error::MissingPerturbedModes(_))));
}

#[test]
fn metric_trace_adds_expansion_rate() {
    let (_, basis, _) = gw([1.0, 2.0, 1.0], 1e-5);
    let h0 = DMatrix::identity(3, 3);
    let dh = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 1.0]));
    let spec = PerturbationSpec::from_uniform_metric(1e-5, &h0, dh.clone(), TimeProfile::sine(2.0)).unwrap();
    assert_eq!(spec.terms().len(), 2);
    let dc = delta_coupling_operator_form(&basis, &spec).unwrap();
    // the rate term carries δq = (3/2) d/dt sin(2t)
    let b = &dc.terms()[1].beta;
    for i in 0..basis.n_modes() {
        assert!((b[(i, i)] + Complex64::new(0.75, 0.0)).norm() < 1e-12);
    }
    assert!(PerturbationSpec::from_uniform_metric(1e-5, &h0, dh, TimeProfile::gaussian_sine(2.0, 1.0).unwrap()).is_err());
}

#[test]
fn reduction_removes_non_resonant_additions() {
    let (_, basis, spec) = gw([1.0, 2.0, 1.0], 1e-5);
    let dc = delta_coupling_from_modes(&basis, &spec).unwrap();
    let n = basis.n_modes();
    let w = basis.omegas().to_vec();
    let (i, j) = (0, 3);
    let wt = 1.3;
    // dX/dt - i(ω_i - ω_j) X with X = e^{i ω_T t}
    let mut a = CMatrix::zeros(n, n);
    a[(i, j)] = I * (wt - (w[i] - w[j]));
    let extra = DeltaCoupling::new(
        dc.epsilon(),
        n,
        vec![DeltaTerm { profile: TimeProfile::exponential(wt, Complex64::new(1.0, 0.0)), alpha: a, beta: CMatrix::zeros(n, n) }],
    )
    .unwrap();
    let window = 1e-3;
    let reduced = equivalence_reduce(&extra, &basis, window).unwrap();
    assert!(reduced.terms().is_empty());
    let both = equivalence_reduce(&dc.plus(&extra).unwrap(), &basis, window).unwrap();
    let plain = equivalence_reduce(&dc, &basis, window).unwrap();
    assert_eq!(both.terms().len(), plain.terms().len());
    for (x, y) in both.terms().iter().zip(plain.terms()) {
        assert_eq!(x.alpha, y.alpha);
        assert_eq!(x.beta, y.beta);
    }
    // already minimal input comes back unchanged
    let again = equivalence_reduce(&plain, &basis, window).unwrap();
    assert_eq!(again.terms().len(), plain.terms().len());
    for (x, y) in again.terms().iter().zip(plain.terms()) {
        assert_eq!((x.alpha.clone(), x.beta.clone()), (y.alpha.clone(), y.beta.clone()));
    }
    assert_eq!(resonance_scan(&reduced, &basis, window).unwrap().entries.len(), 0);
}

#[test]
fn off_resonant_drive_gives_empty_report() {
    let (cfg, basis, _) = gw([1.0, 2.0, 1.0], 1e-5);
    let mut c = cfg.clone();
    c.omega = Some(cfg.drive_frequency() + 0.37);
    let spec = c.perturbation(&basis).unwrap();
    let dc = delta_coupling_from_modes(&basis, &spec).unwrap();
    assert!(resonance_scan(&dc, &basis, 1e-3).unwrap().is_empty());
}

#[test]
fn degenerate_pairs_resonate_at_zero_frequency() {
    let st = SyncSpacetime::builder(Domain::interval(0.0, 1.0).unwrap(), BoundarySpec::Periodic)
        .flat()
        .mass(0.4)
        .build()
        .unwrap();
    let labels: Vec<ModeLabel> = (-2..=2).map(ModeLabel::single).collect();
    let basis = basis_with_labels(&OperatorSpec::new(), &st, 0.0, &labels).unwrap();
    let spec = PerturbationSpec::new(1e-4).unwrap().term(
        PerturbationTerm::new(TimeProfile::constant())
            .operator(SpatialOperator::new().potential(|x| (4.0 * PI * x[0]).cos())),
    );
    let dc = delta_coupling_operator_form(&basis, &spec).unwrap();
    let report = resonance_scan(&dc, &basis, 1e-6).unwrap();
    let alphas: Vec<_> = report.entries.iter().filter(|e| e.kind == ChannelKind::Alpha).collect();
    assert!(!alphas.is_empty());
    assert!(alphas.iter().all(|e| e.n != e.m && e.resonant_frequency.abs() < 1e-12));
    assert!(alphas.iter().all(|e| e.n.0[0] == -e.m.0[0]));
}

fn random_addition(basis: &ModeBasis, seed: &[(usize, usize, f64, f64, f64)], eps: f64, kind: ChannelKind) -> DeltaCoupling {
    let n = basis.n_modes();
    let w = basis.omegas();
    let terms = seed
        .iter()
        .map(|&(i, j, freq, re, im)| {
            let (i, j) = (i % n, j % n);
            let c = Complex64::new(re, im);
            let mut m = CMatrix::zeros(n, n);
            let base = match kind {
                ChannelKind::Alpha => w[i] - w[j],
                ChannelKind::Beta => w[i] + w[j],
            };
            m[(i, j)] = I * c * (freq - base);
            let (alpha, beta) = match kind {
                ChannelKind::Alpha => (m, CMatrix::zeros(n, n)),
                ChannelKind::Beta => (CMatrix::zeros(n, n), m),
            };
            DeltaTerm { profile: TimeProfile::exponential(freq, Complex64::new(1.0, 0.0)), alpha, beta }
        })
        .collect();
    DeltaCoupling::new(eps, n, terms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn basis_changes_do_not_move_resonances(
        seed in prop::collection::vec((0usize..8, 0usize..8, -20.0f64..20.0, -1.0f64..1.0, -1.0f64..1.0), 1..6),
        alpha_kind in any::<bool>(),
    ) {
        let eps = 1e-5;
        let (cfg, basis, spec) = gw([1.0, 2.0, 1.0], eps);
        let dc = delta_coupling_from_modes(&basis, &spec).unwrap();
        let kind = if alpha_kind { ChannelKind::Alpha } else { ChannelKind::Beta };
        let changed = dc.plus(&random_addition(&basis, &seed, eps, kind)).unwrap();
        let window = 1e-6;
        let before = resonance_scan(&dc, &basis, window).unwrap();
        let after = resonance_scan(&changed, &basis, window).unwrap();
        let idx = basis.index_of(&ModeLabel(vec![1, 1, 1])).unwrap();
        let rate = before.entries[0].rate.norm();
        let moved = after.find(ChannelKind::Beta, &before.entries[0].n, &before.entries[0].m).unwrap().rate.norm();
        prop_assert!((moved - rate).abs() < 10.0 * eps * rate);
        // the coefficients only pick up a bounded O(ε) offset
        let bound: f64 = seed.iter().map(|s| 2.0 * eps * Complex64::new(s.3, s.4).norm()).sum::<f64>() + 1e-15;
        let t = 300.0 / cfg.drive_frequency();
        let x = window_coefficients(&dc, &basis, 0.0, t).unwrap().matrix;
        let y = window_coefficients(&changed, &basis, 0.0, t).unwrap().matrix;
        prop_assert!(x.max_difference(&y) <= bound * (1.0 + 1e-9), "{} > {}", x.max_difference(&y), bound);
        prop_assert!((y.beta[(idx, idx)].norm() / x.beta[(idx, idx)].norm() - 1.0).abs() < 10.0 * eps + bound / x.beta[(idx, idx)].norm());
    }

    #[test]
    fn operator_and_mode_forms_agree_for_random_potentials(
        coeffs in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let basis = dirichlet_line(1.3, 7);
        let c = coeffs.clone();
        let op = SpatialOperator::new().potential(move |x| {
            c[0] + c[1] * (2.0 * PI * x[0] / 1.3).cos() + c[2] * x[0] * x[0]
        });
        let pm = PerturbedModes::first_order(&basis, &op).unwrap();
        let spec = PerturbationSpec::new(1e-4).unwrap().term(PerturbationTerm::new(TimeProfile::cosine(2.0)).operator(op).modes(pm));
        let a = resonance_scan(&delta_coupling_from_modes(&basis, &spec).unwrap(), &basis, 10.0).unwrap();
        let b = resonance_scan(&delta_coupling_operator_form(&basis, &spec).unwrap(), &basis, 10.0).unwrap();
        prop_assert_eq!(a.entries.len(), b.entries.len());
        for (x, y) in a.entries.iter().zip(&b.entries) {
            prop_assert!((x.rate - y.rate).norm() <= 1e-8 * x.rate.norm().max(1e-12));
        }
    }
}
