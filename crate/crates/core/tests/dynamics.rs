use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use phs_kit::dirac::{DiracKernelRep, Dims};
use phs_kit::discretize::{
    damped_oscillator, diffusion_system, forced_oscillator, oscillator, psi_potential, string_system, DiffusionSpec, ForceLaw,
    StringSpec,
};
use phs_kit::energy::{GeneralHamiltonian, QuadraticHamiltonian, ResistiveRelation};
use phs_kit::integrate::{consistent_init, simulate, simulate_with_stats, JacobianMode, Scheme, SchemeConfig};
use phs_kit::system::{assemble, Causality, PortSignal, Trajectory};
use phs_kit::verify::{bump, energy_report, mollify, strong_report, weak_residual, MollifierConfig, BUMP_NORMALIZATION};
use phs_kit::PhsError;

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(xs)
}

fn midpoint(dt: f64) -> SchemeConfig {
    SchemeConfig::new(Scheme::ImplicitMidpoint, dt)
}

/// Exact midpoint map for `ẋ = Jx`: a rotation by `2 atan(dt/2)` per step.
#[test]
fn oscillator_matches_closed_form_midpoint_map() {
    let sys = oscillator();
    let dt = 0.01;
    let traj = simulate(&sys, &v(&[1.0, 0.0]), &PortSignal::zeros(0), (0.0, 1.0), midpoint(dt)).unwrap();
    let theta = 2.0 * (dt / 2.0).atan();
    for (k, x) in traj.x.iter().enumerate() {
        let a = k as f64 * theta;
        assert!((x - v(&[a.cos(), -a.sin()])).amax() < 1e-12, "step {k}");
    }
}

#[test]
fn quadratic_energy_is_conserved_by_both_schemes() {
    let sys = oscillator();
    for scheme in [Scheme::ImplicitMidpoint, Scheme::DiscreteGradient] {
        let traj = simulate(&sys, &v(&[0.3, -1.2]), &PortSignal::zeros(0), (0.0, 20.0), SchemeConfig::new(scheme, 0.05)).unwrap();
        let h0 = 0.5 * traj.x[0].norm_squared();
        let drift = traj.x.iter().map(|x| (0.5 * x.norm_squared() - h0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-10, "{scheme:?}: {drift}");
    }
}

#[test]
fn zero_state_stays_at_rest() {
    let sys = damped_oscillator(0.7).unwrap();
    let traj = simulate(&sys, &v(&[0.0, 0.0]), &PortSignal::zeros(0), (0.0, 1.0), midpoint(0.1)).unwrap();
    assert!(traj.x.iter().all(|x| x.amax() == 0.0));
    assert!(traj.f_r.iter().chain(&traj.e_r).all(|z| z.amax() == 0.0));
}

#[test]
fn damped_oscillator_decays_like_the_ode() {
    let c = 0.4;
    let sys = damped_oscillator(c).unwrap();
    let t1 = 3.0;
    let traj = simulate(&sys, &v(&[1.0, 0.0]), &PortSignal::zeros(0), (0.0, t1), midpoint(1e-3)).unwrap();
    // x'' + c x' + x = 0, x(0) = 1, x'(0) = 0
    let w = (1.0 - c * c / 4.0_f64).sqrt();
    let s = -c / 2.0;
    let pos = (s * t1).exp() * ((w * t1).cos() - s / w * (w * t1).sin());
    let vel = (s * t1).exp() * (-(w + s * s / w)) * (w * t1).sin();
    let end = traj.x.last().unwrap();
    assert!((end[0] - pos).abs() < 1e-6 && (end[1] - vel).abs() < 1e-6, "{end} vs ({pos}, {vel})");
    let e = energy_report(&sys, &traj).unwrap();
    assert!(e.max_dissipated <= 0.0);
    assert!(e.cumulative_gap < 1e-10);
}

fn constraint_system(coupling: [f64; 2]) -> phs_kit::system::PhsSystem {
    let j = DMatrix::zeros(2, 2);
    let a = DMatrix::from_row_slice(2, 1, &coupling);
    let rep = DiracKernelRep::interconnection(Dims::new(2, 0, 1), &j, &a, &[false]).unwrap();
    assemble(rep, QuadraticHamiltonian::scaled_identity(2, 1.0), ResistiveRelation::none(), vec![Causality::Flow]).unwrap()
}

#[test]
fn consistent_init_projects_onto_the_constraint() {
    let sys = constraint_system([1.0, 0.0]);
    let init = consistent_init(&sys, &v(&[1.0, 1.0]), &v(&[0.5]), 1e-12).unwrap();
    assert!((&init.x0 - v(&[0.5, 1.0])).amax() < 1e-12);
    assert!((init.distance - 0.5).abs() < 1e-12);
    assert_eq!(init.algebraic_rows, 1);
    let again = consistent_init(&sys, &init.x0, &v(&[0.5]), 1e-12).unwrap();
    assert!((again.x0 - &init.x0).amax() < 1e-15);
    assert!(again.distance < 1e-15);
}

#[test]
fn consistent_init_reports_incompatible_data() {
    let sys = constraint_system([0.0, 0.0]);
    match consistent_init(&sys, &v(&[1.0, 1.0]), &v(&[0.5]), 1e-12) {
        Err(PhsError::Inconsistent { violation, .. }) => assert!((violation - 0.5).abs() < 1e-12),
        other => panic!("expected an inconsistency, got {other:?}"),
    }
}

#[test]
fn newton_failure_is_reported() {
    let s = string_system(&StringSpec::new(8, ForceLaw::Tanh { stiffness: 5.0 }).with_ends(Causality::Flow, Causality::Flow)).unwrap();
    let x0 = s.state(|_| 0.0, |xi| 2.0 * (PI * xi).cos());
    let mut cfg = SchemeConfig::new(Scheme::DiscreteGradient, 0.2).with_newton_tol(1e-14);
    cfg.newton_max_iter = 1;
    match simulate(&s.system, &x0, &PortSignal::zeros(2), (0.0, 1.0), cfg) {
        Err(PhsError::Newton { step, iterations, .. }) => assert_eq!((step, iterations), (0, 1)),
        other => panic!("expected a Newton failure, got {other:?}"),
    }
}

#[test]
fn leaving_the_energy_domain_is_an_error() {
    let ham = GeneralHamiltonian::new(
        2,
        |x: &DVector<f64>| -(1.0 - x[0] * x[0]).ln() + 0.5 * x[1] * x[1],
        |x: &DVector<f64>| v(&[2.0 * x[0] / (1.0 - x[0] * x[0]), x[1]]),
    )
    .with_domain(|x: &DVector<f64>| x[0].abs() < 1.0);
    let rep = DiracKernelRep::new(Dims::new(2, 0, 0), DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
    let sys = assemble(rep, ham, ResistiveRelation::none(), vec![]).unwrap();
    let r = simulate(&sys, &v(&[1.5, 0.0]), &PortSignal::zeros(0), (0.0, 1.0), midpoint(0.1));
    assert!(matches!(r, Err(PhsError::Domain(_))), "{r:?}");
}

#[test]
fn user_supplied_jacobian_agrees_with_finite_differences() {
    let s = string_system(&StringSpec::new(16, ForceLaw::Tanh { stiffness: 1.0 }).with_ends(Causality::Effort, Causality::Flow)).unwrap();
    let x0 = s.state(|xi| (PI * xi).sin(), |xi| 0.3 * (PI * xi).cos());
    let mut inputs = PortSignal::zeros(2);
    inputs.set(1, |t| 0.2 * t);
    let base = SchemeConfig::new(Scheme::DiscreteGradient, 1e-2);
    let (fd, _) = simulate_with_stats(&s.system, &x0, &inputs, (0.0, 1.0), base).unwrap();
    let (user, stats) =
        simulate_with_stats(&s.system, &x0, &inputs, (0.0, 1.0), base.with_jacobian(JacobianMode::UserSupplied)).unwrap();
    assert!(stats.jacobian_evaluations >= 1);
    let diff = fd.x.iter().zip(&user.x).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    assert!(diff < 1e-9, "{diff}");
}

/// Piecewise closed form of `ẋ₀ = x₁, ẋ₁ = −x₀ + u` with `u` a unit step at `ts`.
fn step_oracle(t: f64, ts: f64) -> (f64, f64) {
    if t < ts {
        return (t.cos(), -t.sin());
    }
    let (a, b) = (ts.cos() - 1.0, -ts.sin());
    let tau = t - ts;
    (1.0 + a * tau.cos() + b * tau.sin(), -a * tau.sin() + b * tau.cos())
}

#[test]
fn step_forced_oscillator_follows_piecewise_solution() {
    let sys = forced_oscillator();
    let ts = 0.5;
    let mut inputs = PortSignal::zeros(1);
    inputs.set(0, move |t| if t >= ts { 1.0 } else { 0.0 });
    let traj = simulate(&sys, &v(&[1.0, 0.0]), &inputs, (0.0, 2.0), midpoint(1e-3)).unwrap();
    let err = traj
        .t
        .iter()
        .zip(&traj.x)
        .map(|(&t, x)| {
            let (p, q) = step_oracle(t, ts);
            (x[0] - p).abs().max((x[1] - q).abs())
        })
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");

    assert!(weak_residual(&sys, &traj).unwrap().max_residual < 1e-4);
    let strong = strong_report(&sys, &traj).unwrap();
    assert!(strong.passes(1e-8), "interval defect {}", strong.max_interval_defect);
    assert_eq!(strong.worst_node, 500);
    assert!(strong.max_node_defect * strong.normalization > 0.1);
}

#[test]
fn weak_residual_detects_a_corrupted_trajectory() {
    let sys = oscillator();
    let mut traj = simulate(&sys, &v(&[1.0, 0.0]), &PortSignal::zeros(0), (0.0, 1.0), midpoint(1e-2)).unwrap();
    let clean = weak_residual(&sys, &traj).unwrap().max_residual;
    traj.x[40][0] += 1e-2;
    let dirty = weak_residual(&sys, &traj).unwrap();
    assert!(dirty.max_residual > 100.0 * clean);
    assert!(dirty.worst_node.abs_diff(40) <= 1, "{}", dirty.worst_node);
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

#[test]
fn bump_constant_matches_independent_quadrature() {
    let raw = |s: f64| if s.abs() >= 1.0 { 0.0 } else { (-1.0 / (1.0 - s * s)).exp() };
    let integral = adaptive_simpson(&raw, -1.0, 1.0, 1e-15);
    assert!((1.0 / integral - BUMP_NORMALIZATION).abs() < 1e-12, "{}", 1.0 / integral);
    assert!((adaptive_simpson(&bump, -1.0, 1.0, 1e-15) - 1.0).abs() < 1e-12);
}

#[test]
fn mollifying_a_linear_trajectory_is_exact() {
    let t: Vec<f64> = (0..=400).map(|k| k as f64 * 0.005).collect();
    let x: Vec<DVector<f64>> = t.iter().map(|&s| v(&[2.0 * s - 1.0])).collect();
    let empty = vec![DVector::zeros(0); 400];
    let traj = Trajectory::new(t, x, empty.clone(), empty.clone(), empty.clone(), empty).unwrap();
    let smooth = mollify(&traj, &MollifierConfig::new(10)).unwrap();
    assert!(smooth.t[0] >= 0.1 - 1e-12);
    for (s, x) in smooth.t.iter().zip(&smooth.x) {
        assert!((x[0] - (2.0 * s - 1.0)).abs() < 1e-10);
    }
}

#[test]
fn tanh_potential_matches_log_cosh() {
    let psi = psi_potential(&ForceLaw::Tanh { stiffness: 1.0 }, 0.3, 1.0);
    assert!((psi - 0.433_780_830_483_027_2).abs() < 1e-12, "{psi}");
    let lin = psi_potential(&ForceLaw::Linear { stiffness: 3.0 }, 0.0, -0.5);
    assert!((lin - 0.375).abs() < 1e-14);
}

fn skew_block(sys: &phs_kit::system::PhsSystem) -> DMatrix<f64> {
    let n_s = sys.dims().n_s;
    -sys.dirac().g_s().rows(0, n_s).into_owned()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn string_interconnection_is_lossless(seed in any::<u64>(), n in 2usize..24) {
        let s = string_system(&StringSpec::new(n, ForceLaw::Tanh { stiffness: 2.0 }).with_ends(Causality::Flow, Causality::Flow)).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let x = DVector::from_fn(2 * n + 1, |_, _| rng.random_range(-1.0..1.0));
        let grad = s.system.hamiltonian().grad(&x).unwrap();
        let xdot = skew_block(&s.system) * &grad;
        prop_assert!(grad.dot(&xdot).abs() < 1e-12 * (1.0 + grad.norm_squared()));
    }
}

#[test]
fn free_linear_string_has_chain_frequencies() {
    let mut errors = Vec::new();
    for n in [8, 16, 32, 64] {
        let s = string_system(&StringSpec::new(n, ForceLaw::Linear { stiffness: 1.0 }).with_ends(Causality::Flow, Causality::Flow)).unwrap();
        let q = s.system.hamiltonian().hessian(&DVector::zeros(2 * n + 1)).unwrap().unwrap();
        let eig = (skew_block(&s.system) * q).complex_eigenvalues();
        assert!(eig.iter().all(|z| z.re.abs() < 1e-9), "non-imaginary eigenvalue");
        let lowest = eig.iter().map(|z| z.im.abs()).filter(|w| *w > 1e-6).fold(f64::INFINITY, f64::min);
        let h = 1.0 / n as f64;
        let chain = 2.0 / h * (PI * h / 2.0).sin();
        assert!((lowest - chain).abs() < 1e-9, "n = {n}: {lowest} vs {chain}");
        errors.push((lowest - PI).abs());
    }
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn insulated_diffusion_conserves_mass_and_dissipates() {
    let d = diffusion_system(&DiffusionSpec::new(32).with_coefficient(|xi| 1.0 + 0.5 * xi)).unwrap();
    let x0 = d.state(|xi| (3.0 * xi).sin() + xi * xi);
    let traj = simulate(&d.system, &x0, &PortSignal::zeros(2), (0.0, 0.5), midpoint(1e-3)).unwrap();
    let m0 = d.mass(&x0);
    assert!(traj.x.iter().all(|x| (d.mass(x) - m0).abs() < 1e-12));
    let e = energy_report(&d.system, &traj).unwrap();
    assert!(e.max_h_increase <= 0.0 && e.max_dissipated <= 0.0);
    assert!(e.passes(1e-10));
}

#[test]
fn prescribed_trace_diffusion_needs_consistent_start() {
    let d = diffusion_system(&DiffusionSpec::new(16).with_ends(Causality::Flow, Causality::Flow)).unwrap();
    let guess = d.state(|xi| 1.0 + xi);
    let init = consistent_init(&d.system, &guess, &v(&[0.0, 0.0]), 1e-12).unwrap();
    let dims = d.system.dims();
    assert_eq!(init.algebraic_rows, dims.n_r + dims.n_p);
    assert!(init.residual < 1e-12);
    let traj = simulate(&d.system, &init.x0, &PortSignal::zeros(2), (0.0, 0.2), midpoint(1e-3)).unwrap();
    let e = energy_report(&d.system, &traj).unwrap();
    assert!(e.h_final < e.h_initial);
    assert!(e.max_h_increase <= 0.0);
}
