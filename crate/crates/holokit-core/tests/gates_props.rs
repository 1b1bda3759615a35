mod common;

use holokit_core::gates::{
    self, analytic_gate, gate_fidelity, gate_from_phases, last_level_direction, pacman_loop, phase_integrals,
    solve_beta_for_phase, Loop, PhaseMethod, Profile, Schedule, Side, Which,
};
use holokit_core::model::{Arity, ModelConfig};
use holokit_core::{linalg, CMat, C64};
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn pacman_endpoints_midpoint_and_power_schedule() {
    let dir = last_level_direction(2);
    let lp = pacman_loop(3.0, 2.0, 4.0, 6.0, Schedule::Linear, &dir).unwrap();
    assert_eq!(lp.duration(), 14.0);
    assert_eq!(lp.eval(0.0, Side::Right).0, C64::new(0.0, 0.0));
    assert_eq!(lp.eval(14.0, Side::Left).0.norm(), 0.0);
    assert!((lp.eval(7.0, Side::Right).0 - C64::from_polar(3.0, 1.0)).norm() < 1e-14);
    let p2 = pacman_loop(3.0, 2.0, 4.0, 6.0, Schedule::Power(2.0), &dir).unwrap();
    assert!((p2.eval(2.0, Side::Right).0 - C64::new(0.75, 0.0)).norm() < 1e-14);
}

#[test]
fn alpha2_pi_yields_controlled_z_up_to_local_phases() {
    let dir = last_level_direction(2);
    let sol = solve_beta_for_phase(5.0, PI, Which::Alpha2).unwrap();
    let lp = Loop::new(Profile::Pacman(sol.pacman(5.0, 10.0, 10.0, Schedule::Linear).unwrap()), dir.clone()).unwrap();
    let ph = phase_integrals(&lp, PhaseMethod::Line).unwrap();
    let folded = (ph.alpha2 - PI).rem_euclid(2.0 * PI);
    assert!(folded.min(2.0 * PI - folded) <= 1e-8, "alpha2 = {}", ph.alpha2);
    let u = analytic_gate(&ModelConfig::default(), &lp, Arity::Two).unwrap().u;
    let local = gate_from_phases(&dir, -ph.alpha1, 0.0, Arity::Two);
    let cz = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(1.0, 0.0),
        C64::new(1.0, 0.0),
        C64::new(-1.0, 0.0),
    ]));
    assert!(linalg::max_abs(&(u * local - cz)) <= 1e-8);
}

#[test]
fn qutrit_single_gate_is_rank_one_phase() {
    let s = 1.0 / 3f64.sqrt();
    let dir = vec![C64::new(s, 0.0); 3];
    let lp = pacman_loop(1.3, 2.2, 1.0, 2.0, Schedule::Linear, &dir).unwrap();
    let cfg = ModelConfig { d: 3, ..ModelConfig::default() };
    let g = analytic_gate(&cfg, &lp, Arity::One).unwrap();
    let a1 = g.phases.unwrap().alpha1;
    let mut eig: Vec<C64> = g.u.clone().eigenvalues_complex();
    eig.sort_by(|a, b| (a - C64::new(1.0, 0.0)).norm().total_cmp(&(b - C64::new(1.0, 0.0)).norm()));
    assert!((eig[0] - 1.0).norm() < 1e-10 && (eig[1] - 1.0).norm() < 1e-10);
    assert!((eig[2] - C64::from_polar(1.0, a1)).norm() < 1e-10);
}

trait ComplexEig {
    fn eigenvalues_complex(self) -> Vec<C64>;
}

impl ComplexEig for CMat {
    fn eigenvalues_complex(self) -> Vec<C64> {
        // a unitary is normal, so the Schur form is diagonal
        let schur = nalgebra::linalg::Schur::new(self);
        let (_, t) = schur.unpack();
        (0..t.nrows()).map(|i| t[(i, i)]).collect()
    }
}

#[test]
fn alpha2_target_round_trips_through_quadrature() {
    for r in [3.0, 5.0, 8.0] {
        let sol = solve_beta_for_phase(r, PI, Which::Alpha2).unwrap();
        let lp = Loop::new(
            Profile::Pacman(sol.pacman(r, 1.0, 1.0, Schedule::Linear).unwrap()),
            last_level_direction(2),
        )
        .unwrap();
        let a2 = phase_integrals(&lp, PhaseMethod::Line).unwrap().alpha2;
        let diff = (a2 - PI).rem_euclid(2.0 * PI);
        assert!(diff.min(2.0 * PI - diff) <= 1e-8, "R = {r}: {a2}");
    }
}

#[test]
fn radial_integral_closed_forms() {
    for r in [0.5, 1.0, 2.0, 5.0] {
        let r2: f64 = r * r;
        let i1 = r2 / (1.0 + r2);
        let i2 = 2.0 * r2 * r2 * (2.0 - r2) / ((1.0 + r2) * (1.0 + 2.0 * r2 * r2));
        assert!((gates::radial_integral(r, Which::Alpha1) - i1).abs() < 1e-12);
        assert!((gates::radial_integral(r, Which::Alpha2) - i2).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reversal_negates_phases(r in 0.3f64..6.0, beta in 0.1f64..6.2, t1 in 0.5f64..5.0, t2 in 0.5f64..5.0) {
        let lp = pacman_loop(r, beta, t1, t2, Schedule::Linear, &last_level_direction(2)).unwrap();
        let a = phase_integrals(&lp, PhaseMethod::Line).unwrap();
        let b = phase_integrals(&lp.reversed(), PhaseMethod::Line).unwrap();
        prop_assert!((a.alpha1 + b.alpha1).abs() <= 1e-10);
        prop_assert!((a.alpha2 + b.alpha2).abs() <= 1e-10);
        let cfg = ModelConfig::default();
        let u = analytic_gate(&cfg, &lp, Arity::Two).unwrap().u;
        let v = analytic_gate(&cfg, &lp.reversed(), Arity::Two).unwrap().u;
        prop_assert!(linalg::max_abs(&(v - u.adjoint())) <= 1e-10);
    }

    #[test]
    fn concatenated_arcs_add(r in 0.3f64..6.0, b1 in 0.1f64..3.0, b2 in 0.1f64..3.0) {
        let dir = last_level_direction(2);
        let a = pacman_loop(r, b1, 1.0, 2.0, Schedule::Linear, &dir).unwrap();
        let b = pacman_loop(r, b2, 1.0, 2.0, Schedule::Linear, &dir).unwrap();
        let ab = pacman_loop(r, b1 + b2, 1.0, 2.0, Schedule::Linear, &dir).unwrap();
        let joined = a.then(&b).unwrap();
        for method in [PhaseMethod::Line, PhaseMethod::Surface] {
            let x = phase_integrals(&joined, method).unwrap();
            let y = phase_integrals(&ab, method).unwrap();
            prop_assert!((x.alpha1 - y.alpha1).abs() <= 1e-9);
            prop_assert!((x.alpha2 - y.alpha2).abs() <= 1e-9);
        }
    }

    #[test]
    fn gate_is_covariant_under_direction_rotation(seed in 0u64..1000, a1 in -3.0f64..3.0) {
        let mut rng = common::rng(seed);
        let dir = common::random_unit(&mut rng, 3);
        let cols: Vec<C64> = (0..9).map(|_| common::random_amplitudes(&mut rng, 1, 1.0)[0]).collect();
        let v = CMat::from_column_slice(3, 3, &cols).qr().q();
        let rotated: Vec<C64> = (&v * nalgebra::DVector::from_vec(dir.clone())).iter().copied().collect();
        let u = gate_from_phases(&dir, a1, 0.0, Arity::One);
        let w = gate_from_phases(&rotated, a1, 0.0, Arity::One);
        prop_assert!(linalg::max_abs(&(w - &v * u * v.adjoint())) <= 1e-12);
    }

    #[test]
    fn fidelity_lies_between_bounds(seed in 0u64..1000) {
        let mut rng = common::rng(seed);
        let cols: Vec<C64> = (0..16).map(|_| common::random_amplitudes(&mut rng, 1, 1.0)[0]).collect();
        let u = CMat::from_column_slice(4, 4, &cols).qr().q();
        let f = gate_fidelity(&u, &CMat::identity(4, 4)).unwrap();
        prop_assert!((0.2 - 1e-12..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn stokes_holds_for_pacman_families(r in 0.2f64..8.0, beta in 0.1f64..6.2, k in 1.0f64..3.0) {
        let lp = pacman_loop(r, beta, 1.5, 2.5, Schedule::Power(k), &last_level_direction(2)).unwrap();
        let line = phase_integrals(&lp, PhaseMethod::Line).unwrap();
        let surf = phase_integrals(&lp, PhaseMethod::Surface).unwrap();
        prop_assert!((line.alpha1 - surf.alpha1).abs() <= 1e-6);
        prop_assert!((line.alpha2 - surf.alpha2).abs() <= 1e-6);
    }
}
