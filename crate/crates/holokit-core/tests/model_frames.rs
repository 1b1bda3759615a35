mod common;

use holokit_core::linalg;
use holokit_core::model::{
    self, single_atom_hamiltonian, spectral_gap, two_atom_hamiltonian, two_atom_null_frame, ModelConfig, ParameterPoint,
};
use holokit_core::{CMat, C64};
use proptest::prelude::*;

fn cfg(d: usize) -> ModelConfig {
    ModelConfig { d, ..ModelConfig::default() }
}

#[test]
fn single_frame_is_annihilated_and_gram_matches_inner_products() {
    for d in [2, 3, 4] {
        let mut rng = common::rng(10 + d as u64);
        for _ in 0..100 {
            let p = common::random_point(&mut rng, d, 3.0);
            let h = single_atom_hamiltonian(&cfg(d), &p).unwrap();
            let frame = model::single_atom_null_frame(&cfg(d), &p).unwrap();
            for v in &frame.basis {
                assert!((&h * v).norm() <= 1e-10);
            }
            assert!(linalg::max_abs(&(frame.brute_gram() - &frame.gram)) <= 1e-12);
            assert!(linalg::max_abs(&(&frame.gram * &frame.gram_inv - CMat::identity(d, d))) <= 1e-10);
        }
    }
}

#[test]
fn pair_frame_is_annihilated_with_closed_form_gram_and_inverse() {
    for d in [2, 3, 4] {
        let mut rng = common::rng(20 + d as u64);
        let c = cfg(d);
        for _ in 0..100 {
            let p = common::random_point(&mut rng, d, 2.0);
            let h = two_atom_hamiltonian(&c, &p).unwrap();
            let frame = two_atom_null_frame(&c, &p).unwrap();
            assert_eq!(frame.len(), d * d + 1);
            for v in &frame.basis {
                assert!((&h * v).norm() <= 1e-10 * v.norm().max(1.0), "{}", (&h * v).norm());
            }
            let brute = frame.brute_gram();
            let scale = linalg::max_abs(&brute);
            assert!(linalg::max_abs(&(&brute - &frame.gram)) <= 1e-10 * scale);
            let numeric_inv = brute.clone().try_inverse().unwrap();
            let inv_scale = linalg::max_abs(&numeric_inv);
            assert!(linalg::max_abs(&(&numeric_inv - &frame.gram_inv)) <= 1e-10 * inv_scale);
        }
    }
}

#[test]
fn closed_forms_hold_for_complex_omega_d() {
    let c = ModelConfig { d: 3, ..ModelConfig::default() }.with_omega_d(C64::from_polar(1.3, 0.4)).unwrap();
    let mut rng = common::rng(5);
    let p = common::random_point(&mut rng, 3, 1.5);
    let frame = two_atom_null_frame(&c, &p).unwrap();
    let brute = frame.brute_gram();
    assert!(linalg::max_abs(&(&brute - &frame.gram)) <= 1e-10 * linalg::max_abs(&brute));
    let n = frame.len();
    assert!(linalg::max_abs(&(&frame.gram * &frame.gram_inv - CMat::identity(n, n))) <= 1e-10);
}

#[test]
fn spectrum_matches_quintic_on_pacman_arc() {
    for w in [10.0, 20.0] {
        let c = ModelConfig { w, ..ModelConfig::default() };
        for k in 0..8 {
            let f = C64::from_polar(5.0, 0.4 * k as f64);
            let p = ParameterPoint::from_amplitudes(&[C64::new(0.0, 0.0), f]);
            let rep = spectral_gap(&c, &p).unwrap();
            assert!(rep.root_mismatch <= 1e-8, "W = {w}: {}", rep.root_mismatch);
            assert!((rep.gap - rep.asymptotic_gap).abs() / rep.gap < 0.05, "{} vs {}", rep.gap, rep.asymptotic_gap);
            assert_eq!(rep.nonzero_eigs.len(), 4 * 2 + 3);
        }
    }
}

#[test]
fn bright_levels_have_multiplicity_two_d_minus_one() {
    let c = ModelConfig { d: 3, w: 15.0, ..ModelConfig::default() };
    let mut rng = common::rng(3);
    let p = common::random_point(&mut rng, 3, 2.0);
    let rep = spectral_gap(&c, &p).unwrap();
    let om = model::omega_squared(&c, &p.amplitudes()).sqrt();
    let at_plus = rep.nonzero_eigs.iter().filter(|e| (**e - om).abs() < 1e-9).count();
    let at_minus = rep.nonzero_eigs.iter().filter(|e| (**e + om).abs() < 1e-9).count();
    assert_eq!((at_plus, at_minus), (2 * 3 - 1, 2 * 3 - 1));
    assert!((rep.near_w.unwrap() - 15.0).abs() < 2.0);
}

#[test]
fn gap_stays_open_at_strong_interaction() {
    let c = ModelConfig { w: 50.0, ..ModelConfig::default() };
    let mut rng = common::rng(7);
    for _ in 0..100 {
        let p = common::random_point(&mut rng, 2, 10.0 / 2f64.sqrt());
        assert!(spectral_gap(&c, &p).unwrap().gap >= 0.5);
    }
}

#[test]
fn gap_saturates_in_interaction() {
    let at = |w: f64| {
        let c = ModelConfig { w, ..ModelConfig::default() };
        let p = ParameterPoint::from_amplitudes(&[C64::new(0.0, 0.0), C64::from_polar(5.0, 1.0)]);
        spectral_gap(&c, &p).unwrap().gap
    };
    let (g10, g100) = (at(10.0), at(100.0));
    assert!((g10 - g100).abs() / g100 < 0.05, "{g10} {g100}");
}

#[test]
fn zero_interaction_roots_are_multiples_of_omega() {
    for (om2, od2) in [(25.0, 16.0), (2.0, 1.0), (7.3, 0.4)] {
        let om: f64 = f64::sqrt(om2);
        let roots = model::quintic_roots(0.0, om2, od2).unwrap();
        for (r, e) in roots.iter().zip([-2.0 * om, -om, 0.0, om, 2.0 * om]) {
            assert!((r - e).abs() <= 1e-8, "{r} vs {e}");
        }
    }
}

#[test]
fn single_atom_bright_pair_sits_at_plus_minus_omega() {
    let c = ModelConfig { omega_d: C64::new(4.0, 0.0), ..ModelConfig::default() };
    let p = ParameterPoint::from_amplitudes(&[C64::new(3.0, 0.0), C64::new(0.0, 0.0)]);
    let mut eigs = linalg::hermitian_eigenvalues(&single_atom_hamiltonian(&c, &p).unwrap());
    eigs.sort_by(|a, b| a.total_cmp(b));
    let expect = [-5.0, 0.0, 0.0, 5.0];
    for (e, x) in eigs.iter().zip(expect) {
        assert!((e - x).abs() <= 1e-12, "{eigs:?}");
    }
}

#[test]
fn pair_hamiltonian_is_swap_symmetric() {
    let mut rng = common::rng(77);
    for d in [2, 3] {
        let c = ModelConfig { d, w: 12.0, gamma: 0.2, ..ModelConfig::default() };
        let s = linalg::swap(d + 2);
        for _ in 0..10 {
            let p = common::random_point(&mut rng, d, 3.0);
            let h = two_atom_hamiltonian(&c, &p).unwrap();
            assert!(linalg::max_abs(&(&s * &h * &s - &h)) <= 1e-14);
            let hd = model::two_atom_hamiltonian_with_decay(&c, &p).unwrap();
            assert!(linalg::max_abs(&(&s * &hd * &s - &hd)) <= 1e-14);
            let dd = d * (d + 2) + d;
            assert_eq!(h[(dd, dd)], C64::new(12.0, 0.0));
        }
    }
}

proptest! {
    #[test]
    fn hamiltonians_are_hermitian(re in proptest::collection::vec(-5.0f64..5.0, 6)) {
        let p = ParameterPoint::from_lambda(re).unwrap();
        let c = cfg(3);
        prop_assert_eq!(linalg::hermitian_defect(&single_atom_hamiltonian(&c, &p).unwrap()), 0.0);
        prop_assert_eq!(linalg::hermitian_defect(&two_atom_hamiltonian(&c, &p).unwrap()), 0.0);
    }

    #[test]
    fn spectrum_depends_only_on_moduli(
        mags in proptest::collection::vec(0.0f64..4.0, 2),
        phases in proptest::collection::vec(0.0f64..6.2, 4),
    ) {
        let c = cfg(2);
        let a = ParameterPoint::from_amplitudes(&[C64::from_polar(mags[0], phases[0]), C64::from_polar(mags[1], phases[1])]);
        let b = ParameterPoint::from_amplitudes(&[C64::from_polar(mags[0], phases[2]), C64::from_polar(mags[1], phases[3])]);
        let ea = spectral_gap(&c, &a).unwrap().nonzero_eigs;
        let eb = spectral_gap(&c, &b).unwrap().nonzero_eigs;
        for (x, y) in ea.iter().zip(&eb) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }
}
