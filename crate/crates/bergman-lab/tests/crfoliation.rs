mod common;

use bergman_lab::cjet::{seed_coordinates, C64};
use bergman_lab::crfoliation::{sphere_phi, CrError, Foliation};
use bergman_lab::domains;
use bergman_lab::fields;
use common::*;
use proptest::prelude::*;

fn ball_foliation(n: usize, z: &[C64]) -> Foliation {
    Foliation::new(domains::defining_function(&domains::kernel_ball(n, z).unwrap()).unwrap()).unwrap()
}

fn norm2(z: &[C64]) -> f64 {
    z.iter().map(|v| v.norm_sqr()).sum()
}

#[test]
fn transverse_curvature_on_the_ball() {
    // φ = a(|z|² − 1) gives r = 1/(a|z|²) and 1 − rφ = 1/|z|².
    for n in [2, 3] {
        let z: Vec<C64> = (0..n).map(|j| c(0.3 - 0.1 * j as f64, 0.2)).collect();
        let f = ball_foliation(n, &z);
        let a = domains::ball_phi_scale(n);
        let r = f.r.value().re;
        assert!((r - 1.0 / (a * norm2(&z))).abs() < 1e-12 * r);
        let one_minus = 1.0 - r * f.phi.value().re;
        assert!((one_minus - 1.0 / norm2(&z)).abs() < 1e-12 / norm2(&z));
    }
}

#[test]
fn frame_normalizations() {
    let f = ball_foliation(2, &[c(0.4, -0.1), c(0.2, 0.3)]);
    let t = f.t_field();
    let nf = f.n_field();
    let x = &f.horizontal_basis()[0];
    let v = |j: bergman_lab::cjet::Jet| j.value();
    assert!((v(f.theta(&t)) - 1.0).norm() < 1e-13);
    assert!(v(f.theta(&nf)).norm() < 1e-13);
    assert!(v(f.theta(x)).norm() < 1e-13);
    assert!(v(f.dphi(x)).norm() < 1e-13);
    assert!(v(f.dphi(&t)).norm() < 1e-13);
    assert!((v(f.g_theta(&t, &t)) - 1.0).norm() < 1e-13);
    assert!((v(f.g_theta(&nf, &nf)) - 1.0).norm() < 1e-13);
    assert!(v(f.g_theta(&t, &nf)).norm() < 1e-13);
    // Φ is J on H(F) and kills T and N.
    let px = f.phi_h(x);
    assert!(fields::diff_sup(&fields::values(&f.phi_h(&px)), &fields::values(&fields::scale(x, -1.0))) < 1e-13);
    assert!(fields::sup(&fields::values(&f.phi_h(&t))) < 1e-13);
    assert!(fields::sup(&fields::values(&f.phi_h(&nf))) < 1e-13);
}

#[test]
fn levi_forms_are_positive() {
    for z in collar_points(&ball(3), 3, 10, 0.05, 1.0) {
        let f = ball_foliation(3, &z);
        assert!(positive_definite(&f.levi.gram));
        assert_eq!(f.levi.gram.len(), 2);
    }
}

#[test]
fn sphere_pseudohermitian_curvature() {
    for n in [2, 3] {
        for rad in [1.0, 0.8, 0.5] {
            let mut z: Vec<C64> = (0..n).map(|j| c(0.5, 0.3 * j as f64 - 0.2)).collect();
            let s = norm2(&z).sqrt();
            z.iter_mut().for_each(|v| *v *= rad / s);
            let f = Foliation::new(sphere_phi(&z)).unwrap();
            for x in f.horizontal_basis() {
                assert!((f.k_theta(&x).unwrap() - 1.0 / (rad * rad)).abs() < 1e-12);
                assert!(fields::sup(&fields::values(&f.tau(&x))) < 1e-12);
            }
        }
    }
}

#[test]
fn construction_errors() {
    let zero = [c(0.0, 0.0); 2];
    assert!(matches!(Foliation::new(sphere_phi(&zero)), Err(CrError::CriticalPoint(_))));
    let z = [c(0.3, 0.0), c(0.1, 0.2)];
    assert!(matches!(Foliation::new(sphere_phi(&z).truncate(3)), Err(CrError::InsufficientOrder(3, 4))));
    // |z₁|² − |z₂|² − 1 has an indefinite complex Hessian.
    let s = seed_coordinates(&z);
    let phi = s[0].mul_jet(&s[2]) - s[1].mul_jet(&s[3]);
    assert!(Foliation::new(phi.add_scalar(-1.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sphere_k_theta_is_inverse_radius_squared(
        re in prop::collection::vec(-1.0f64..1.0, 3),
        im in prop::collection::vec(-1.0f64..1.0, 3),
        cre in prop::collection::vec(-1.0f64..1.0, 3),
        rad in 0.3f64..1.2,
    ) {
        let mut z: Vec<C64> = re.iter().zip(&im).map(|(a, b)| c(*a, *b)).collect();
        let s = norm2(&z).sqrt();
        prop_assume!(s > 1e-3);
        z.iter_mut().for_each(|v| *v *= rad / s);
        let f = Foliation::new(sphere_phi(&z)).unwrap();
        let dir: Vec<C64> = cre.iter().map(|a| c(*a, 0.3 * a)).collect();
        let x = f.horizontal(&dir);
        let nx = f.g_theta(&x, &x).value().re;
        prop_assume!(nx > 1e-6);
        prop_assert!((f.k_theta(&x).unwrap() * rad * rad - 1.0).abs() < 1e-10);
    }
}
