mod common;

use bergman_lab::asympt::{self, AsymptError, PlaneChoice, RaySpec};
use bergman_lab::domains;
use common::*;
use proptest::prelude::*;

#[test]
fn geometric_grid() {
    let e = asympt::geometric_epsilons(0.4, 0.05, 7);
    assert_eq!(e.len(), 7);
    assert_eq!(e[0], 0.4);
    assert_eq!(e[6], 0.05);
    let q = e[1] / e[0];
    assert!(e.windows(2).all(|w| (w[1] / w[0] - q).abs() < 1e-12));
}

#[test]
fn ray_validation() {
    let a = vec![c(0.0, 0.0); 2];
    let d = [c(1.0, 0.0), c(0.0, 0.0)];
    assert!(matches!(RaySpec::new(a.clone(), &d, vec![], PlaneChoice::Sigma0, 0), Err(AsymptError::InvalidRay(_))));
    assert!(RaySpec::new(a.clone(), &[c(0.0, 0.0); 2], vec![0.1], PlaneChoice::Sigma0, 0).is_err());
    assert!(RaySpec::new(a.clone(), &d, vec![0.1, 0.2], PlaneChoice::Sigma0, 0).is_err());
    assert!(RaySpec::new(a.clone(), &d, vec![0.1, -0.2], PlaneChoice::Sigma0, 0).is_err());
    let r = RaySpec::new(a, &[c(3.0, 0.0), c(0.0, 4.0)], vec![0.1], PlaneChoice::Sigma0, 0).unwrap();
    assert!((r.direction[0].re - 0.6).abs() < 1e-15 && (r.direction[1].im - 0.8).abs() < 1e-15);
}

#[test]
fn linear_fit_recovers_line() {
    let x = [0.4, 0.2, 0.1, 0.05];
    let y: Vec<f64> = x.iter().map(|t| -1.25 + 3.0 * t).collect();
    let (l, s, r) = asympt::fit_linear(&x, &y).unwrap();
    assert!((l + 1.25).abs() < 1e-13 && (s - 3.0).abs() < 1e-12 && r < 1e-13);
    assert!(matches!(asympt::fit_linear(&x[..1], &y[..1]), Err(AsymptError::InsufficientRows(1, 2))));
}

#[test]
fn extrapolation_of_a_power_law() {
    let eps = asympt::geometric_epsilons(0.4, 0.01, 9);
    let vals: Vec<f64> = eps.iter().map(|e| -4.0 / 3.0 + 0.5 * e.powf(1.5)).collect();
    let ex = asympt::extrapolate(&eps, &vals, 3).unwrap();
    assert!((ex.limit + 4.0 / 3.0).abs() < 1e-3);
    assert!((ex.fit_order.unwrap() - 1.5).abs() < 1e-8);
}

#[test]
fn fit_order_rejects_flat_or_oscillating_data() {
    assert_eq!(asympt::fit_order(&[0.4, 0.2, 0.1], &[1.0, 1.0, 1.0]), None);
    assert_eq!(asympt::fit_order(&[0.4, 0.2, 0.1], &[1.0, 2.0, 1.0]), None);
}

#[test]
fn random_directions_are_seeded() {
    let a = asympt::random_direction(5, 0, 3);
    assert_eq!(a, asympt::random_direction(5, 0, 3));
    assert_ne!(a, asympt::random_direction(5, 1, 3));
    assert_ne!(a, asympt::random_direction(6, 0, 3));
}

#[test]
fn level_location_on_the_ball() {
    // φ = a(|z|² − 1) = −ε along a ray from the origin.
    for n in [2, 3] {
        let m = ball(n);
        let a = domains::ball_phi_scale(n);
        let mut d = vec![c(0.0, 0.0); n];
        d[0] = c(0.6, 0.0);
        d[n - 1] += c(0.0, 0.8);
        for eps in [0.5, 0.1, 1e-4] {
            let z = asympt::locate_level(&m, &vec![c(0.0, 0.0); n], &d, eps).unwrap();
            let r2: f64 = z.iter().map(|v| v.norm_sqr()).sum();
            assert!((r2 - (1.0 - eps / a)).abs() < 1e-12, "{n} {eps}");
        }
    }
}

#[test]
fn level_location_on_series_domain() {
    let m = perturbed();
    let a = anchor(m);
    let z = asympt::locate_level(m, &a, &[c(0.3, 0.3), c(-0.6, 0.4)], 0.05).unwrap();
    let phi = domains::defining_function(&m.kernel_jet(&z).unwrap().k).unwrap().value().re;
    assert!((phi + 0.05).abs() < 1e-11);
    assert!(asympt::locate_level(m, &a, &[c(1.0, 0.0), c(0.0, 0.0)], 50.0).is_err());
}

#[test]
fn ball_scans_hit_closed_form_limits() {
    for n in [2usize, 3] {
        let m = ball(n);
        let nn = n as f64 + 1.0;
        let eps = asympt::geometric_epsilons(0.1, 1e-4, 7);
        let mut d = vec![c(0.0, 0.0); n];
        d[0] = c(1.0, 0.0);
        for plane in [PlaneChoice::HorizontalRandom, PlaneChoice::Sigma0] {
            let ray = RaySpec::new(vec![c(0.0, 0.0); n], &d, eps.clone(), plane, 3).unwrap();
            let rep = asympt::scan(&m, &ray, 3, 1e-2).unwrap();
            assert!(rep.pass);
            assert!((rep.extrapolated_limit + 4.0 / nn).abs() < 1e-6);
            assert!((rep.limits.l1.limit - 8.0 / nn).abs() < 1e-6);
            assert!((rep.limits.l2.limit + 16.0 / nn).abs() < 1e-6);
        }
    }
}

#[test]
fn scans_are_deterministic() {
    let m = ball(2);
    let ray = RaySpec::new(vec![c(0.0, 0.0); 2], &[c(0.2, 0.1), c(0.5, -0.3)], vec![0.3, 0.1, 0.03], PlaneChoice::HorizontalRandom, 9).unwrap();
    let a = serde_json::to_string(&asympt::scan(&m, &ray, 3, 1e-2).unwrap()).unwrap();
    let b = serde_json::to_string(&asympt::scan(&m, &ray, 3, 1e-2).unwrap()).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn linear_fit_is_exact_on_lines(l in -5.0f64..5.0, s in -5.0f64..5.0) {
        let x = [0.3, 0.2, 0.1];
        let y: Vec<f64> = x.iter().map(|t| l + s * t).collect();
        let ex = asympt::extrapolate(&x, &y, 3).unwrap();
        prop_assert!((ex.limit - l).abs() < 1e-10);
        prop_assert!((ex.slope - s).abs() < 1e-9);
    }
}
