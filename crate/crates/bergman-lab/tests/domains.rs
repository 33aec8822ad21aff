mod common;

use std::f64::consts::PI;

use bergman_lab::domains::{self, DomainError, DomainSpec, KernelModel, NormTable, ShadowPolynomial, ShadowTerm};
use bergman_lab::hexfloat;
use bergman_lab::kahler::bergman_metric;
use bergman_lab::quadrature::gauss_legendre;
use common::*;
use proptest::prelude::*;

fn fact(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

#[test]
fn gauss_legendre_integrates_polynomials_exactly() {
    let (x, w) = gauss_legendre(8);
    for p in 0..16 {
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
        let want = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
        assert!((got - want).abs() < 1e-14, "degree {p}");
    }
}

#[test]
fn ball_norms_match_closed_form() {
    // ‖z^α‖² = π² α! / (|α| + 2)! on the ball of C².
    let spec = DomainSpec::reinhardt_series(ShadowPolynomial::ball(2), 60, 32);
    let t = domains::monomial_norms(&spec, None).unwrap();
    for a in [[0u32, 0], [1, 0], [5, 3], [30, 0], [20, 25]] {
        let want = PI * PI * fact(a[0]) * fact(a[1]) / fact(a[0] + a[1] + 2);
        assert!((t.norm(&a) / want - 1.0).abs() < 1e-12, "{a:?}");
    }
}

#[test]
fn series_kernel_of_ball_matches_closed_form() {
    let spec = DomainSpec::reinhardt_series(ShadowPolynomial::ball(2), 200, 32);
    let series = KernelModel::build(spec, None).unwrap();
    let exact = ball(2);
    for z in [vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.3, 0.2), c(-0.1, 0.4)], vec![c(0.5, -0.4), c(0.2, 0.3)]] {
        let a = series.kernel_jet(&z).unwrap();
        let b = exact.kernel_jet(&z).unwrap();
        let d = (a.k.clone() - b.k.clone()).max_abs() / b.k.max_abs();
        assert!(d < 1e-11, "{z:?}: {d:e}");
        assert!(a.tail_estimate < 1e-12);
        assert!((series.kernel_value(&z).unwrap() / b.k.value().re - 1.0).abs() < 1e-12);
    }
}

#[test]
fn ball_kernel_at_origin() {
    assert!((ball(2).kernel_value(&[c(0.0, 0.0); 2]).unwrap() - 2.0 / (PI * PI)).abs() < 1e-15);
    assert!((ball(3).kernel_value(&[c(0.0, 0.0); 3]).unwrap() - 6.0 / PI.powi(3)).abs() < 1e-15);
}

#[test]
fn ball_defining_function_is_a_multiple_of_the_quadric() {
    for n in [2, 3] {
        let a = domains::ball_phi_scale(n);
        let z: Vec<_> = (0..n).map(|j| c(0.2 + 0.1 * j as f64, -0.15)).collect();
        let phi = domains::defining_function(&domains::kernel_ball(n, &z).unwrap()).unwrap();
        let q: f64 = z.iter().map(|v| v.norm_sqr()).sum::<f64>() - 1.0;
        assert!((phi.value().re - a * q).abs() < 1e-14);
        assert!((domains::ball_phi_closed_form(n, &z) - a * q).abs() < 1e-14);
    }
}

#[test]
fn affine_metric_is_the_pullback_of_the_ball_metric() {
    // Bergman metrics are invariant: g_D(z)(v, v) = g_B(w)(A⁻¹v, A⁻¹v).
    let map = affine_map();
    let model = affine();
    let z = vec![c(0.7, -0.2), c(0.1, -0.5)];
    let w = map.pull(&z);
    let gd = bergman_metric(&log_k(&model, &z)).unwrap();
    let gb = bergman_metric(&domains::log_kernel(&domains::kernel_ball(2, &w).unwrap()).unwrap()).unwrap();
    let v = [c(0.3, 0.4), c(-1.0, 0.2)];
    // A⁻¹v = pull(t + v).
    let t = &map.translation;
    let av = map.pull(&[t[0] + v[0], t[1] + v[1]]);
    let q = |g: &bergman_lab::kahler::MetricPoint, u: &[bergman_lab::cjet::C64]| {
        let mut s = c(0.0, 0.0);
        for j in 0..2 {
            for k in 0..2 {
                s += g.g[(j, k)] * u[j] * u[k].conj();
            }
        }
        s.re
    };
    assert!((q(&gd, &v) / q(&gb, &av) - 1.0).abs() < 1e-12);
}

#[test]
fn containment() {
    let b = DomainSpec::unit_ball(2);
    assert!(b.contains(&[c(0.5, 0.5), c(0.5, 0.0)]));
    assert!(!b.contains(&[c(0.8, 0.5), c(0.5, 0.0)]));
    assert!(!b.contains(&[c(0.0, 0.0)]));
    let p = DomainSpec::reinhardt_series(ShadowPolynomial::perturbed_ball(), 40, 16);
    // s = 0.8: 0.8 + 0.32 > 1
    assert!(!p.contains(&[c(0.8f64.sqrt(), 0.0), c(0.0, 0.0)]));
    assert!(p.contains(&[c(0.7f64.sqrt(), 0.0), c(0.0, 0.0)]));
    assert!(matches!(ball(2).kernel_jet(&[c(1.0, 0.0), c(0.0, 0.0)]), Err(DomainError::OutsideDomain(_))));
}

#[test]
fn invalid_specs() {
    let term = |a: u32, b: u32, coeff: f64| ShadowTerm { exps: vec![a, b], coeff };
    // 3s − 2s² + t is bounded but concave in s.
    let nonconvex = ShadowPolynomial::new(2, vec![term(1, 0, 3.0), term(2, 0, -2.0), term(0, 1, 1.0)]).unwrap();
    let spec = DomainSpec::reinhardt_series(nonconvex, 20, 8);
    assert!(matches!(spec.validate(), Err(DomainError::InvalidSpec(_))));
    // s + t − 3st never reaches 1 along the diagonal.
    let unbounded = ShadowPolynomial::new(2, vec![term(1, 0, 1.0), term(0, 1, 1.0), term(1, 1, -3.0)]).unwrap();
    assert!(DomainSpec::reinhardt_series(unbounded, 20, 8).validate().is_err());
    let spec = DomainSpec::reinhardt_series(ShadowPolynomial::ball(2), 0, 8);
    assert!(matches!(spec.validate(), Err(DomainError::InvalidSpec(_))));
    assert!(domains::monomial_norms(&DomainSpec::unit_ball(2), None).is_err());
    assert!(domains::AffineMap::new(vec![vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(2.0, 0.0), c(4.0, 0.0)]], vec![c(0.0, 0.0); 2]).is_err());
}

#[test]
fn low_degree_series_refuses_boundary_points() {
    let spec = DomainSpec::reinhardt_series(ShadowPolynomial::perturbed_ball(), 40, 16);
    let m = KernelModel::build(spec, None).unwrap();
    let z = [c(0.72f64.sqrt(), 0.0), c(0.0, 0.0)];
    assert!(matches!(m.kernel_jet(&z), Err(DomainError::SeriesNotConverged { .. })));
    assert!(m.kernel_jet(&[c(0.2, 0.0), c(0.1, 0.1)]).is_ok());
}

#[test]
fn norm_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = DomainSpec::reinhardt_series(ShadowPolynomial::perturbed_ball(), 30, 16);
    let a = domains::monomial_norms(&spec, Some(dir.path())).unwrap();
    let path = NormTable::cache_path(dir.path(), &spec.spec_hash());
    assert!(path.exists());
    let b = domains::monomial_norms(&spec, Some(dir.path())).unwrap();
    assert_eq!(a.log_norms.len(), b.log_norms.len());
    assert!(a.log_norms.iter().zip(&b.log_norms).all(|(x, y)| x.to_bits() == y.to_bits()));
    // A different degree hashes differently.
    let other = DomainSpec::reinhardt_series(ShadowPolynomial::perturbed_ball(), 31, 16);
    assert_ne!(spec.spec_hash(), other.spec_hash());

    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(domains::monomial_norms(&spec, Some(dir.path())), Err(DomainError::CacheCorrupt { .. })));
}

proptest! {
    #[test]
    fn hexfloat_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = hexfloat::format(x);
        prop_assert_eq!(hexfloat::parse(&s).map(f64::to_bits), Some(x.to_bits()));
    }

    #[test]
    fn ball_kernel_positive_and_radial(r in 0.0f64..0.95, t in 0.0f64..std::f64::consts::TAU, u in 0.0f64..std::f64::consts::TAU) {
        let z = [c(r * t.cos() * u.cos(), r * t.sin() * u.cos()), c(r * u.sin(), 0.0)];
        let k = domains::kernel_ball(2, &z).unwrap().value().re;
        let want = 2.0 / (PI * PI) * (1.0 - r * r).powi(-3);
        prop_assert!((k / want - 1.0).abs() < 1e-12);
    }
}
