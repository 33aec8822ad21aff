mod common;

use bergman_lab::cjet::C64;
use bergman_lab::curvcheck::Geometry;
use bergman_lab::domains;
use bergman_lab::kahler::{bergman_metric, curvature_hessian, curvature_kobayashi, hol_sectional, MetricPoint};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn metric_at(n: usize, z: &[C64]) -> (bergman_lab::cjet::Jet, MetricPoint) {
    let k = domains::kernel_ball(n, z).unwrap();
    let m = bergman_metric(&domains::log_kernel(&k).unwrap()).unwrap();
    (k, m)
}

#[test]
fn ball_metric_closed_form() {
    // g_{jk̄} = (n+1) (δ_jk (1 − |z|²) + z̄_j z_k) / (1 − |z|²)²
    let n = 3;
    let z = [c(0.2, 0.1), c(-0.3, 0.2), c(0.1, -0.4)];
    let (_, m) = metric_at(n, &z);
    let u = 1.0 - z.iter().map(|v| v.norm_sqr()).sum::<f64>();
    for j in 0..n {
        for k in 0..n {
            let delta = if j == k { u } else { 0.0 };
            let want = (z[j].conj() * z[k] + delta) * ((n + 1) as f64 / (u * u));
            assert!((m.g[(j, k)] - want).norm() < 1e-13);
        }
    }
}

#[test]
fn ball_curvature_tensor_closed_form() {
    // Constant holomorphic sectional curvature −4/(n+1), with the sectional
    // curvature normalized as 2 R(Z, Z̄, Z, Z̄) / g(Z, Z̄)²:
    // R_{jk̄rs̄} = −(1/(n+1)) (g_{jk̄} g_{rs̄} + g_{js̄} g_{rk̄}).
    for n in [2, 3] {
        let z: Vec<C64> = (0..n).map(|j| c(0.25 - 0.1 * j as f64, 0.15 * j as f64)).collect();
        let (_, m) = metric_at(n, &z);
        let r = curvature_hessian(&m);
        let s = 1.0 / (n as f64 + 1.0);
        for j in 0..n {
            for k in 0..n {
                for p in 0..n {
                    for q in 0..n {
                        let want = -(m.g[(j, k)] * m.g[(p, q)] + m.g[(j, q)] * m.g[(p, k)]) * s;
                        assert!((r.get(j, k, p, q) - want).norm() < 1e-10 * r.max_abs());
                    }
                }
            }
        }
    }
}

#[test]
fn fifty_random_pairs_on_the_ball() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in [2, 3] {
        let target = -4.0 / (n as f64 + 1.0);
        for _ in 0..50 {
            let mut z = random_vec(&mut rng, n);
            let norm: f64 = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let rad = 0.98 * rand::Rng::gen_range(&mut rng, 0.0..1.0f64).sqrt();
            z.iter_mut().for_each(|v| *v *= rad / norm);
            let v = random_vec(&mut rng, n);
            let (_, m) = metric_at(n, &z);
            let k = hol_sectional(&m, &curvature_hessian(&m), &v).unwrap();
            assert!((k - target).abs() < 1e-6, "{k}");
        }
    }
}

#[test]
fn routes_agree_on_series_domain() {
    let m = perturbed();
    for z in collar_points(m, 5, 4, 0.05, 0.4) {
        let k = m.kernel_jet(&z).unwrap().k;
        let g = bergman_metric(&domains::log_kernel(&k).unwrap()).unwrap();
        let rh = curvature_hessian(&g);
        let rk = curvature_kobayashi(&k, &g).unwrap();
        assert!(rh.max_diff(&rk) < 1e-6 * rh.max_abs());
        assert!(rh.symmetry_residual() < 1e-8 * rh.max_abs());
    }
}

#[test]
fn field_curvature_matches_pointwise_tensor() {
    let m = perturbed();
    let z = collar_points(m, 9, 1, 0.1, 0.3).remove(0);
    let geo = Geometry::from_model(m, &z).unwrap();
    let k = m.kernel_jet(&z).unwrap().k;
    let g = bergman_metric(&domains::log_kernel(&k).unwrap()).unwrap();
    let rh = curvature_hessian(&g);
    for v in [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.3, -0.2), c(0.5, 0.7)]] {
        let a = geo.hol_sectional_kahler(&v).unwrap();
        let x = bergman_lab::fields::values(&geo.fol.horizontal(&v));
        let b = hol_sectional(&g, &rh, &x).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} {b}");
    }
}

#[test]
fn zero_direction_is_rejected() {
    let (_, m) = metric_at(2, &[c(0.1, 0.0), c(0.0, 0.2)]);
    assert!(hol_sectional(&m, &curvature_hessian(&m), &[c(0.0, 0.0); 2]).is_err());
}
