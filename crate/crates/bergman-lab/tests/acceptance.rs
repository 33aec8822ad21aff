//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use bergman_lab::asympt::{self, PlaneChoice, RaySpec};
use bergman_lab::cjet::C64;
use bergman_lab::cli::{self, PhiSource, RunConfig};
use bergman_lab::crfoliation::{sphere_phi, Foliation};
use bergman_lab::curvcheck::{Geometry, IdentityId};
use bergman_lab::domains::{self, KernelModel};
use bergman_lab::fields;
use bergman_lab::kahler::{bergman_metric, curvature_hessian, curvature_kobayashi, hol_sectional};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn target(n: usize) -> f64 {
    -4.0 / (n as f64 + 1.0)
}

fn ball_point(rng: &mut ChaCha8Rng, n: usize, max_r: f64) -> Vec<C64> {
    let mut z = random_vec(rng, n);
    let s: f64 = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let rad = max_r * rng.gen_range(0.0..1.0f64).sqrt();
    z.iter_mut().for_each(|v| *v *= rad / s);
    z
}

/// 1. Holomorphic sectional curvature −4/(n+1) on the ball.
fn klembeck_constant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for n in [2, 3] {
        for _ in 0..50 {
            let z = ball_point(&mut rng, n, 0.99);
            let v = random_vec(&mut rng, n);
            let k = domains::kernel_ball(n, &z).unwrap();
            let m = bergman_metric(&domains::log_kernel(&k).unwrap()).unwrap();
            let h = hol_sectional(&m, &curvature_hessian(&m), &v).unwrap();
            worst = worst.max((h - target(n)).abs());
        }
    }
    outcome(worst < 1e-6, format!("max |k + 4/(n+1)| = {worst:.2e} over 2×50 pairs (tol 1e-6)"))
}

const RAYS: [[(f64, f64); 2]; 3] = [[(1.0, 0.0), (0.0, 0.0)], [(0.6, 0.0), (0.0, 0.8)], [(0.3, 0.3), (-0.6, 0.4)]];

/// 2. Extrapolated limit on the perturbed Reinhardt domain.
fn klembeck_limit() -> Outcome {
    let model = perturbed();
    let eps = asympt::geometric_epsilons(0.4, 0.05, 7);
    let t = target(2);
    let mut worst: f64 = 0.0;
    let mut max_interior: f64 = 0.0;
    let mut limits = Vec::new();
    for (i, r) in RAYS.iter().enumerate() {
        let dir: Vec<C64> = r.iter().map(|&(a, b)| c(a, b)).collect();
        for plane in [PlaneChoice::HorizontalRandom, PlaneChoice::Sigma0] {
            let ray = RaySpec::new(vec![c(0.0, 0.0); 2], &dir, eps.clone(), plane, i as u64).unwrap();
            let rep = asympt::scan(model, &ray, 3, 1e-2).unwrap();
            worst = worst.max((rep.extrapolated_limit - t).abs());
            max_interior = max_interior.max((rep.rows[0].k - t).abs());
            limits.push(format!("{:+.5}", rep.extrapolated_limit));
        }
    }
    outcome(
        worst < 1e-2 && max_interior > 1e-2,
        format!(
            "3 rays × 2 planes, limits [{}]; max |L + 4/3| = {worst:.2e} (tol 1e-2); max interior |k(0.4) + 4/3| = {max_interior:.3} (need > 1e-2)",
            limits.join(" ")
        ),
    )
}

/// 3. k_θ = 1 and τ = 0 on the unit sphere.
fn sphere_anchor() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let (mut dk, mut dt) = (0.0f64, 0.0f64);
    for n in [2, 3] {
        for _ in 0..10 {
            let mut z = random_vec(&mut rng, n);
            let s: f64 = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            z.iter_mut().for_each(|v| *v /= s);
            let f = Foliation::new(sphere_phi(&z)).unwrap();
            let mut xs = f.horizontal_basis();
            xs.push(f.horizontal(&random_vec(&mut rng, n)));
            for x in xs {
                dk = dk.max((f.k_theta(&x).unwrap() - 1.0).abs());
                dt = dt.max(fields::sup(&fields::values(&f.tau(&x))));
            }
        }
    }
    outcome(dk < 1e-6 && dt < 1e-8, format!("max |k_θ − 1| = {dk:.2e} (tol 1e-6), max ‖τ‖ = {dt:.2e} (tol 1e-8), n = 2, 3"))
}

const SUITE: [IdentityId; 30] = {
    use IdentityId::*;
    [
        B4, B5, B6, B7, A2, A4, A5, A6, A7, A8, A9, A10, B13, B17, B21, B25, B29, B30, B31, B32, B33, E425, E426,
        E433, E434, Sigma0Ratio, OmegaDtheta, XfChain, NfChain, A11,
    ]
};

fn worst_identity(model: &KernelModel, points: &[Vec<C64>]) -> (f64, IdentityId) {
    let mut w = (0.0, SUITE[0]);
    for z in points {
        let g = Geometry::from_model(model, z).unwrap();
        for id in SUITE {
            let r = g.check(id).unwrap().relative();
            if !(r <= w.0) {
                w = (r, id);
            }
        }
    }
    w
}

/// 4. Identity suite on the ball and the series domain.
fn identity_suite() -> Outcome {
    let mut ball_worst = (0.0, SUITE[0]);
    for n in [2, 3] {
        let m = ball(n);
        let w = worst_identity(&m, &collar_points(&m, 104 + n as u64, 10, 0.01, 1.0));
        if w.0 > ball_worst.0 {
            ball_worst = w;
        }
    }
    let m = perturbed();
    let series = worst_identity(m, &collar_points(m, 107, 10, 0.05, 0.4));
    outcome(
        ball_worst.0 < 1e-6 && series.0 < 1e-4,
        format!(
            "ball: worst {} {:.2e} (tol 1e-6); series ε ∈ [0.05, 0.4]: worst {} {:.2e} (tol 1e-4)",
            ball_worst.1, ball_worst.0, series.1, series.0
        ),
    )
}

/// 5. L1 → 8/(n+1) and L2 → −16/(n+1) along ball scans.
fn intermediate_limits() -> Outcome {
    let eps = asympt::geometric_epsilons(0.1, 1e-4, 7);
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for n in [2usize, 3] {
        let nn = n as f64 + 1.0;
        let m = ball(n);
        for i in 0..2 {
            let dir = random_vec(&mut rng, n);
            for plane in [PlaneChoice::HorizontalRandom, PlaneChoice::Sigma0] {
                let ray = RaySpec::new(vec![c(0.0, 0.0); n], &dir, eps.clone(), plane, i).unwrap();
                let rep = asympt::scan(&m, &ray, 3, 1e-2).unwrap();
                worst = worst.max((rep.limits.l1.limit - 8.0 / nn).abs());
                worst = worst.max((rep.limits.l2.limit + 16.0 / nn).abs());
            }
        }
    }
    outcome(worst < 1e-2, format!("max error of L1, L2 limits = {worst:.2e} over n = 2, 3 (tol 1e-2)"))
}

fn cross_route(model: &KernelModel, points: &[Vec<C64>]) -> (f64, f64) {
    let (mut comp, mut hol) = (0.0f64, 0.0f64);
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for z in points {
        let k = model.kernel_jet(z).unwrap().k;
        let g = bergman_metric(&domains::log_kernel(&k).unwrap()).unwrap();
        let rh = curvature_hessian(&g);
        let rk = curvature_kobayashi(&k, &g).unwrap();
        let n = z.len();
        let floor = 1e-12 * rh.max_abs();
        for a in 0..n {
            for b in 0..n {
                for p in 0..n {
                    for q in 0..n {
                        let (x, y) = (rh.get(a, b, p, q), rk.get(a, b, p, q));
                        comp = comp.max((x - y).norm() / x.norm().max(floor));
                    }
                }
            }
        }
        let geo = Geometry::from_model(model, z).unwrap();
        let dir = random_vec(&mut rng, n);
        let s = geo.sample(&dir).unwrap();
        hol = hol.max((s.k_g_h - geo.hol_sectional_kahler(&dir).unwrap()).abs() / s.k_g_h.abs());
    }
    (comp, hol)
}

/// 6. Hessian vs Kobayashi curvature, foliation vs Kähler sectional curvature.
fn cross_routes() -> Outcome {
    let mut ball_worst = (0.0f64, 0.0f64);
    for n in [2, 3] {
        let m = ball(n);
        let w = cross_route(&m, &collar_points(&m, 116 + n as u64, 10, 0.01, 1.0));
        ball_worst = (ball_worst.0.max(w.0), ball_worst.1.max(w.1));
    }
    let m = perturbed();
    let s = cross_route(m, &collar_points(m, 119, 10, 0.05, 0.4));
    let a = affine();
    let af = cross_route(&a, &collar_points(&a, 120, 10, 0.05, 1.0));
    let series = (s.0.max(af.0), s.1.max(af.1));
    outcome(
        ball_worst.0 < 1e-9 && ball_worst.1 < 1e-7 && series.0 < 1e-6 && series.1 < 1e-4,
        format!(
            "ball: tensor {:.2e} (1e-9), k_g_H {:.2e} (1e-7); series and affine: tensor {:.2e} (1e-6), k_g_H {:.2e} (1e-4)",
            ball_worst.0, ball_worst.1, series.0, series.1
        ),
    )
}

/// 7. Jets of log K against finite differences.
fn ad_integrity() -> Outcome {
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    let b2 = ball(2);
    let b3 = ball(3);
    let af = affine();
    let domains: [(&str, &KernelModel); 4] = [("ball2", &b2), ("ball3", &b3), ("affine", &af), ("series", perturbed())];
    for (i, (name, m)) in domains.iter().enumerate() {
        let w = collar_points(m, 130 + i as u64, 20, 0.2, 0.9)
            .iter()
            .map(|z| ad_mismatch(m, z, 1e-4, 0.0))
            .fold(0.0, f64::max);
        worst = worst.max(w);
        parts.push(format!("{name} {w:.1e}"));
    }
    outcome(worst < 1e-5, format!("worst relative coefficient error: {} (tol 1e-5, 20 points each)", parts.join(", ")))
}

/// 8. 1 − rφ > 0 and positive Levi forms at sampled points of every shipped config.
fn positivity() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let mut count = 0usize;
    let mut min_margin = f64::INFINITY;
    let mut bad = Vec::new();
    for f in &files {
        let cfg = RunConfig::load(f).unwrap();
        let (model, fols): (Option<KernelModel>, Vec<Foliation>) = match cfg.phi {
            PhiSource::Sphere => {
                let pts = cli::verify_points(&cfg, None).unwrap();
                (None, pts.iter().map(|z| Foliation::new(sphere_phi(z)).unwrap()).collect())
            }
            PhiSource::Bergman => {
                let model = cfg.build_model().unwrap();
                let mut pts = cli::verify_points(&cfg, Some(&model)).unwrap();
                for d in &cfg.directions {
                    for e in &cfg.epsilons {
                        pts.push(asympt::locate_level(&model, &cfg.anchor, d, *e).unwrap());
                    }
                }
                let fols = pts
                    .iter()
                    .map(|z| Foliation::new(domains::defining_function(&model.kernel_jet(z).unwrap().k).unwrap()).unwrap())
                    .collect();
                (Some(model), fols)
            }
        };
        drop(model);
        for fol in fols {
            count += 1;
            let margin = 1.0 - fol.r.value().re * fol.phi.value().re;
            min_margin = min_margin.min(margin);
            if !(margin > 0.0) || !positive_definite(&fol.levi.gram) {
                bad.push(format!("{}", f.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    bad.dedup();
    outcome(
        bad.is_empty(),
        format!(
            "{count} collar points over {} configs; min 1 − rφ = {min_margin:.3e}; Levi forms positive definite{}",
            files.len(),
            if bad.is_empty() { String::new() } else { format!("; failures in {}", bad.join(", ")) }
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 8] = [
        ("klembeck constant on the ball", klembeck_constant, Duration::from_secs(10)),
        ("klembeck limit on the perturbed domain", klembeck_limit, Duration::from_secs(300)),
        ("sphere pseudohermitian anchor", sphere_anchor, Duration::from_secs(10)),
        ("identity suite", identity_suite, Duration::from_secs(120)),
        ("intermediate limits L1, L2", intermediate_limits, Duration::from_secs(30)),
        ("cross-route curvature", cross_routes, Duration::from_secs(u64::MAX / 4)),
        ("AD integrity", ad_integrity, Duration::from_secs(u64::MAX / 4)),
        ("positivity", positivity, Duration::from_secs(u64::MAX / 4)),
    ];
    // The series model is shared; build it once up front so its cost is
    // reported on its own.
    let t0 = Instant::now();
    perturbed();
    println!("acceptance: perturbed norm table (degree 1200) built in {:.1} s", t0.elapsed().as_secs_f64());
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        let el = t.elapsed();
        let in_time = el <= *budget;
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget_note = if budget.as_secs() < 1_000_000 { format!(" / {} s", budget.as_secs()) } else { String::new() };
        println!(
            "criterion {}: {} - {}: {} [{:.1} s{}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            name,
            o.detail,
            el.as_secs_f64(),
            budget_note
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
