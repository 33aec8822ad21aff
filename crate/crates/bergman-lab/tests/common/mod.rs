#![allow(dead_code)]

use std::sync::OnceLock;

use bergman_lab::asympt;
use bergman_lab::cjet::{Jet, C64, MAX_ORDER};
use bergman_lab::domains::{self, AffineMap, DomainSpec, KernelModel, ShadowPolynomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn ball(n: usize) -> KernelModel {
    KernelModel::build(DomainSpec::unit_ball(n), None).unwrap()
}

pub fn affine_map() -> AffineMap {
    AffineMap::new(
        vec![vec![c(1.2, 0.1), c(0.3, 0.0)], vec![c(0.0, -0.2), c(0.9, 0.0)]],
        vec![c(0.5, 0.0), c(0.0, -0.3)],
    )
    .unwrap()
}

pub fn affine() -> KernelModel {
    KernelModel::build(DomainSpec::affine_image(affine_map()), None).unwrap()
}

/// Perturbed Reinhardt domain at the degree used for boundary scans.
pub fn perturbed() -> &'static KernelModel {
    static M: OnceLock<KernelModel> = OnceLock::new();
    M.get_or_init(|| {
        let spec = DomainSpec::reinhardt_series(ShadowPolynomial::perturbed_ball(), 1200, 32);
        KernelModel::build(spec, domains::cache_dir_from_env().as_deref()).unwrap()
    })
}

pub fn anchor(model: &KernelModel) -> Vec<C64> {
    match &model.spec.affine_map {
        Some(m) => m.translation.clone(),
        None => vec![c(0.0, 0.0); model.dim()],
    }
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// Points on `φ = −ε` with ε uniform in `[lo, hi]` along random rays.
pub fn collar_points(model: &KernelModel, seed: u64, count: usize, lo: f64, hi: f64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = anchor(model);
    (0..count)
        .map(|_| {
            let d = random_vec(&mut rng, model.dim());
            let eps = rng.gen_range(lo..hi);
            asympt::locate_level(model, &a, &d, eps).unwrap()
        })
        .collect()
}

pub fn log_k(model: &KernelModel, z: &[C64]) -> Jet {
    domains::log_kernel(&model.kernel_jet(z).unwrap().k).unwrap()
}

/// Worst relative mismatch between the jet of `log K` and central
/// differences of the jet one order below.
///
/// Each derivative `∂^γ` with `|γ| ≥ 1` is reached from `∂^{γ−e_v}` for the
/// first nonzero slot `v` of `γ`, with `∂_{z_j} = ½(∂_x − i∂_y)` and
/// `∂_{z̄_j} = ½(∂_x + i∂_y)`. Differences use step `h` and one Richardson
/// step to `h/2`. Errors are relative to `max(|∂^γ|, floor·M_k)`, where `M_k`
/// is the largest order-`k` derivative at the point.
pub fn ad_mismatch(model: &KernelModel, z: &[C64], h: f64, floor: f64) -> f64 {
    let n = z.len();
    let jet = log_k(model, z);
    let lay = jet.layout();
    let shifted = |j: usize, dx: C64| {
        let mut w = z.to_vec();
        w[j] += dx;
        log_k(model, &w)
    };
    // diffs[j] = (∂_x, ∂_y) Richardson estimates of every derivative of z_j.
    let mut diffs = Vec::with_capacity(n);
    for j in 0..n {
        let mut per_axis = Vec::new();
        for unit in [c(1.0, 0.0), c(0.0, 1.0)] {
            let central = |s: f64| {
                let p = shifted(j, unit * s);
                let m = shifted(j, -unit * s);
                (0..lay.len(MAX_ORDER - 1))
                    .map(|k| (p.derivative_at(k) - m.derivative_at(k)) / (2.0 * s))
                    .collect::<Vec<_>>()
            };
            let d1 = central(h);
            let d2 = central(h / 2.0);
            per_axis.push(d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect::<Vec<_>>());
        }
        diffs.push(per_axis);
    }
    let mut scale = [0.0f64; MAX_ORDER + 1];
    for k in 0..lay.len(MAX_ORDER) {
        let d = lay.degree(k);
        scale[d] = scale[d].max(jet.derivative_at(k).norm());
    }
    let mut worst = 0.0f64;
    for k in 1..lay.len(MAX_ORDER) {
        let e = lay.exponents(k);
        let v = e.iter().position(|&x| x > 0).unwrap();
        let mut lower = e.to_vec();
        lower[v] -= 1;
        let lk = lay.index_of(&lower[..n], &lower[n..]).unwrap();
        let j = v % n;
        let (dx, dy) = (diffs[j][0][lk], diffs[j][1][lk]);
        let fd = if v < n { (dx - c(0.0, 1.0) * dy) * 0.5 } else { (dx + c(0.0, 1.0) * dy) * 0.5 };
        let ad = jet.derivative_at(k);
        let denom = ad.norm().max(floor * scale[lay.degree(k)]);
        worst = worst.max((fd - ad).norm() / denom);
    }
    worst
}

/// Cholesky test for a Hermitian matrix.
pub fn positive_definite(a: &[Vec<C64>]) -> bool {
    let m = a.len();
    let mut l = vec![vec![c(0.0, 0.0); m]; m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k].conj();
            }
            if i == j {
                if !(s.re > 0.0) || s.im.abs() > 1e-10 * s.re.max(1.0) {
                    return false;
                }
                l[i][i] = c(s.re.sqrt(), 0.0);
            } else {
                l[i][j] = s / l[j][j].re;
            }
        }
    }
    true
}
