//! Boundary scans along inward rays and extrapolation of the limits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cjet::C64;
use crate::curvcheck::{CheckError, CurvatureSample, Geometry};
use crate::domains::{DomainError, KernelModel};

#[derive(Debug, Error)]
pub enum AsymptError {
    #[error("RootNotBracketed: no level φ = {target:e} along the ray ({reason})")]
    RootNotBracketed { target: f64, reason: String },
    #[error("InsufficientRows: {0} rows, need at least {1}")]
    InsufficientRows(usize, usize),
    #[error("invalid ray: {0}")]
    InvalidRay(String),
    #[error("row at ε = {epsilon}: {source}")]
    Row {
        epsilon: f64,
        #[source]
        source: CheckError,
    },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

pub const LEVEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneChoice {
    HorizontalRandom,
    HorizontalFixed(Vec<C64>),
    Sigma0,
}

impl PlaneChoice {
    pub fn name(&self) -> &'static str {
        match self {
            PlaneChoice::HorizontalRandom => "horizontal_random",
            PlaneChoice::HorizontalFixed(_) => "horizontal_fixed",
            PlaneChoice::Sigma0 => "sigma0",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RaySpec {
    pub anchor: Vec<C64>,
    /// Unit vector pointing from the anchor toward the boundary.
    pub direction: Vec<C64>,
    /// Strictly decreasing, positive.
    pub epsilons: Vec<f64>,
    pub plane: PlaneChoice,
    pub seed: u64,
}

impl RaySpec {
    pub fn new(anchor: Vec<C64>, direction: &[C64], epsilons: Vec<f64>, plane: PlaneChoice, seed: u64) -> Result<RaySpec, AsymptError> {
        let norm: f64 = direction.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if anchor.len() != direction.len() || !(norm > 0.0) || !norm.is_finite() {
            return Err(AsymptError::InvalidRay("direction must be nonzero and match the dimension".into()));
        }
        if epsilons.is_empty() {
            return Err(AsymptError::InvalidRay("empty ε list".into()));
        }
        if epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) || epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(AsymptError::InvalidRay("ε list must be positive and strictly decreasing".into()));
        }
        Ok(RaySpec {
            anchor,
            direction: direction.iter().map(|v| v / norm).collect(),
            epsilons,
            plane,
            seed,
        })
    }
}

/// `count` values from `start` to `stop` in geometric progression.
pub fn geometric_epsilons(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![start];
    }
    let q = (stop / start).powf(1.0 / (count as f64 - 1.0));
    (0..count).map(|k| if k + 1 == count { stop } else { start * q.powi(k as i32) }).collect()
}

fn along_ray(ray_anchor: &[C64], dir: &[C64], t: f64) -> Vec<C64> {
    ray_anchor.iter().zip(dir).map(|(a, d)| a + d * t).collect()
}

/// `φ = −K^{−1/(n+1)}` from the kernel value; `None` outside the domain.
fn phi_value(model: &KernelModel, z: &[C64]) -> Result<Option<f64>, DomainError> {
    if !model.spec.contains(z) {
        return Ok(None);
    }
    let k = model.kernel_value(z)?;
    if !(k > 0.0) || !k.is_finite() {
        return Ok(None);
    }
    Ok(Some(-k.powf(-1.0 / (model.dim() as f64 + 1.0))))
}

/// Point on the ray with `φ = −ε`.
pub fn locate_level(model: &KernelModel, anchor: &[C64], direction: &[C64], epsilon: f64) -> Result<Vec<C64>, AsymptError> {
    let target = -epsilon;
    let not_bracketed = |reason: &str| AsymptError::RootNotBracketed {
        target,
        reason: reason.to_string(),
    };
    let g = |t: f64| -> Result<Option<f64>, DomainError> {
        Ok(phi_value(model, &along_ray(anchor, direction, t))?.map(|p| p - target))
    };
    let g0 = g(0.0)?.ok_or_else(|| not_bracketed("anchor outside the domain"))?;
    if g0 == 0.0 {
        return Ok(anchor.to_vec());
    }
    if g0 > 0.0 {
        return Err(not_bracketed("anchor already beyond the level"));
    }
    // Exit parameter of the domain along the ray.
    let mut t_out = 1.0;
    while model.spec.contains(&along_ray(anchor, direction, t_out)) {
        t_out *= 2.0;
        if t_out > 1e12 {
            return Err(not_bracketed("ray does not leave the domain"));
        }
    }
    let (mut a, mut b) = (0.0, t_out);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if model.spec.contains(&along_ray(anchor, direction, m)) {
            a = m;
        } else {
            b = m;
        }
    }
    let t_exit = a;
    // Bracket from the inside. Near the boundary the series may not converge;
    // such points cap the search instead of ending it, so the error only
    // surfaces when no evaluable point lies beyond the level.
    let (mut lo, mut hi) = (0.0, f64::NAN);
    let (mut glo, mut ghi) = (g0, f64::NAN);
    let mut cap = t_exit;
    let mut last_err = None;
    for _ in 0..200 {
        let t = lo + 0.5 * (cap - lo);
        if !(t > lo && t < cap) {
            break;
        }
        match g(t) {
            Ok(Some(v)) if v >= 0.0 => {
                hi = t;
                ghi = v;
                break;
            }
            Ok(Some(v)) => {
                lo = t;
                glo = v;
            }
            Ok(None) => cap = t,
            Err(e @ DomainError::SeriesNotConverged { .. }) => {
                cap = t;
                last_err = Some(e);
            }
            Err(e) => return Err(e.into()),
        }
    }
    if hi.is_nan() {
        return Err(match last_err {
            Some(e) => e.into(),
            None => not_bracketed("φ stays below the level up to the boundary"),
        });
    }
    let tol = LEVEL_TOL * (1.0 + epsilon);
    // Illinois-modified regula falsi, falling back to bisection.
    let mut side = 0i8;
    for _ in 0..200 {
        let mut t = hi - ghi * (hi - lo) / (ghi - glo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let v = g(t)?.ok_or_else(|| not_bracketed("kernel evaluation failed inside the bracket"))?;
        if v.abs() < tol {
            return Ok(along_ray(anchor, direction, t));
        }
        if v < 0.0 {
            lo = t;
            glo = v;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            ghi = v;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
        if hi - lo < 1e-16 * hi {
            return Ok(along_ray(anchor, direction, t));
        }
    }
    Err(not_bracketed("no convergence"))
}

/// Least-squares fit `y ≈ L + c x`, returning `(L, c, rms residual)`.
pub fn fit_linear(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64), AsymptError> {
    let m = x.len();
    if m < 2 {
        return Err(AsymptError::InsufficientRows(m, 2));
    }
    let a = nalgebra::DMatrix::from_fn(m, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let b = nalgebra::DVector::from_column_slice(y);
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| AsymptError::InvalidRay(e.to_string()))?;
    let resid = (&a * &sol - &b).norm() / (m as f64).sqrt();
    Ok((sol[0], sol[1], resid))
}

/// Exponent `p` in `y ≈ L + c x^p` from three rows; `None` when the
/// differences are at roundoff level or not monotone.
pub fn fit_order(x: &[f64; 3], y: &[f64; 3]) -> Option<f64> {
    let d1 = y[0] - y[1];
    let d2 = y[1] - y[2];
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() {
        return None;
    }
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if d2.abs() < 1e-12 * scale {
        return None;
    }
    let target = d1 / d2;
    let h = |p: f64| (x[0].powf(p) - x[1].powf(p)) / (x[1].powf(p) - x[2].powf(p)) - target;
    let (mut lo, mut hi) = (1e-3, 12.0);
    if h(lo).signum() == h(hi).signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if h(m).signum() == h(lo).signum() {
            lo = m;
        } else {
            hi = m;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub sample: CurvatureSample,
    /// Curvature of the plane selected in the ray spec.
    pub k: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Extrapolation {
    pub limit: f64,
    pub slope: f64,
    pub fit_residual: f64,
    pub fit_order: Option<f64>,
}

pub fn extrapolate(eps: &[f64], vals: &[f64], fit_rows: usize) -> Result<Extrapolation, AsymptError> {
    let m = fit_rows.min(eps.len());
    if m < 2 {
        return Err(AsymptError::InsufficientRows(eps.len(), 2));
    }
    let tail = eps.len() - m;
    let (limit, slope, fit_residual) = fit_linear(&eps[tail..], &vals[tail..])?;
    let k = eps.len();
    let fit_order = if k >= 3 {
        fit_order(&[eps[k - 3], eps[k - 2], eps[k - 1]], &[vals[k - 3], vals[k - 2], vals[k - 1]])
    } else {
        None
    };
    Ok(Extrapolation {
        limit,
        slope,
        fit_residual,
        fit_order,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanLimits {
    pub k_g_h: Extrapolation,
    pub k_g_sigma0: Extrapolation,
    pub l1: Extrapolation,
    pub l2: Extrapolation,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub plane: String,
    pub seed: u64,
    pub anchor: Vec<C64>,
    pub direction: Vec<C64>,
    /// Sorted by decreasing ε.
    pub rows: Vec<ScanRow>,
    pub extrapolated_limit: f64,
    pub fit_order: Option<f64>,
    pub fit_residual: f64,
    pub limits: ScanLimits,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// `|k − L|` failed to decrease over the last three rows.
    pub monotone_tail_warning: bool,
}

/// Target limit `−4/(n+1)`.
pub fn klembeck_target(n: usize) -> f64 {
    -4.0 / (n as f64 + 1.0)
}

/// Horizontal direction for row `row` of a seeded scan.
pub fn random_direction(seed: u64, row: usize, n: usize) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn sample_row(model: &KernelModel, ray: &RaySpec, row: usize) -> Result<ScanRow, AsymptError> {
    let eps = ray.epsilons[row];
    let wrap = |source: CheckError| AsymptError::Row { epsilon: eps, source };
    let z = locate_level(model, &ray.anchor, &ray.direction, eps)?;
    let geo = Geometry::from_model(model, &z).map_err(wrap)?;
    let n = model.dim();
    let c = match &ray.plane {
        PlaneChoice::HorizontalFixed(c) => c.clone(),
        _ => random_direction(ray.seed, row, n),
    };
    let sample = geo.sample(&c).map_err(wrap)?;
    let k = match ray.plane {
        PlaneChoice::Sigma0 => sample.k_g_sigma0,
        _ => sample.k_g_h,
    };
    Ok(ScanRow { sample, k })
}

/// Samples every ε of the ray and extrapolates from the last `fit_rows` rows.
pub fn scan(model: &KernelModel, ray: &RaySpec, fit_rows: usize, tolerance: f64) -> Result<ScanReport, AsymptError> {
    let rows: Vec<ScanRow> = (0..ray.epsilons.len())
        .into_par_iter()
        .map(|i| sample_row(model, ray, i))
        .collect::<Result<_, _>>()?;
    let eps: Vec<f64> = ray.epsilons.clone();
    let col = |f: &dyn Fn(&ScanRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let ks = col(&|r| r.k);
    let main = extrapolate(&eps, &ks, fit_rows)?;
    let limits = ScanLimits {
        k_g_h: extrapolate(&eps, &col(&|r| r.sample.k_g_h), fit_rows)?,
        k_g_sigma0: extrapolate(&eps, &col(&|r| r.sample.k_g_sigma0), fit_rows)?,
        l1: extrapolate(&eps, &col(&|r| r.sample.l1), fit_rows)?,
        l2: extrapolate(&eps, &col(&|r| r.sample.l2), fit_rows)?,
    };
    let target = klembeck_target(model.dim());
    let k = ks.len();
    let monotone_tail_warning = k >= 3 && {
        let d: Vec<f64> = ks[k - 3..].iter().map(|v| (v - main.limit).abs()).collect();
        !(d[0] >= d[1] && d[1] >= d[2])
    };
    Ok(ScanReport {
        plane: ray.plane.name().to_string(),
        seed: ray.seed,
        anchor: ray.anchor.clone(),
        direction: ray.direction.clone(),
        rows,
        extrapolated_limit: main.limit,
        fit_order: main.fit_order,
        fit_residual: main.fit_residual,
        limits,
        target,
        tolerance,
        pass: (main.limit - target).abs() < tolerance,
        monotone_tail_warning,
    })
}
