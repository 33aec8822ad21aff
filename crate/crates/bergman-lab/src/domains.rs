//! Test domains with computable Bergman kernels.
//!
//! Three families: the unit ball (closed form), affine images of the ball
//! (closed form via the transformation law), and complete Reinhardt domains
//! `{z : P(|z₁|², …, |zₙ|²) < 1}` whose kernel is the monomial series
//! `Σ_m |z^m|² / c_m`. The norms `c_m` come from quadrature over the shadow
//! `{s ≥ 0 : P(s) < 1}` and are cached on disk.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cjet::{seed_coordinates, Jet, JetError, C64};
use crate::hexfloat;
use crate::quadrature::{panels_for_degree, sine_square_rule};

pub const DEFAULT_DEGREE: usize = 40;
pub const DEFAULT_QUADRATURE: usize = 64;
pub const DEFAULT_SERIES_TOL: f64 = 1e-8;
pub const CACHE_ENV: &str = "BERGMAN_LAB_CACHE";
const CACHE_FORMAT: &str = "bergman-lab-norms-v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("OutsideDomain: point {0} is not interior")]
    OutsideDomain(String),
    #[error("QuadratureFailure: {0}")]
    QuadratureFailure(String),
    #[error("CacheCorrupt: {path}: {reason}")]
    CacheCorrupt { path: String, reason: String },
    #[error("SeriesNotConverged: tail estimate {tail:e} exceeds tolerance {tol:e}")]
    SeriesNotConverged { tail: f64, tol: f64 },
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error("Io: {0}")]
    Io(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    UnitBall,
    AffineImage,
    ReinhardtSeries,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::UnitBall => "unit_ball",
            DomainKind::AffineImage => "affine_image",
            DomainKind::ReinhardtSeries => "reinhardt_series",
        }
    }
}

/// `z = F w + t`, mapping the unit ball onto the domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineMap {
    pub matrix: Vec<Vec<C64>>,
    pub translation: Vec<C64>,
    inverse: Vec<Vec<C64>>,
    det_inv_abs2: f64,
    condition: f64,
}

impl AffineMap {
    pub fn new(matrix: Vec<Vec<C64>>, translation: Vec<C64>) -> Result<AffineMap, DomainError> {
        let n = matrix.len();
        if n == 0 || matrix.iter().any(|r| r.len() != n) || translation.len() != n {
            return Err(DomainError::InvalidSpec(
                "affine map must be a square matrix with matching translation".into(),
            ));
        }
        let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
        let sv = m.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 1e-14 * smax) {
            return Err(DomainError::InvalidSpec(
                "affine map is not invertible".into(),
            ));
        }
        let inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| DomainError::InvalidSpec("affine map is not invertible".into()))?;
        let det = m.determinant();
        Ok(AffineMap {
            inverse: (0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect(),
            det_inv_abs2: 1.0 / det.norm_sqr(),
            condition: smax / smin,
            matrix,
            translation,
        })
    }

    pub fn identity(n: usize) -> AffineMap {
        let m = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                    .collect()
            })
            .collect();
        AffineMap::new(m, vec![C64::new(0.0, 0.0); n]).expect("identity is invertible")
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// `F⁻¹(z − t)`.
    pub fn pull(&self, z: &[C64]) -> Vec<C64> {
        let n = z.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.inverse[i][j] * (z[j] - self.translation[j]))
                    .sum()
            })
            .collect()
    }

    /// `F w + t`.
    pub fn push(&self, w: &[C64]) -> Vec<C64> {
        let n = w.len();
        (0..n)
            .map(|i| {
                self.translation[i] + (0..n).map(|j| self.matrix[i][j] * w[j]).sum::<C64>()
            })
            .collect()
    }

    fn canonical(&self) -> String {
        let mut s = String::new();
        for row in self.matrix.iter().chain(std::iter::once(&self.translation)) {
            for v in row {
                let _ = write!(s, "{},{};", hexfloat::format(v.re), hexfloat::format(v.im));
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowTerm {
    pub exps: Vec<u32>,
    pub coeff: f64,
}

/// Polynomial `P(s)`; the shadow is `{s ≥ 0 : P(s) < 1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowPolynomial {
    pub dim: usize,
    pub terms: Vec<ShadowTerm>,
}

/// Result of sampling the Hessian of `P` over the closed shadow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShadowCheck {
    pub min_hessian_eigenvalue: f64,
    pub convex: bool,
    pub strictly_convex: bool,
}

impl ShadowPolynomial {
    pub fn new(dim: usize, terms: Vec<ShadowTerm>) -> Result<ShadowPolynomial, DomainError> {
        if dim == 0 || terms.iter().any(|t| t.exps.len() != dim) {
            return Err(DomainError::InvalidSpec(
                "shadow term exponents must match the dimension".into(),
            ));
        }
        let p = ShadowPolynomial { dim, terms };
        if p.eval(&vec![0.0; dim]) >= 1.0 {
            return Err(DomainError::InvalidSpec("shadow must contain 0".into()));
        }
        Ok(p)
    }

    /// `s₁ + … + sₙ`: the unit ball.
    pub fn ball(dim: usize) -> ShadowPolynomial {
        let terms = (0..dim)
            .map(|j| {
                let mut e = vec![0; dim];
                e[j] = 1;
                ShadowTerm { exps: e, coeff: 1.0 }
            })
            .collect();
        ShadowPolynomial { dim, terms }
    }

    /// `s + t + (s² + t²)/2`, the shipped non-homogeneous example.
    pub fn perturbed_ball() -> ShadowPolynomial {
        let t = |a: u32, b: u32, c: f64| ShadowTerm {
            exps: vec![a, b],
            coeff: c,
        };
        ShadowPolynomial {
            dim: 2,
            terms: vec![t(1, 0, 1.0), t(0, 1, 1.0), t(2, 0, 0.5), t(0, 2, 0.5)],
        }
    }

    pub fn eval(&self, s: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.exps
                        .iter()
                        .zip(s)
                        .map(|(&e, &x)| x.powi(e as i32))
                        .product::<f64>()
            })
            .sum()
    }

    fn partial_term(t: &ShadowTerm, s: &[f64], a: usize, b: Option<usize>) -> f64 {
        let mut e: Vec<i64> = t.exps.iter().map(|&x| x as i64).collect();
        let mut c = t.coeff * e[a] as f64;
        e[a] -= 1;
        if let Some(b) = b {
            c *= e[b] as f64;
            e[b] -= 1;
        }
        if c == 0.0 {
            return 0.0;
        }
        c * e.iter().zip(s).map(|(&k, &x)| x.powi(k as i32)).product::<f64>()
    }

    pub fn gradient(&self, s: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|a| {
                self.terms
                    .iter()
                    .map(|t| Self::partial_term(t, s, a, None))
                    .sum()
            })
            .collect()
    }

    pub fn hessian(&self, s: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |a, b| {
            self.terms
                .iter()
                .map(|t| Self::partial_term(t, s, a, Some(b)))
                .sum()
        })
    }

    /// `R(ω) > 0` with `P(R ω) = 1`, for `ω` on the standard simplex.
    pub fn ray_root(&self, omega: &[f64]) -> Result<f64, DomainError> {
        let f = |r: f64| {
            let s: Vec<f64> = omega.iter().map(|w| r * w).collect();
            self.eval(&s) - 1.0
        };
        let mut hi = 1.0;
        while f(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e8 {
                return Err(DomainError::QuadratureFailure(format!(
                    "shadow is unbounded along {omega:?}"
                )));
            }
        }
        let mut lo = 0.0;
        let mut r = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fr = f(r);
            if fr == 0.0 {
                return Ok(r);
            }
            if fr < 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            let s: Vec<f64> = omega.iter().map(|w| r * w).collect();
            let slope: f64 = self
                .gradient(&s)
                .iter()
                .zip(omega)
                .map(|(g, w)| g * w)
                .sum();
            let newton = r - fr / slope;
            r = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 4.0 * f64::EPSILON * hi || (fr.abs() < 1e-16 && slope > 0.0) {
                break;
            }
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(DomainError::QuadratureFailure(format!(
                "degenerate shadow map along {omega:?}"
            )));
        }
        Ok(r)
    }

    /// Samples the Hessian on a grid of the closed shadow.
    pub fn check_convexity(&self, samples_per_axis: usize) -> Result<ShadowCheck, DomainError> {
        let mut min_eig = f64::INFINITY;
        let k = samples_per_axis.max(2);
        let mut idx = vec![0usize; self.dim];
        loop {
            let omega_raw: Vec<f64> = idx.iter().map(|&i| i as f64 + 0.5).collect();
            let total: f64 = omega_raw.iter().sum();
            let omega: Vec<f64> = omega_raw.iter().map(|x| x / total).collect();
            let root = self.ray_root(&omega)?;
            for step in 0..=k {
                let r = root * step as f64 / k as f64;
                let s: Vec<f64> = omega.iter().map(|w| r * w).collect();
                let eig = self.hessian(&s).symmetric_eigenvalues().min();
                min_eig = min_eig.min(eig);
            }
            let mut j = 0;
            while j < self.dim {
                idx[j] += 1;
                if idx[j] < k {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == self.dim {
                break;
            }
        }
        Ok(ShadowCheck {
            min_hessian_eigenvalue: min_eig,
            convex: min_eig >= -1e-12,
            strictly_convex: min_eig > 1e-12,
        })
    }

    fn canonical(&self) -> String {
        let mut s = String::new();
        for t in &self.terms {
            let e: Vec<String> = t.exps.iter().map(u32::to_string).collect();
            let _ = write!(s, "{}:{};", hexfloat::format(t.coeff), e.join(","));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub dim: usize,
    pub affine_map: Option<AffineMap>,
    pub shadow: Option<ShadowPolynomial>,
    pub truncation_degree: usize,
    pub quadrature_order: usize,
}

impl DomainSpec {
    pub fn unit_ball(dim: usize) -> DomainSpec {
        DomainSpec {
            kind: DomainKind::UnitBall,
            dim,
            affine_map: None,
            shadow: None,
            truncation_degree: DEFAULT_DEGREE,
            quadrature_order: DEFAULT_QUADRATURE,
        }
    }

    pub fn affine_image(map: AffineMap) -> DomainSpec {
        DomainSpec {
            kind: DomainKind::AffineImage,
            dim: map.translation.len(),
            affine_map: Some(map),
            shadow: None,
            truncation_degree: DEFAULT_DEGREE,
            quadrature_order: DEFAULT_QUADRATURE,
        }
    }

    pub fn reinhardt_series(shadow: ShadowPolynomial, degree: usize, quadrature: usize) -> DomainSpec {
        DomainSpec {
            kind: DomainKind::ReinhardtSeries,
            dim: shadow.dim,
            affine_map: None,
            shadow: Some(shadow),
            truncation_degree: degree,
            quadrature_order: quadrature,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.dim == 0 {
            return Err(DomainError::InvalidSpec("dimension must be positive".into()));
        }
        match self.kind {
            DomainKind::UnitBall => Ok(()),
            DomainKind::AffineImage => match &self.affine_map {
                Some(m) if m.translation.len() == self.dim => Ok(()),
                _ => Err(DomainError::InvalidSpec(
                    "affine_image needs an affine map of matching dimension".into(),
                )),
            },
            DomainKind::ReinhardtSeries => {
                let shadow = self.shadow.as_ref().ok_or_else(|| {
                    DomainError::InvalidSpec("reinhardt_series needs a shadow".into())
                })?;
                if shadow.dim != self.dim {
                    return Err(DomainError::InvalidSpec("shadow dimension mismatch".into()));
                }
                if self.truncation_degree == 0 || self.quadrature_order == 0 {
                    return Err(DomainError::InvalidSpec(
                        "degree and quadrature order must be positive".into(),
                    ));
                }
                let check = shadow.check_convexity(12)?;
                if !check.convex {
                    return Err(DomainError::InvalidSpec(format!(
                        "shadow is not convex (min Hessian eigenvalue {:e})",
                        check.min_hessian_eigenvalue
                    )));
                }
                Ok(())
            }
        }
    }

    /// Hex SHA-256 of the fields that determine the norm table.
    pub fn spec_hash(&self) -> String {
        let mut s = format!(
            "{CACHE_FORMAT};kind={};dim={};degree={};quadrature={};",
            self.kind.name(),
            self.dim,
            self.truncation_degree,
            self.quadrature_order
        );
        if let Some(sh) = &self.shadow {
            s.push_str("shadow=");
            s.push_str(&sh.canonical());
        }
        if let Some(m) = &self.affine_map {
            s.push_str("affine=");
            s.push_str(&m.canonical());
        }
        let digest = Sha256::digest(s.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn contains(&self, z: &[C64]) -> bool {
        if z.len() != self.dim {
            return false;
        }
        match self.kind {
            DomainKind::UnitBall => norm_sqr(z) < 1.0,
            DomainKind::AffineImage => match &self.affine_map {
                Some(m) => norm_sqr(&m.pull(z)) < 1.0,
                None => false,
            },
            DomainKind::ReinhardtSeries => match &self.shadow {
                Some(sh) => {
                    let s: Vec<f64> = z.iter().map(|v| v.norm_sqr()).collect();
                    sh.eval(&s) < 1.0
                }
                None => false,
            },
        }
    }
}

fn norm_sqr(z: &[C64]) -> f64 {
    z.iter().map(|v| v.norm_sqr()).sum()
}

pub fn format_point(z: &[C64]) -> String {
    z.iter()
        .map(|v| format!("{}{:+}i", v.re, v.im))
        .collect::<Vec<_>>()
        .join(" ")
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

/// Number of monomials of total degree exactly `d` in `n` variables.
pub fn shell_size(n: usize, d: usize) -> usize {
    binom(d + n - 1, n - 1)
}

/// Number of monomials of total degree at most `d` in `n` variables.
pub fn monomial_count(n: usize, d: usize) -> usize {
    binom(d + n, n)
}

/// Advances `m` to the next multi-index of the same degree
/// (first coordinate descending, then recursively); false at the end.
pub fn next_in_shell(m: &mut [u32]) -> bool {
    let n = m.len();
    if n < 2 {
        return false;
    }
    let Some(j) = (0..n - 1).rev().find(|&j| m[j] > 0) else {
        return false;
    };
    let tail = m[n - 1];
    m[n - 1] = 0;
    m[j] -= 1;
    m[j + 1] = tail + 1;
    true
}

/// Position of `m` in the graded enumeration used by [`NormTable`].
pub fn monomial_rank(m: &[u32]) -> usize {
    let n = m.len();
    let d: usize = m.iter().map(|&x| x as usize).sum();
    let mut rank = if d == 0 { 0 } else { monomial_count(n, d - 1) };
    let mut left = d;
    for i in 0..n.saturating_sub(1) {
        let mi = m[i] as usize;
        for k in (mi + 1)..=left {
            rank += shell_size(n - 1 - i, left - k);
        }
        left -= mi;
    }
    rank
}

/// Logarithms of the squared monomial norms, in graded order.
#[derive(Debug, Clone, PartialEq)]
pub struct NormTable {
    pub dim: usize,
    pub degree: usize,
    pub quadrature_order: usize,
    pub spec_hash: String,
    pub log_norms: Vec<f64>,
}

impl NormTable {
    pub fn log_norm(&self, m: &[u32]) -> f64 {
        self.log_norms[monomial_rank(m)]
    }

    /// `c_m`; underflows to zero for very high degrees, use [`Self::log_norm`].
    pub fn norm(&self, m: &[u32]) -> f64 {
        self.log_norm(m).exp()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# {CACHE_FORMAT} spec_hash={} degree={} quadrature={} dim={} value=ln_c\n",
            self.spec_hash, self.degree, self.quadrature_order, self.dim
        );
        let mut idx = 0;
        for d in 0..=self.degree {
            let mut m = vec![0u32; self.dim];
            m[0] = d as u32;
            loop {
                for e in &m {
                    let _ = write!(out, "{e} ");
                }
                out.push_str(&hexfloat::format(self.log_norms[idx]));
                out.push('\n');
                idx += 1;
                if !next_in_shell(&mut m) {
                    break;
                }
            }
        }
        out
    }

    pub fn from_text(text: &str, path: &str) -> Result<NormTable, DomainError> {
        let corrupt = |reason: String| DomainError::CacheCorrupt {
            path: path.to_string(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| corrupt("empty file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("#") || fields.next() != Some(CACHE_FORMAT) {
            return Err(corrupt("bad header".into()));
        }
        let mut hash = None;
        let mut degree = None;
        let mut quad = None;
        let mut dim = None;
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| corrupt("bad header field".into()))?;
            match k {
                "spec_hash" => hash = Some(v.to_string()),
                "degree" => degree = v.parse::<usize>().ok(),
                "quadrature" => quad = v.parse::<usize>().ok(),
                "dim" => dim = v.parse::<usize>().ok(),
                "value" if v == "ln_c" => {}
                _ => return Err(corrupt(format!("unknown header field {k}"))),
            }
        }
        let (Some(spec_hash), Some(degree), Some(quadrature_order), Some(dim)) =
            (hash, degree, quad, dim)
        else {
            return Err(corrupt("incomplete header".into()));
        };
        if dim == 0 {
            return Err(corrupt("zero dimension".into()));
        }
        let total = monomial_count(dim, degree);
        let mut log_norms = Vec::with_capacity(total);
        for d in 0..=degree {
            let mut m = vec![0u32; dim];
            m[0] = d as u32;
            loop {
                let line = lines
                    .next()
                    .ok_or_else(|| corrupt(format!("truncated at entry {}", log_norms.len())))?;
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != dim + 1 {
                    return Err(corrupt(format!("malformed line {:?}", line)));
                }
                for (p, e) in parts.iter().zip(&m) {
                    if p.parse::<u32>().ok() != Some(*e) {
                        return Err(corrupt(format!("unexpected multi-index in {:?}", line)));
                    }
                }
                let v = hexfloat::parse(parts[dim])
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| corrupt(format!("bad value in {:?}", line)))?;
                log_norms.push(v);
                if !next_in_shell(&mut m) {
                    break;
                }
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(corrupt("trailing data".into()));
        }
        Ok(NormTable {
            dim,
            degree,
            quadrature_order,
            spec_hash,
            log_norms,
        })
    }

    pub fn cache_path(dir: &Path, spec_hash: &str) -> PathBuf {
        dir.join(format!("{spec_hash}.norms"))
    }

    /// Single-writer store: write to a temporary file, then rename.
    pub fn write_cache(&self, dir: &Path) -> Result<PathBuf, DomainError> {
        fs::create_dir_all(dir).map_err(|e| DomainError::Io(e.to_string()))?;
        let path = Self::cache_path(dir, &self.spec_hash);
        let tmp = dir.join(format!("{}.tmp{}", self.spec_hash, std::process::id()));
        fs::write(&tmp, self.to_text()).map_err(|e| DomainError::Io(e.to_string()))?;
        fs::rename(&tmp, &path).map_err(|e| DomainError::Io(e.to_string()))?;
        Ok(path)
    }

    pub fn read_cache(path: &Path) -> Result<NormTable, DomainError> {
        let text = fs::read_to_string(path).map_err(|e| DomainError::CacheCorrupt {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        NormTable::from_text(&text, &path.display().to_string())
    }
}

struct SimplexNode {
    log_omega: Vec<f64>,
    log_root: f64,
    log_weight: f64,
}

/// Nodes on the standard simplex by stick-breaking, each axis on the
/// composite sine-square rule.
fn simplex_nodes(shadow: &ShadowPolynomial, degree: usize, q: usize) -> Result<Vec<SimplexNode>, DomainError> {
    let n = shadow.dim;
    let rule = sine_square_rule(panels_for_degree(degree), q);
    let mut nodes = Vec::new();
    let mut idx = vec![0usize; n - 1];
    loop {
        let mut log_omega = Vec::with_capacity(n);
        let mut omega = Vec::with_capacity(n);
        let mut rest_log = 0.0;
        let mut rest = 1.0;
        let mut log_w = 0.0;
        for (i, &k) in idx.iter().enumerate() {
            let (u, one_minus_u, w) = rule[k];
            log_omega.push(rest_log + u.ln());
            omega.push(rest * u);
            log_w += w.ln() + (n - 2 - i) as f64 * rest_log;
            rest_log += one_minus_u.ln();
            rest *= one_minus_u;
        }
        log_omega.push(rest_log);
        omega.push(rest);
        let root = shadow.ray_root(&omega)?;
        nodes.push(SimplexNode {
            log_omega,
            log_root: root.ln(),
            log_weight: log_w,
        });
        let mut j = 0;
        while j < n - 1 {
            idx[j] += 1;
            if idx[j] < rule.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == n - 1 {
            break;
        }
    }
    Ok(nodes)
}

/// `ln c_m` for every `|m| ≤ degree`, where
/// `c_m = πⁿ ∫_Δ ω^m R(ω)^{|m|+n} / (|m|+n) dω`.
pub fn compute_log_norms(shadow: &ShadowPolynomial, degree: usize, q: usize) -> Result<Vec<f64>, DomainError> {
    let n = shadow.dim;
    let npi = n as f64 * PI.ln();
    if n == 1 {
        let root = shadow.ray_root(&[1.0])?;
        return Ok((0..=degree)
            .map(|m| npi + (m as f64 + 1.0) * root.ln() - (m as f64 + 1.0).ln())
            .collect());
    }
    let nodes = simplex_nodes(shadow, degree, q)?;
    let shells: Vec<Result<Vec<f64>, DomainError>> = (0..=degree)
        .into_par_iter()
        .map(|d| {
            let mut out = Vec::with_capacity(shell_size(n, d));
            let mut m = vec![0u32; n];
            m[0] = d as u32;
            let mut buf = vec![0.0; nodes.len()];
            let p = (d + n) as f64;
            loop {
                let mut mx = f64::NEG_INFINITY;
                for (b, node) in buf.iter_mut().zip(&nodes) {
                    let mut e = node.log_weight + p * node.log_root;
                    for (k, &mk) in m.iter().enumerate() {
                        if mk > 0 {
                            e += mk as f64 * node.log_omega[k];
                        }
                    }
                    *b = e;
                    mx = mx.max(e);
                }
                if !mx.is_finite() {
                    return Err(DomainError::QuadratureFailure(format!(
                        "integrand vanished for m = {m:?}"
                    )));
                }
                let cut = mx - 46.0;
                let s: f64 = buf.iter().filter(|&&e| e > cut).map(|&e| (e - mx).exp()).sum();
                out.push(npi + mx + s.ln() - p.ln());
                if !next_in_shell(&mut m) {
                    break;
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(monomial_count(n, degree));
    for s in shells {
        all.extend(s?);
    }
    Ok(all)
}

/// Norm table for a Reinhardt spec, read from or written to `cache_dir`.
pub fn monomial_norms(spec: &DomainSpec, cache_dir: Option<&Path>) -> Result<NormTable, DomainError> {
    if spec.kind != DomainKind::ReinhardtSeries {
        return Err(DomainError::InvalidSpec(
            "monomial norms need a reinhardt_series spec".into(),
        ));
    }
    spec.validate()?;
    let shadow = spec.shadow.as_ref().expect("validated");
    let hash = spec.spec_hash();
    if let Some(dir) = cache_dir {
        let path = NormTable::cache_path(dir, &hash);
        if path.exists() {
            let table = NormTable::read_cache(&path)?;
            if table.spec_hash != hash
                || table.degree != spec.truncation_degree
                || table.quadrature_order != spec.quadrature_order
                || table.dim != spec.dim
            {
                return Err(DomainError::CacheCorrupt {
                    path: path.display().to_string(),
                    reason: "header does not match the requested spec".into(),
                });
            }
            return Ok(table);
        }
    }
    let log_norms = compute_log_norms(shadow, spec.truncation_degree, spec.quadrature_order)?;
    let table = NormTable {
        dim: spec.dim,
        degree: spec.truncation_degree,
        quadrature_order: spec.quadrature_order,
        spec_hash: hash,
        log_norms,
    };
    if let Some(dir) = cache_dir {
        table.write_cache(dir)?;
    }
    Ok(table)
}

/// Cache directory from the environment, if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Jet of `K(z,z) = n! π⁻ⁿ (1 − |z|²)^{−(n+1)}`.
pub fn kernel_ball(n: usize, z: &[C64]) -> Result<Jet, DomainError> {
    if z.len() != n || n == 0 {
        return Err(DomainError::InvalidSpec("point dimension mismatch".into()));
    }
    if norm_sqr(z) >= 1.0 {
        return Err(DomainError::OutsideDomain(format_point(z)));
    }
    let c = seed_coordinates(z);
    ball_kernel_of(&c[..n], &c[n..])
}

fn ball_kernel_of(w: &[Jet], wbar: &[Jet]) -> Result<Jet, DomainError> {
    let n = w.len();
    let mut s = w[0].mul_jet(&wbar[0]);
    for j in 1..n {
        s += &w[j].mul_jet(&wbar[j]);
    }
    let one_minus = (-s).add_scalar(1.0);
    let c0 = (1..=n).map(|k| k as f64).product::<f64>() / PI.powi(n as i32);
    Ok(one_minus.powf(-((n + 1) as f64))?.scale(c0))
}

/// `K_{F(B)}(z,z) = K_B(w,w) |det F⁻¹|²` with `w = F⁻¹(z − t)`.
pub fn affine_pushforward(spec: &DomainSpec, z: &[C64]) -> Result<Jet, DomainError> {
    let map = spec
        .affine_map
        .as_ref()
        .ok_or_else(|| DomainError::InvalidSpec("affine_image needs a map".into()))?;
    let n = spec.dim;
    if z.len() != n {
        return Err(DomainError::InvalidSpec("point dimension mismatch".into()));
    }
    if !spec.contains(z) {
        return Err(DomainError::OutsideDomain(format_point(z)));
    }
    let c = seed_coordinates(z);
    let w: Vec<Jet> = (0..n)
        .map(|i| {
            let mut acc = c[0].constant_like(0.0);
            for j in 0..n {
                let shifted = c[j].add_scalar(-map.translation[j]);
                acc += &shifted.scale(map.inverse[i][j]);
            }
            acc
        })
        .collect();
    let wbar: Vec<Jet> = w.iter().map(Jet::conj).collect();
    Ok(ball_kernel_of(&w, &wbar)?.scale(map.det_inv_abs2))
}

/// Kernel jet with the relative truncation bound of the series, zero for
/// closed forms.
#[derive(Debug, Clone)]
pub struct KernelJet {
    pub k: Jet,
    pub tail_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct KernelModel {
    pub spec: DomainSpec,
    pub norms: Option<Arc<NormTable>>,
    pub series_tol: f64,
}

impl KernelModel {
    pub fn build(spec: DomainSpec, cache_dir: Option<&Path>) -> Result<KernelModel, DomainError> {
        spec.validate()?;
        let norms = match spec.kind {
            DomainKind::ReinhardtSeries => Some(Arc::new(monomial_norms(&spec, cache_dir)?)),
            _ => None,
        };
        Ok(KernelModel {
            spec,
            norms,
            series_tol: DEFAULT_SERIES_TOL,
        })
    }

    pub fn with_series_tol(mut self, tol: f64) -> KernelModel {
        self.series_tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn kernel_jet(&self, z: &[C64]) -> Result<KernelJet, DomainError> {
        match self.spec.kind {
            DomainKind::UnitBall => Ok(KernelJet {
                k: kernel_ball(self.spec.dim, z)?,
                tail_estimate: 0.0,
            }),
            DomainKind::AffineImage => Ok(KernelJet {
                k: affine_pushforward(&self.spec, z)?,
                tail_estimate: 0.0,
            }),
            DomainKind::ReinhardtSeries => kernel_series(self, z),
        }
    }

    /// `K(z,z)` alone, without derivatives.
    pub fn kernel_value(&self, z: &[C64]) -> Result<f64, DomainError> {
        match self.spec.kind {
            DomainKind::ReinhardtSeries => {
                check_series_point(self, z)?;
                let s: Vec<f64> = z.iter().map(|v| v.norm_sqr()).collect();
                let sums = series_sums(self, &s, 0)?;
                if !(sums.tail < self.series_tol) {
                    return Err(DomainError::SeriesNotConverged {
                        tail: sums.tail,
                        tol: self.series_tol,
                    });
                }
                Ok(sums.f[0])
            }
            _ => Ok(self.kernel_jet(z)?.k.value().re),
        }
    }
}

fn check_series_point(model: &KernelModel, z: &[C64]) -> Result<(), DomainError> {
    if z.len() != model.spec.dim {
        return Err(DomainError::InvalidSpec("point dimension mismatch".into()));
    }
    if !model.spec.contains(z) {
        return Err(DomainError::OutsideDomain(format_point(z)));
    }
    Ok(())
}

/// Multi-indices `k` in the `s` variables with `|k| ≤ top`.
fn s_indices(n: usize, top: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for d in 0..=top {
        let mut m = vec![0u32; n];
        m[0] = d as u32;
        loop {
            out.push(m.clone());
            if !next_in_shell(&mut m) {
                break;
            }
        }
    }
    out
}

struct SeriesSums {
    /// `∂_s^k F(s₀) / k!`.
    f: Vec<f64>,
    tail: f64,
}

/// Sums `∂_s^k F / k!` of `F(s) = Σ s^m / c_m` at `s₀` for `|k| ≤ top`.
fn series_sums(model: &KernelModel, s0: &[f64], top: usize) -> Result<SeriesSums, DomainError> {
    let table = model.norms.as_ref().expect("series model has norms");
    let n = s0.len();
    let ks = s_indices(n, top);
    let ln_s: Vec<f64> = s0.iter().map(|&s| if s > 0.0 { s.ln() } else { 0.0 }).collect();
    let inv_pow: Vec<Vec<f64>> = s0
        .iter()
        .map(|&s| (0..=top).map(|k| if s > 0.0 { s.powi(-(k as i32)) } else { 0.0 }).collect())
        .collect();
    let mut f = vec![0.0; ks.len()];
    let mut shell = vec![0.0; ks.len()];
    let mut prev = vec![0.0; ks.len()];
    let mut older = vec![0.0; ks.len()];
    let mut idx = 0usize;
    let mut last_degree = 0;
    let mut factor_j = vec![vec![0.0; top + 1]; n];
    for d in 0..=table.degree {
        shell.iter_mut().for_each(|x| *x = 0.0);
        let mut m = vec![0u32; n];
        m[0] = d as u32;
        loop {
            let ln_c = table.log_norms[idx];
            idx += 1;
            let mut skip = false;
            let mut lb = -ln_c;
            for j in 0..n {
                if s0[j] > 0.0 {
                    lb += m[j] as f64 * ln_s[j];
                } else if m[j] as usize > top {
                    skip = true;
                    break;
                }
            }
            if !skip {
                let e = lb.exp();
                if e > 0.0 {
                    for j in 0..n {
                        let mj = m[j] as usize;
                        let mut c = 1.0;
                        for k in 0..=top {
                            factor_j[j][k] = if s0[j] > 0.0 {
                                c * inv_pow[j][k]
                            } else if mj == k {
                                1.0
                            } else {
                                0.0
                            };
                            c = c * (mj as f64 - k as f64) / (k as f64 + 1.0);
                        }
                    }
                    for (t, k) in ks.iter().enumerate() {
                        let mut v = e;
                        for j in 0..n {
                            v *= factor_j[j][k[j] as usize];
                        }
                        shell[t] += v;
                    }
                }
            }
            if !next_in_shell(&mut m) {
                break;
            }
        }
        for t in 0..ks.len() {
            f[t] += shell[t];
        }
        let converged = d >= 2
            && (0..ks.len()).all(|t| shell[t] <= 1e-18 * f[t] && shell[t] <= 0.5 * prev[t]);
        std::mem::swap(&mut older, &mut prev);
        std::mem::swap(&mut prev, &mut shell);
        last_degree = d;
        if converged {
            break;
        }
    }
    let tail = if last_degree == 0 {
        0.0
    } else {
        shell_ratio_tail(&older, &prev, &f)
    };
    Ok(SeriesSums { f, tail })
}

/// `max_k 2 S_D q/(1−q) / F_k` with `q = S_D / S_{D−1}` from the last two
/// summed shells.
fn shell_ratio_tail(before: &[f64], last: &[f64], f: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..f.len() {
        if f[t] <= 0.0 || last[t] == 0.0 {
            continue;
        }
        if before[t] == 0.0 {
            worst = worst.max(last[t] / f[t]);
            continue;
        }
        let q = last[t] / before[t];
        if q >= 1.0 {
            return f64::INFINITY;
        }
        worst = worst.max(2.0 * last[t] * q / (1.0 - q) / f[t]);
    }
    worst
}

/// Jet of the truncated series `Σ_{|m|≤D} |z^m|²/c_m`, with exact
/// term-wise derivatives through order 4.
pub fn kernel_series(model: &KernelModel, z: &[C64]) -> Result<KernelJet, DomainError> {
    check_series_point(model, z)?;
    let n = z.len();
    let s0: Vec<f64> = z.iter().map(|v| v.norm_sqr()).collect();
    let top = crate::cjet::MAX_ORDER;
    let sums = series_sums(model, &s0, top)?;
    if !(sums.tail < model.series_tol) {
        return Err(DomainError::SeriesNotConverged {
            tail: sums.tail,
            tol: model.series_tol,
        });
    }
    let c = seed_coordinates(z);
    let ds: Vec<Jet> = (0..n)
        .map(|j| c[j].mul_jet(&c[n + j]).add_scalar(-s0[j]))
        .collect();
    let mut pows: Vec<Vec<Jet>> = Vec::with_capacity(n);
    for dj in &ds {
        let mut p = vec![dj.constant_like(1.0)];
        for k in 1..=top {
            let next = p[k - 1].mul_jet(dj);
            p.push(next);
        }
        pows.push(p);
    }
    let ks = s_indices(n, top);
    let mut k_jet = c[0].constant_like(0.0);
    for (t, k) in ks.iter().enumerate() {
        let mut term = pows[0][k[0] as usize].clone();
        for j in 1..n {
            term = term.mul_jet(&pows[j][k[j] as usize]);
        }
        k_jet += &term.scale(sums.f[t]);
    }
    Ok(KernelJet {
        k: k_jet,
        tail_estimate: sums.tail,
    })
}

/// `φ = −K^{−1/(n+1)}`.
pub fn defining_function(k: &Jet) -> Result<Jet, DomainError> {
    let n = k.dim();
    Ok(-k.powf(-1.0 / (n as f64 + 1.0))?)
}

pub fn log_kernel(k: &Jet) -> Result<Jet, DomainError> {
    Ok(k.ln()?)
}

/// Closed-form `φ` of the ball: `−(πⁿ/n!)^{1/(n+1)} (1 − |z|²)`.
pub fn ball_phi_closed_form(n: usize, z: &[C64]) -> f64 {
    ball_phi_scale(n) * -(1.0 - norm_sqr(z))
}

/// `a = (πⁿ/n!)^{1/(n+1)}`.
pub fn ball_phi_scale(n: usize) -> f64 {
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    (PI.powi(n as i32) / fact).powf(1.0 / (n as f64 + 1.0))
}

/// Solves `A x = b` for a complex square system (used for tests and seeds).
pub fn complex_solve(a: &[Vec<C64>], b: &[C64]) -> Option<Vec<C64>> {
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let v = DVector::from_column_slice(b);
    m.lu().solve(&v).map(|x| x.iter().copied().collect())
}
