//! Bergman metric and Kähler curvature.
//!
//! Tensor convention: `R_{jk̄rs̄} = −∂_r∂̄_s g_{jk̄} + Σ g^{l̄m} ∂_r g_{jl̄} ∂̄_s g_{mk̄}`,
//! which is the right-hand side of Kobayashi's formula, i.e. `−½` times the
//! tensor on its left. With it the holomorphic sectional curvature is
//! `2 R(Z,Z̄,Z,Z̄) / g(Z,Z̄)²` and the unit ball has `−4/(n+1)`.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::cjet::{Jet, C64};
use crate::fields::{self, Field};
use crate::jlinalg::{self, JetMatrix, SingularJetMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KahlerError {
    #[error("NotPositiveDefinite: Bergman metric fails Cholesky")]
    NotPositiveDefinite,
    #[error("DegeneratePlane: vector norm {0:e} below floor")]
    DegeneratePlane(f64),
    #[error("jet order {0} too low (need {1})")]
    InsufficientOrder(usize, usize),
    #[error(transparent)]
    Singular(#[from] SingularJetMatrix),
}

pub const DEGENERATE_FLOOR: f64 = 1e-14;

fn unit(n: usize, j: usize) -> Vec<u8> {
    let mut e = vec![0u8; n];
    e[j] += 1;
    e
}

fn add_unit(e: &[u8], j: usize) -> Vec<u8> {
    let mut e = e.to_vec();
    e[j] += 1;
    e
}

/// Pointwise metric data from a jet of `log K`.
#[derive(Debug, Clone)]
pub struct MetricPoint {
    pub n: usize,
    /// `g[j][k] = g_{jk̄}`.
    pub g: DMatrix<C64>,
    pub g_inv: DMatrix<C64>,
    /// `dg[r][j][k] = ∂_r g_{jk̄}`.
    pub dg: Vec<Vec<Vec<C64>>>,
    /// `ddg[r][s][j][k] = ∂_r ∂̄_s g_{jk̄}`.
    pub ddg: Vec<Vec<Vec<Vec<C64>>>>,
}

pub fn bergman_metric(log_k: &Jet) -> Result<MetricPoint, KahlerError> {
    if log_k.order() < 4 {
        return Err(KahlerError::InsufficientOrder(log_k.order(), 4));
    }
    let n = log_k.dim();
    let d = |a: &[u8], b: &[u8]| log_k.derivative(a, b);
    let g = DMatrix::from_fn(n, n, |j, k| d(&unit(n, j), &unit(n, k)));
    let herm = DMatrix::from_fn(n, n, |j, k| 0.5 * (g[(j, k)] + g[(k, j)].conj()));
    if herm.clone().cholesky().is_none() {
        return Err(KahlerError::NotPositiveDefinite);
    }
    let g_inv = herm.clone().try_inverse().ok_or(KahlerError::NotPositiveDefinite)?;
    let dg = (0..n)
        .map(|r| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| d(&add_unit(&unit(n, j), r), &unit(n, k)))
                        .collect()
                })
                .collect()
        })
        .collect();
    let ddg = (0..n)
        .map(|r| {
            (0..n)
                .map(|s| {
                    (0..n)
                        .map(|j| {
                            (0..n)
                                .map(|k| {
                                    d(&add_unit(&unit(n, j), r), &add_unit(&unit(n, k), s))
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(MetricPoint {
        n,
        g: herm,
        g_inv,
        dg,
        ddg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureSource {
    HessianRoute,
    KobayashiRoute,
}

/// `R_{jk̄rs̄}` stored at `((j n + k) n + r) n + s`.
#[derive(Debug, Clone)]
pub struct CurvaturePoint {
    pub n: usize,
    pub r: Vec<C64>,
    pub source: CurvatureSource,
}

impl CurvaturePoint {
    pub fn get(&self, j: usize, k: usize, r: usize, s: usize) -> C64 {
        let n = self.n;
        self.r[((j * n + k) * n + r) * n + s]
    }

    pub fn max_abs(&self) -> f64 {
        self.r.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest violation of `R_{jk̄rs̄} = R_{rk̄js̄} = R_{js̄rk̄}` and
    /// `R_{jk̄rs̄} = conj R_{kj̄sr̄}`.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.get(j, k, r, s);
                        worst = worst
                            .max((v - self.get(r, k, j, s)).norm())
                            .max((v - self.get(j, s, r, k)).norm())
                            .max((v - self.get(k, j, s, r).conj()).norm());
                    }
                }
            }
        }
        worst
    }

    /// `max |R − other|` over components.
    pub fn max_diff(&self, other: &CurvaturePoint) -> f64 {
        self.r
            .iter()
            .zip(&other.r)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub fn curvature_hessian(m: &MetricPoint) -> CurvaturePoint {
    let n = m.n;
    let mut out = vec![C64::new(0.0, 0.0); n * n * n * n];
    for j in 0..n {
        for k in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let mut v = -m.ddg[r][s][j][k];
                    for l in 0..n {
                        for mm in 0..n {
                            // ∂̄_s g_{mk̄} = conj(∂_s g_{km̄}).
                            let dbar = m.dg[s][k][mm].conj();
                            v += m.g_inv[(l, mm)] * m.dg[r][j][l] * dbar;
                        }
                    }
                    out[((j * n + k) * n + r) * n + s] = v;
                }
            }
        }
    }
    CurvaturePoint {
        n,
        r: out,
        source: CurvatureSource::HessianRoute,
    }
}

/// Kobayashi's expression through kernel derivatives up to bidegree `(2,2)`.
pub fn curvature_kobayashi(k_jet: &Jet, m: &MetricPoint) -> Result<CurvaturePoint, KahlerError> {
    if k_jet.order() < 4 {
        return Err(KahlerError::InsufficientOrder(k_jet.order(), 4));
    }
    let n = m.n;
    let zero = vec![0u8; n];
    let kd = |a: &[u8], b: &[u8]| k_jet.derivative(a, b);
    let k0 = k_jet.value();
    let u = |j: usize| unit(n, j);
    let uu = |j: usize, r: usize| add_unit(&unit(n, j), r);
    let g = &m.g;
    let mut out = vec![C64::new(0.0, 0.0); n * n * n * n];
    for j in 0..n {
        for k in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let mut v = g[(j, k)] * g[(r, s)] + g[(j, s)] * g[(r, k)];
                    v -= (k0 * kd(&uu(j, r), &uu(k, s)) - kd(&uu(j, r), &zero) * kd(&zero, &uu(k, s)))
                        / (k0 * k0);
                    let mut acc = C64::new(0.0, 0.0);
                    for l in 0..n {
                        for mm in 0..n {
                            let left = k0 * kd(&uu(j, r), &u(l)) - kd(&uu(j, r), &zero) * kd(&zero, &u(l));
                            let right = k0 * kd(&u(mm), &uu(k, s)) - kd(&zero, &uu(k, s)) * kd(&u(mm), &zero);
                            acc += m.g_inv[(l, mm)] * left * right;
                        }
                    }
                    v += acc / (k0 * k0 * k0 * k0);
                    out[((j * n + k) * n + r) * n + s] = v;
                }
            }
        }
    }
    Ok(CurvaturePoint {
        n,
        r: out,
        source: CurvatureSource::KobayashiRoute,
    })
}

/// Holomorphic sectional curvature of the `J`-invariant plane through `Z`.
pub fn hol_sectional(m: &MetricPoint, r: &CurvaturePoint, z: &[C64]) -> Result<f64, KahlerError> {
    let n = m.n;
    let zn: f64 = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if !(zn > DEGENERATE_FLOOR) {
        return Err(KahlerError::DegeneratePlane(zn));
    }
    let mut num = C64::new(0.0, 0.0);
    let mut den = C64::new(0.0, 0.0);
    for j in 0..n {
        for k in 0..n {
            den += m.g[(j, k)] * z[j] * z[k].conj();
            for a in 0..n {
                for b in 0..n {
                    num += r.get(j, k, a, b) * z[j] * z[k].conj() * z[a] * z[b].conj();
                }
            }
        }
    }
    Ok(2.0 * num.re / (den.re * den.re))
}

/// Metric, inverse and Christoffel symbols as jets around a point.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub n: usize,
    pub g: JetMatrix,
    pub g_inv: JetMatrix,
    /// `gamma[i][j][k] = Γ^i_{jk} = Σ_l g^{il̄} ∂_j g_{kl̄}`.
    pub gamma: Vec<Vec<Vec<Jet>>>,
}

impl MetricField {
    pub fn from_log_kernel(log_k: &Jet) -> Result<MetricField, KahlerError> {
        let n = log_k.dim();
        let g: JetMatrix = (0..n)
            .map(|j| (0..n).map(|k| log_k.dz(j).dzbar(k)).collect())
            .collect();
        let g_inv = jlinalg::inverse(&g)?;
        let gamma = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| {
                                let mut acc = g_inv[0][i].mul_jet(&g[k][0].dz(j));
                                for l in 1..n {
                                    acc += &g_inv[l][i].mul_jet(&g[k][l].dz(j));
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(MetricField { n, g, g_inv, gamma })
    }

    /// `g(X,Y) = Re Σ g_{jk̄} x_j ȳ_k`.
    pub fn inner(&self, x: &[Jet], y: &[Jet]) -> Jet {
        let mut acc = x[0].zero_like();
        for j in 0..self.n {
            for k in 0..self.n {
                acc += &self.g[j][k].mul_jet(&x[j]).mul_jet(&y[k].conj());
            }
        }
        acc.re()
    }

    /// Levi-Civita derivative `∇^g_X Y` of real fields.
    pub fn covariant_derivative(&self, x: &[Jet], y: &[Jet]) -> Field {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut acc = fields::along(&y[i], x);
                for j in 0..n {
                    for k in 0..n {
                        acc += &self.gamma[i][j][k].mul_jet(&x[j]).mul_jet(&y[k]);
                    }
                }
                acc
            })
            .collect()
    }

    /// `R^g(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]} Z` by composition.
    pub fn curvature(&self, x: &[Jet], y: &[Jet], z: &[Jet]) -> Field {
        let a = self.covariant_derivative(x, &self.covariant_derivative(y, z));
        let b = self.covariant_derivative(y, &self.covariant_derivative(x, z));
        let c = self.covariant_derivative(&fields::bracket(x, y), z);
        fields::sub(&fields::sub(&a, &b), &c)
    }
}
