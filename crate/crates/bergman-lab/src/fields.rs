//! Vector fields near a point, as jets of their `(1,0)` components.
//!
//! A real field `X = Σ x_j ∂_j + x̄_j ∂̄_j` is stored as its components
//! `x_j`. The complex structure acts as `J x = i x`. The same storage also
//! holds sections of `T_{1,0}`, whose conjugate part is absent.

use crate::cjet::{Jet, C64};

pub type Field = Vec<Jet>;

/// `X(f) = Σ x_j ∂_j f + x̄_j ∂̄_j f` for a real field `X`.
pub fn along(f: &Jet, x: &[Jet]) -> Jet {
    let mut acc = f.dz(0).mul_jet(&x[0]) + f.dzbar(0).mul_jet(&x[0].conj());
    for j in 1..x.len() {
        acc += &f.dz(j).mul_jet(&x[j]);
        acc += &f.dzbar(j).mul_jet(&x[j].conj());
    }
    acc
}

/// `Σ x_j ∂_j f`: derivative along the `(1,0)` vector with components `x`.
pub fn along_holomorphic(f: &Jet, x: &[Jet]) -> Jet {
    let mut acc = f.dz(0).mul_jet(&x[0]);
    for j in 1..x.len() {
        acc += &f.dz(j).mul_jet(&x[j]);
    }
    acc
}

/// Componentwise `X(v)`.
pub fn along_field(v: &[Jet], x: &[Jet]) -> Field {
    v.iter().map(|c| along(c, x)).collect()
}

/// `[X, Y] = X(y) − Y(x)` for real fields.
pub fn bracket(x: &[Jet], y: &[Jet]) -> Field {
    along_field(y, x)
        .iter()
        .zip(along_field(x, y))
        .map(|(a, b)| a - &b)
        .collect()
}

pub fn constant_field(proto: &Jet, v: &[C64]) -> Field {
    v.iter().map(|&c| proto.constant_like(c)).collect()
}

pub fn add(a: &[Jet], b: &[Jet]) -> Field {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[Jet], b: &[Jet]) -> Field {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[Jet], s: impl Into<C64> + Copy) -> Field {
    a.iter().map(|x| x.scale(s)).collect()
}

/// Multiplies every component by a scalar jet.
pub fn mul(a: &[Jet], f: &Jet) -> Field {
    a.iter().map(|x| x.mul_jet(f)).collect()
}

pub fn j_field(a: &[Jet]) -> Field {
    scale(a, C64::new(0.0, 1.0))
}

pub fn values(a: &[Jet]) -> Vec<C64> {
    a.iter().map(Jet::value).collect()
}

pub fn truncate(a: &[Jet], order: usize) -> Field {
    a.iter().map(|x| x.truncate(order)).collect()
}

/// Largest component magnitude at the base point.
pub fn sup(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn diff_sup(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
