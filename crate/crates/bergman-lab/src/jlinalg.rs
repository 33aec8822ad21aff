//! Dense linear algebra over jets, for differentiating solves exactly.

use crate::cjet::{Jet, C64};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("singular jet matrix (pivot magnitude {0:e})")]
pub struct SingularJetMatrix(pub f64);

pub type JetMatrix = Vec<Vec<Jet>>;

/// Solves `A X = B` by Gauss–Jordan elimination, pivoting on jet values.
pub fn solve(a: &JetMatrix, b: &JetMatrix) -> Result<JetMatrix, SingularJetMatrix> {
    let n = a.len();
    let mut a = a.clone();
    let mut b = b.clone();
    let scale = a
        .iter()
        .flatten()
        .map(|x| x.value().norm())
        .fold(0.0, f64::max);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .value()
                    .norm()
                    .total_cmp(&a[j][col].value().norm())
            })
            .unwrap_or(col);
        let pmag = a[piv][col].value().norm();
        if !(pmag > 1e-14 * scale) {
            return Err(SingularJetMatrix(pmag));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col]
            .try_recip()
            .map_err(|_| SingularJetMatrix(pmag))?;
        for x in a[col].iter_mut() {
            *x = x.mul_jet(&inv);
        }
        for x in b[col].iter_mut() {
            *x = x.mul_jet(&inv);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col].clone();
            for k in 0..n {
                let t = factor.mul_jet(&a[col][k]);
                a[row][k] -= &t;
            }
            for k in 0..b[col].len() {
                let t = factor.mul_jet(&b[col][k]);
                b[row][k] -= &t;
            }
        }
    }
    Ok(b)
}

pub fn identity_like(proto: &Jet, n: usize) -> JetMatrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| proto.constant_like(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect()
}

pub fn inverse(a: &JetMatrix) -> Result<JetMatrix, SingularJetMatrix> {
    let id = identity_like(&a[0][0], a.len());
    solve(a, &id)
}

pub fn transpose(a: &JetMatrix) -> JetMatrix {
    let n = a.len();
    let m = a[0].len();
    (0..m).map(|j| (0..n).map(|i| a[i][j].clone()).collect()).collect()
}

pub fn conj(a: &JetMatrix) -> JetMatrix {
    a.iter().map(|row| row.iter().map(Jet::conj).collect()).collect()
}

pub fn mat_vec(a: &JetMatrix, v: &[Jet]) -> Vec<Jet> {
    a.iter().map(|row| dot(row, v)).collect()
}

/// Bilinear `Σ a_k b_k` (no conjugation).
pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    let mut acc = a[0].mul_jet(&b[0]);
    for k in 1..a.len() {
        acc += &a[k].mul_jet(&b[k]);
    }
    acc
}

/// Pointwise values of a jet matrix.
pub fn values(a: &JetMatrix) -> Vec<Vec<C64>> {
    a.iter().map(|r| r.iter().map(Jet::value).collect()).collect()
}
