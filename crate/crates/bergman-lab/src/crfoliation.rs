//! Level-set foliation of a defining function and its pseudohermitian data.
//!
//! Pairing convention for `(1,1)`-forms on real vectors with `(1,0)` parts
//! `u, v`: `dθ(U,V) = −Im Σ H_{jk} u_j v̄_k` where `H = [∂_j∂̄_kφ]`,
//! `L_θ(Z,W̄) = ½ Σ H_{jk} z_j w̄_k`, and wedges carry a factor ½. Then the
//! transverse curvature is `r = Σ H_{jk} ξ_j ξ̄_k`, `θ(V) = Im ∂φ(v)` and
//! `dφ(V) = 2 Re ∂φ(v)`. Real fields use the representation of
//! [`crate::fields`]: `N ↔ ξ`, `T ↔ iξ`, `J ↔ i`.

use serde::Serialize;
use thiserror::Error;

use crate::cjet::{seed_coordinates, Jet, C64};
use crate::fields::{self, Field};
use crate::jlinalg::{self, JetMatrix, SingularJetMatrix};

/// Factor multiplying `Σ H u v̄` in `L_θ`; the identity suite pins it to ½.
pub const LEVI_PAIRING: f64 = 0.5;

pub const GRADIENT_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrError {
    #[error("OutsideCollar: complex Hessian of φ is not positive definite")]
    OutsideCollar,
    #[error("OutsideCollar: |∂φ| = {0:e} below floor")]
    CriticalPoint(f64),
    #[error("SingularHessian: {0}")]
    SingularHessian(#[from] SingularJetMatrix),
    #[error("DegenerateLeviForm")]
    DegenerateLeviForm,
    #[error("DegeneratePlane: norm {0:e} below floor")]
    DegeneratePlane(f64),
    #[error("jet order {0} too low (need {1})")]
    InsufficientOrder(usize, usize),
}

/// Pointwise Levi frame `W_α` of `T_{1,0}(F)` with its Gram matrix and
/// dual coframe.
#[derive(Debug, Clone, Serialize)]
pub struct LeviFrame {
    pub w: Vec<Vec<C64>>,
    /// `gram[α][β] = L_θ(W_α, W̄_β)`.
    pub gram: Vec<Vec<C64>>,
    /// `θ^α(V) = Σ_j coframe[α][j] v_j`.
    pub coframe: Vec<Vec<C64>>,
}

impl LeviFrame {
    pub fn theta_alpha(&self, v: &[C64]) -> Vec<C64> {
        self.coframe
            .iter()
            .map(|c| c.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Foliation data of `φ` around a collar point, as jets.
#[derive(Debug, Clone)]
pub struct Foliation {
    pub n: usize,
    pub z: Vec<C64>,
    pub phi: Jet,
    /// `∂_j φ`.
    pub b: Field,
    /// `H[j][k] = ∂_j∂̄_k φ`.
    pub h: JetMatrix,
    /// `(Hᵀ)⁻¹ = (H̄)⁻¹`.
    pub ht_inv: JetMatrix,
    pub xi: Field,
    /// `dxi[k] = ∂_k ξ`.
    pub dxi: Vec<Field>,
    pub r: Jet,
    /// `X_r = ∇^H r`.
    pub x_r: Field,
    /// `V_k = π₁₀(e_k)`, spanning `T_{1,0}(F)`.
    vk: Vec<Field>,
    /// `dvk_bar[k][j] = ∂_j conj(V_k)`.
    dvk_bar: Vec<Vec<Field>>,
    pub levi: LeviFrame,
    /// Factor in `L_θ`; [`LEVI_PAIRING`] except in negative controls.
    pub pairing: f64,
}

impl Foliation {
    pub fn new(phi: Jet) -> Result<Foliation, CrError> {
        Foliation::with_pairing(phi, LEVI_PAIRING)
    }

    /// Same construction with a different `L_θ` factor. Only
    /// [`LEVI_PAIRING`] makes the structure identities hold.
    pub fn with_pairing(phi: Jet, pairing: f64) -> Result<Foliation, CrError> {
        if phi.order() < 4 {
            return Err(CrError::InsufficientOrder(phi.order(), 4));
        }
        let n = phi.dim();
        let z = phi.base_point().to_vec();
        let b: Field = (0..n).map(|j| phi.dz(j)).collect();
        let h: JetMatrix = (0..n)
            .map(|j| (0..n).map(|k| b[j].dzbar(k)).collect())
            .collect();
        let hv = jlinalg::values(&h);
        let herm = nalgebra::DMatrix::from_fn(n, n, |j, k| 0.5 * (hv[j][k] + hv[k][j].conj()));
        if herm.cholesky().is_none() {
            return Err(CrError::OutsideCollar);
        }
        let bnorm = fields::sup(&fields::values(&b));
        if !(bnorm > GRADIENT_FLOOR) {
            return Err(CrError::CriticalPoint(bnorm));
        }
        let ht_inv = jlinalg::inverse(&jlinalg::transpose(&h))?;
        let bbar: Field = b.iter().map(Jet::conj).collect();
        let v = jlinalg::mat_vec(&ht_inv, &bbar);
        let lambda = jlinalg::dot(&b, &v)
            .try_recip()
            .map_err(|_| CrError::OutsideCollar)?;
        let xi = fields::mul(&v, &lambda);
        let dxi: Vec<Field> = (0..n)
            .map(|k| xi.iter().map(|c| c.dz(k)).collect())
            .collect();
        let mut r = xi[0].zero_like();
        for j in 0..n {
            for k in 0..n {
                r += &h[j][k].mul_jet(&xi[j]).mul_jet(&xi[k].conj());
            }
        }
        let r = r.re();
        let grad: Field = (0..n).map(|k| r.dzbar(k).scale(2.0)).collect();
        let x_r_raw = jlinalg::mat_vec(&ht_inv, &grad);

        let mut fol = Foliation {
            n,
            z,
            phi,
            b,
            h,
            ht_inv,
            xi,
            dxi,
            r,
            x_r: Vec::new(),
            vk: Vec::new(),
            dvk_bar: Vec::new(),
            levi: LeviFrame {
                w: Vec::new(),
                gram: Vec::new(),
                coframe: Vec::new(),
            },
            pairing,
        };
        fol.x_r = fol.pi10(&x_r_raw);
        let proto = fol.phi.constant_like(0.0);
        fol.vk = (0..n)
            .map(|k| {
                let mut e = vec![C64::new(0.0, 0.0); n];
                e[k] = C64::new(1.0, 0.0);
                fol.pi10(&fields::constant_field(&proto, &e))
            })
            .collect();
        fol.dvk_bar = fol
            .vk
            .iter()
            .map(|v| {
                (0..n)
                    .map(|j| v.iter().map(|c| c.conj().dz(j)).collect())
                    .collect()
            })
            .collect();
        fol.levi = fol.levi_frame(true)?;
        Ok(fol)
    }

    pub fn proto(&self) -> Jet {
        self.phi.constant_like(0.0)
    }

    /// `∂φ(v) = Σ b_j v_j`.
    pub fn dphi10(&self, v: &[Jet]) -> Jet {
        jlinalg::dot(&self.b, v)
    }

    /// `T_{1,0}(F)` part of the `(1,0)` component: `v − ∂φ(v) ξ`.
    pub fn pi10(&self, v: &[Jet]) -> Field {
        let s = self.dphi10(v);
        v.iter()
            .zip(&self.xi)
            .map(|(vj, xj)| vj - &s.mul_jet(xj))
            .collect()
    }

    /// The morphism `Φ`: `J` on `H(F)`, zero on `T`, `N`.
    pub fn phi_h(&self, v: &[Jet]) -> Field {
        fields::j_field(&self.pi10(v))
    }

    pub fn theta(&self, v: &[Jet]) -> Jet {
        self.dphi10(v).im()
    }

    pub fn dphi(&self, v: &[Jet]) -> Jet {
        self.dphi10(v).re().scale(2.0)
    }

    fn h_form(&self, u: &[Jet], vbar: &[Jet]) -> Jet {
        let mut acc = u[0].zero_like();
        for j in 0..self.n {
            for k in 0..self.n {
                acc += &self.h[j][k].mul_jet(&u[j]).mul_jet(&vbar[k]);
            }
        }
        acc
    }

    /// `L_θ(W, Ū)` with `ubar` the components of `Ū`.
    pub fn l_theta(&self, w: &[Jet], ubar: &[Jet]) -> Jet {
        self.h_form(w, ubar).scale(self.pairing)
    }

    pub fn dtheta(&self, u: &[Jet], v: &[Jet]) -> Jet {
        let vbar: Field = v.iter().map(Jet::conj).collect();
        self.h_form(u, &vbar).im().scale(-2.0 * self.pairing)
    }

    /// Tangential metric, extended by `g_θ(N,N) = 1` and `N ⟂ T(F)`.
    pub fn g_theta(&self, u: &[Jet], v: &[Jet]) -> Jet {
        let su = self.dphi10(u);
        let sv = self.dphi10(v);
        let uh = self.pi10(u);
        let vh: Field = self.pi10(v).iter().map(Jet::conj).collect();
        let hpart = self.h_form(&uh, &vh).re().scale(2.0 * self.pairing);
        hpart + su.im().mul_jet(&sv.im()) + su.re().mul_jet(&sv.re())
    }

    pub fn n_field(&self) -> Field {
        self.xi.clone()
    }

    pub fn t_field(&self) -> Field {
        fields::j_field(&self.xi)
    }

    /// `f = φ/(1 − φ r)`.
    pub fn f(&self) -> Jet {
        let one_minus = (-self.phi.mul_jet(&self.r)).add_scalar(1.0);
        self.phi
            .mul_jet(&one_minus.try_recip().expect("1 − φr vanishes"))
    }

    pub fn n_r(&self) -> Jet {
        fields::along(&self.r, &self.xi)
    }

    pub fn t_r(&self) -> Jet {
        fields::along(&self.r, &self.t_field())
    }

    /// `g = N(r) + 4/φ² − 2r/φ`; `None` on the leaf `φ = 0`.
    pub fn g_scalar(&self) -> Option<Jet> {
        let inv = self.phi.try_recip().ok()?;
        Some(self.n_r() + inv.mul_jet(&inv).scale(4.0) - self.r.mul_jet(&inv).scale(2.0))
    }

    /// `h = N(r) + 4/φ² − 6r/φ + 4r²`; `None` on the leaf `φ = 0`.
    pub fn h_scalar(&self) -> Option<Jet> {
        let inv = self.phi.try_recip().ok()?;
        Some(
            self.n_r() + inv.mul_jet(&inv).scale(4.0) - self.r.mul_jet(&inv).scale(6.0)
                + self.r.mul_jet(&self.r).scale(4.0),
        )
    }

    /// Orthonormalized (or raw) Levi frame at the base point.
    pub fn levi_frame(&self, orthonormalize: bool) -> Result<LeviFrame, CrError> {
        let n = self.n;
        let b = fields::values(&self.b);
        let hv = jlinalg::values(&self.h);
        let lform = |u: &[C64], v: &[C64]| -> C64 {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                for k in 0..n {
                    acc += hv[j][k] * u[j] * v[k].conj();
                }
            }
            acc * self.pairing
        };
        let mut p = 0;
        for j in 1..n {
            if b[j].norm() > b[p].norm() {
                p = j;
            }
        }
        let mut frame: Vec<Vec<C64>> = Vec::new();
        for k in (0..n).filter(|&k| k != p) {
            let mut c = vec![C64::new(0.0, 0.0); n];
            c[k] = C64::new(1.0, 0.0);
            c[p] = -b[k] / b[p];
            if orthonormalize {
                for w in &frame {
                    let proj = lform(&c, w);
                    for j in 0..n {
                        c[j] -= proj * w[j];
                    }
                }
                let nn = lform(&c, &c).re;
                if !(nn > 1e-300) {
                    return Err(CrError::DegenerateLeviForm);
                }
                let s = 1.0 / nn.sqrt();
                c.iter_mut().for_each(|x| *x *= s);
            }
            frame.push(c);
        }
        let m = frame.len();
        let gram: Vec<Vec<C64>> = (0..m)
            .map(|a| (0..m).map(|bb| lform(&frame[a], &frame[bb])).collect())
            .collect();
        if m > 0 {
            let gm = nalgebra::DMatrix::from_fn(m, m, |a, bb| gram[a][bb]);
            if gm.clone().cholesky().is_none() {
                return Err(CrError::DegenerateLeviForm);
            }
            let ginv = gm.try_inverse().ok_or(CrError::DegenerateLeviForm)?;
            // θ^α(v) = Σ_β g^{αβ̄} L_θ(π₁₀ v, W̄_β); L_θ(ξ, ·) vanishes on T_{1,0}.
            let coframe = (0..m)
                .map(|a| {
                    (0..n)
                        .map(|j| {
                            let mut acc = C64::new(0.0, 0.0);
                            for bb in 0..m {
                                let mut l = C64::new(0.0, 0.0);
                                for k in 0..n {
                                    l += hv[j][k] * frame[bb][k].conj();
                                }
                                // Σ_β g^{αβ̄} with g^{αβ̄} the inverse of g_{αβ̄}:
                                // Σ_β ginv[β][α] g_{γβ̄} = δ^α_γ.
                                acc += ginv[(bb, a)] * l * self.pairing;
                            }
                            acc
                        })
                        .collect()
                })
                .collect();
            Ok(LeviFrame {
                w: frame,
                gram,
                coframe,
            })
        } else {
            Ok(LeviFrame {
                w: frame,
                gram,
                coframe: Vec::new(),
            })
        }
    }

    /// Graham–Lee derivative `∇_X W` of a section `W` of `T_{1,0}(F)`.
    pub fn gl_t10(&self, x: &[Jet], w: &[Jet]) -> Field {
        let n = self.n;
        let i = C64::new(0.0, 1.0);
        let s = self.dphi10(x);
        let e = s.im();
        let fc = s.re();
        let x10: Field = x
            .iter()
            .zip(&self.xi)
            .map(|(xj, xij)| xj - &s.mul_jet(xij))
            .collect();
        let x10bar: Field = x10.iter().map(Jet::conj).collect();
        let dw: Vec<Field> = (0..n).map(|k| w.iter().map(|c| c.dz(k)).collect()).collect();
        let dbw: Vec<Field> = (0..n).map(|k| w.iter().map(|c| c.dzbar(k)).collect()).collect();
        let xibar: Field = self.xi.iter().map(Jet::conj).collect();

        let comb = |coef_d: &[Jet], coef_db: &[Jet]| -> Field {
            (0..n)
                .map(|c| {
                    let mut acc = dw[0][c].mul_jet(&coef_d[0]) + dbw[0][c].mul_jet(&coef_db[0]);
                    for k in 1..n {
                        acc += &dw[k][c].mul_jet(&coef_d[k]);
                        acc += &dbw[k][c].mul_jet(&coef_db[k]);
                    }
                    acc
                })
                .collect()
        };
        let w_dxi: Field = (0..n)
            .map(|c| {
                let mut acc = w[0].mul_jet(&self.dxi[0][c]);
                for k in 1..n {
                    acc += &w[k].mul_jet(&self.dxi[k][c]);
                }
                acc
            })
            .collect();
        let zeros: Field = (0..n).map(|_| self.proto()).collect();

        let t01 = self.pi10(&comb(&zeros, &x10bar));
        let tw = comb(&fields::j_field(&self.xi), &fields::scale(&xibar, -i));
        let t_t = self.pi10(&fields::sub(&tw, &fields::scale(&w_dxi, i)));
        let nw = comb(&self.xi, &xibar);
        let t_n = fields::add(
            &self.pi10(&fields::sub(&nw, &w_dxi)),
            &fields::mul(w, &self.r),
        );

        let rhs: Field = (0..n)
            .map(|k| {
                let vbar: Field = self.vk[k].iter().map(Jet::conj).collect();
                let l = self.l_theta(w, &vbar);
                let term1 = crate::fields::along_holomorphic(&l, &x10);
                let mut brk: Field = (0..n).map(|_| self.proto()).collect();
                for j in 0..n {
                    for c in 0..n {
                        brk[c] += &self.dvk_bar[k][j][c].mul_jet(&x10[j]);
                    }
                }
                let bbar: Field = self.b.iter().map(Jet::conj).collect();
                let sb = jlinalg::dot(&bbar, &brk);
                let p01: Field = brk
                    .iter()
                    .zip(&xibar)
                    .map(|(a, xb)| a - &sb.mul_jet(xb))
                    .collect();
                term1 - self.l_theta(w, &p01)
            })
            .collect();
        let u = fields::scale(&jlinalg::mat_vec(&self.ht_inv, &rhs), 1.0 / self.pairing);
        let u = self.pi10(&u);
        let mut out = fields::add(&u, &t01);
        out = fields::add(&out, &fields::mul(&t_t, &e));
        fields::add(&out, &fields::mul(&t_n, &fc))
    }

    /// Graham–Lee derivative `∇_X Y` of a real field.
    pub fn gl(&self, x: &[Jet], y: &[Jet]) -> Field {
        let y10 = self.pi10(y);
        let sy = self.dphi10(y);
        let xs = fields::along(&sy, x);
        fields::add(&self.gl_t10(x, &y10), &fields::mul(&self.xi, &xs))
    }

    /// `T_∇(X,Y) = ∇_X Y − ∇_Y X − [X,Y]`.
    pub fn gl_torsion(&self, x: &[Jet], y: &[Jet]) -> Field {
        let a = self.gl(x, y);
        let b = self.gl(y, x);
        fields::sub(&fields::sub(&a, &b), &fields::bracket(x, y))
    }

    /// `R(X,Y)Z` of the Graham–Lee connection by composition.
    pub fn gl_curvature(&self, x: &[Jet], y: &[Jet], z: &[Jet]) -> Field {
        let a = self.gl(x, &self.gl(y, z));
        let b = self.gl(y, &self.gl(x, z));
        let c = self.gl(&fields::bracket(x, y), z);
        fields::sub(&fields::sub(&a, &b), &c)
    }

    /// `τ(X) = −½ Φ (L_T Φ) X` with `(L_T Φ)X = [T, ΦX] − Φ[T, X]`.
    pub fn tau(&self, x: &[Jet]) -> Field {
        let t = self.t_field();
        let lie = fields::sub(
            &fields::bracket(&t, &self.phi_h(x)),
            &self.phi_h(&fields::bracket(&t, x)),
        );
        fields::scale(&self.phi_h(&lie), -0.5)
    }

    /// Horizontal field through `π₁₀(c)` for a constant vector `c`.
    pub fn horizontal(&self, c: &[C64]) -> Field {
        self.pi10(&fields::constant_field(&self.proto(), c))
    }

    /// Real and `J` parts of the Levi frame, as horizontal fields.
    pub fn horizontal_basis(&self) -> Vec<Field> {
        let i = C64::new(0.0, 1.0);
        let mut out = Vec::new();
        for w in &self.levi.w {
            out.push(self.horizontal(w));
            let jw: Vec<C64> = w.iter().map(|v| v * i).collect();
            out.push(self.horizontal(&jw));
        }
        out
    }

    /// `k_θ(σ)` for the plane `{X, ΦX}`.
    pub fn k_theta(&self, x: &[Jet]) -> Result<f64, CrError> {
        let px = self.phi_h(x);
        let rr = self.gl_curvature(x, &px, &px);
        let num = self.g_theta(&rr, x).value().re;
        let nx = self.g_theta(x, x).value().re;
        if !(nx > 1e-300) {
            return Err(CrError::DegeneratePlane(nx));
        }
        Ok(0.25 * num / (nx * nx))
    }
}

/// `φ = |z|² − 1`, whose leaves are spheres.
pub fn sphere_phi(z: &[C64]) -> Jet {
    let n = z.len();
    let c = seed_coordinates(z);
    let mut s = c[0].mul_jet(&c[n]);
    for j in 1..n {
        s += &c[j].mul_jet(&c[n + j]);
    }
    s.add_scalar(-1.0)
}
