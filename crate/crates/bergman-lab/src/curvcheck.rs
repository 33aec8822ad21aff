//! Identity suite tying the Bergman metric to the Graham–Lee connection of
//! the foliation by level sets of `φ = −K^{−1/(n+1)}`, plus the curvature
//! samples used by the boundary scans.
//!
//! Every identity is evaluated with both sides computed independently: the
//! Levi-Civita side from Christoffel jets of `log K`, the foliation side from
//! jets of `φ`. Residuals are max-norms over a frame basis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cjet::{Jet, C64};
use crate::crfoliation::{CrError, Foliation, LEVI_PAIRING};
use crate::domains::{self, DomainError};
use crate::fields::{self, Field};
use crate::kahler::{self, KahlerError, MetricField};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("NotBergmanPhi: identity {0} needs φ = −K^(−1/(n+1))")]
    NotBergmanPhi(IdentityId),
    #[error(transparent)]
    Cr(#[from] CrError),
    #[error(transparent)]
    Kahler(#[from] KahlerError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("DegeneratePlane: norm {0:e}")]
    DegeneratePlane(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IdentityId {
    B4,
    B5,
    B6,
    B7,
    B13,
    B17,
    B21,
    B25,
    B29,
    B30,
    B31,
    B32,
    B33,
    A2,
    A4,
    A5,
    A6,
    A7,
    A8,
    A9,
    A10,
    A11,
    E425,
    E426,
    E433,
    E434,
    Sigma0Ratio,
    OmegaDtheta,
    XfChain,
    NfChain,
    Lemma,
    GlAxioms,
}

impl IdentityId {
    pub const ALL: [IdentityId; 32] = [
        IdentityId::B4,
        IdentityId::B5,
        IdentityId::B6,
        IdentityId::B7,
        IdentityId::B13,
        IdentityId::B17,
        IdentityId::B21,
        IdentityId::B25,
        IdentityId::B29,
        IdentityId::B30,
        IdentityId::B31,
        IdentityId::B32,
        IdentityId::B33,
        IdentityId::A2,
        IdentityId::A4,
        IdentityId::A5,
        IdentityId::A6,
        IdentityId::A7,
        IdentityId::A8,
        IdentityId::A9,
        IdentityId::A10,
        IdentityId::A11,
        IdentityId::E425,
        IdentityId::E426,
        IdentityId::E433,
        IdentityId::E434,
        IdentityId::Sigma0Ratio,
        IdentityId::OmegaDtheta,
        IdentityId::XfChain,
        IdentityId::NfChain,
        IdentityId::Lemma,
        IdentityId::GlAxioms,
    ];

    pub fn name(self) -> &'static str {
        use IdentityId::*;
        match self {
            B4 => "b4",
            B5 => "b5",
            B6 => "b6",
            B7 => "b7",
            B13 => "b13",
            B17 => "b17",
            B21 => "b21",
            B25 => "b25",
            B29 => "b29",
            B30 => "b30",
            B31 => "b31",
            B32 => "b32",
            B33 => "b33",
            A2 => "A2",
            A4 => "A4",
            A5 => "A5",
            A6 => "A6",
            A7 => "A7",
            A8 => "A8",
            A9 => "A9",
            A10 => "A10",
            A11 => "A11",
            E425 => "e425",
            E426 => "e426",
            E433 => "e433",
            E434 => "e434",
            Sigma0Ratio => "sigma0_ratio",
            OmegaDtheta => "omega_dtheta",
            XfChain => "xf_chain",
            NfChain => "nf_chain",
            Lemma => "phi_lemma",
            GlAxioms => "gl_axioms",
        }
    }

    /// Identities that involve the Bergman metric.
    pub fn requires_bergman(self) -> bool {
        use IdentityId::*;
        matches!(
            self,
            B4 | B5 | B6 | B7 | B13 | B17 | B21 | B25 | B29 | B30 | B31 | B32 | B33 | E425 | E426 | E433 | E434 | Sigma0Ratio
        )
    }
}

impl fmt::Display for IdentityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IdentityId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        IdentityId::ALL
            .iter()
            .copied()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown identity id {s:?}"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityResidual {
    pub identity_id: IdentityId,
    pub point: Vec<C64>,
    pub residual: f64,
    pub scale: f64,
}

impl IdentityResidual {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale.max(1.0)
    }
}

type V = Vec<C64>;

/// Running max of `|lhs − rhs|` and of `max(|lhs|, |rhs|)`.
#[derive(Default)]
struct Acc {
    res: f64,
    scale: f64,
}

impl Acc {
    fn vec(&mut self, l: &[C64], r: &[C64]) {
        self.res = self.res.max(fields::diff_sup(l, r));
        self.scale = self.scale.max(fields::sup(l)).max(fields::sup(r));
    }

    fn num(&mut self, l: C64, r: C64) {
        self.res = self.res.max((l - r).norm());
        self.scale = self.scale.max(l.norm()).max(r.norm());
    }

    fn real(&mut self, l: f64, r: f64) {
        self.num(C64::new(l, 0.0), C64::new(r, 0.0));
    }

    fn zero(&mut self, l: &[C64]) {
        self.res = self.res.max(fields::sup(l));
    }
}

fn lin(terms: &[(C64, &[C64])]) -> V {
    let n = terms[0].1.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (c, v) in terms {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += c * x;
        }
    }
    out
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

const I: C64 = C64::new(0.0, 1.0);

/// A complexified tangent vector `(a, a')` meaning `Σ a_j ∂_j + a'_j ∂̄_j`.
type CV = (V, V);

fn cv_real(a: &[C64]) -> CV {
    (a.to_vec(), a.iter().map(|x| x.conj()).collect())
}

fn cv_lin(terms: &[(C64, &CV)]) -> CV {
    let n = terms[0].1 .0.len();
    let mut out = (vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]);
    for (c, v) in terms {
        for j in 0..n {
            out.0[j] += c * v.0[j];
            out.1[j] += c * v.1[j];
        }
    }
    out
}

fn cv_flat(v: &CV) -> V {
    v.0.iter().chain(v.1.iter()).copied().collect()
}

/// Foliation data plus, for Bergman-derived `φ`, the Bergman metric.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub fol: Foliation,
    pub metric: Option<MetricField>,
    /// Series tail of the kernel jet behind this geometry, 0 for closed forms.
    pub tail_estimate: f64,
}

impl Geometry {
    /// Geometry of `φ = −K^{−1/(n+1)}` from an order-4 kernel jet.
    pub fn bergman(k: &Jet) -> Result<Geometry, CheckError> {
        Geometry::bergman_with_pairing(k, LEVI_PAIRING)
    }

    /// Negative-control hook: a Bergman geometry with a wrong `L_θ` factor.
    pub fn bergman_with_pairing(k: &Jet, pairing: f64) -> Result<Geometry, CheckError> {
        let phi = domains::defining_function(k)?;
        let log_k = domains::log_kernel(k)?;
        let metric = MetricField::from_log_kernel(&log_k)?;
        kahler::bergman_metric(&log_k)?;
        Ok(Geometry {
            fol: Foliation::with_pairing(phi, pairing)?,
            metric: Some(metric),
            tail_estimate: 0.0,
        })
    }

    pub fn from_model(model: &domains::KernelModel, z: &[C64]) -> Result<Geometry, CheckError> {
        let kj = model.kernel_jet(z)?;
        let mut g = Geometry::bergman(&kj.k)?;
        g.tail_estimate = kj.tail_estimate;
        Ok(g)
    }

    /// Pseudohermitian data of an arbitrary defining function.
    pub fn pseudohermitian(phi: Jet) -> Result<Geometry, CheckError> {
        Ok(Geometry {
            fol: Foliation::new(phi)?,
            metric: None,
            tail_estimate: 0.0,
        })
    }

    pub fn point(&self) -> &[C64] {
        &self.fol.z
    }

    fn metric(&self, id: IdentityId) -> Result<&MetricField, CheckError> {
        self.metric.as_ref().ok_or(CheckError::NotBergmanPhi(id))
    }

    pub fn check(&self, id: IdentityId) -> Result<IdentityResidual, CheckError> {
        let s = Scalars::new(&self.fol);
        let mut acc = Acc::default();
        use IdentityId::*;
        match id {
            B4 => self.b4(&mut acc, id)?,
            B5 | B6 | B7 => self.b5_7(&mut acc, id, &s)?,
            B13 => self.b13(&mut acc, id, &s)?,
            B17 | B21 | B25 | B29 => self.b17_29(&mut acc, id, &s)?,
            B30 | B31 | B32 | B33 => self.b30_33(&mut acc, id, &s)?,
            A2 => self.a2(&mut acc),
            A4 => self.a4(&mut acc),
            A5 => self.a5(&mut acc, &s),
            A6 | A7 | A8 | A9 => self.torsion_purity(&mut acc, id, &s),
            A10 | A11 => self.a10_11(&mut acc, id),
            E425 => self.e425(&mut acc, id, &s)?,
            E426 => self.e426(&mut acc, id, &s)?,
            E433 | E434 => self.e433_434(&mut acc, id, &s)?,
            Sigma0Ratio => self.sigma0(&mut acc, id, &s)?,
            OmegaDtheta => self.omega(&mut acc),
            XfChain | NfChain => self.chains(&mut acc, id, &s),
            Lemma => self.lemma(&mut acc),
            GlAxioms => self.gl_axioms(&mut acc),
        }
        Ok(IdentityResidual {
            identity_id: id,
            point: self.fol.z.clone(),
            residual: acc.res,
            scale: acc.scale,
        })
    }

    /// Constant fields `e_k`, `i e_k` spanning the real tangent space.
    fn ambient_basis(&self) -> Vec<Field> {
        let n = self.fol.n;
        let proto = self.fol.proto();
        let mut out = Vec::with_capacity(2 * n);
        for k in 0..n {
            for c in [re(1.0), I] {
                let mut e = vec![re(0.0); n];
                e[k] = c;
                out.push(fields::constant_field(&proto, &e));
            }
        }
        out
    }

    fn b4(&self, acc: &mut Acc, id: IdentityId) -> Result<(), CheckError> {
        let m = self.metric(id)?;
        let fol = &self.fol;
        let n1 = fol.n as f64 + 1.0;
        let phi = fol.phi.value().re;
        let basis = self.ambient_basis();
        for u in &basis {
            for v in &basis {
                let lhs = m.inner(u, v).value().re;
                let jv = fields::j_field(v);
                let su = fol.dphi10(u).value();
                let sjv = fol.dphi10(&jv).value();
                // (∂φ ∧ ∂̄φ)(U, JV) with the ½ wedge.
                let wedge = 0.5 * (su * sjv.conj() - sjv * su.conj());
                let rhs = n1 / phi * ((I / phi * wedge).re - fol.dtheta(u, &jv).value().re);
                acc.real(lhs, rhs);
            }
        }
        Ok(())
    }

    fn b5_7(&self, acc: &mut Acc, id: IdentityId, s: &Scalars) -> Result<(), CheckError> {
        let m = self.metric(id)?;
        let fol = &self.fol;
        let n1 = fol.n as f64 + 1.0;
        let hb = fol.horizontal_basis();
        let (t, nf) = (fol.t_field(), fol.n_field());
        let g = |a: &[Jet], b: &[Jet]| m.inner(a, b).value().re;
        match id {
            IdentityId::B5 => {
                for x in &hb {
                    for y in &hb {
                        acc.real(g(x, y), -n1 / s.phi * fol.g_theta(x, y).value().re);
                    }
                }
            }
            IdentityId::B6 => {
                for x in &hb {
                    acc.real(g(x, &t), 0.0);
                    acc.real(g(x, &nf), 0.0);
                }
            }
            _ => {
                let want = n1 / s.phi * (1.0 / s.phi - s.r);
                acc.real(g(&t, &nf), 0.0);
                acc.real(g(&t, &t), want);
                acc.real(g(&nf, &nf), want);
            }
        }
        Ok(())
    }

    fn b13(&self, acc: &mut Acc, id: IdentityId, s: &Scalars) -> Result<(), CheckError> {
        let m = self.metric(id)?;
        let fol = &self.fol;
        let hb = fol.horizontal_basis();
        let gt = |a: &[Jet], b: &[Jet]| fol.g_theta(a, b).value().re;
        for x in &hb {
            for y in &hb {
                let lhs = fields::values(&m.covariant_derivative(x, y));
                let gl = fields::values(&fol.gl(x, y));
                let ct = s.f * gt(&fol.tau(x), y) + gt(x, &fol.phi_h(y));
                let cn = gt(x, y) + s.f * gt(x, &fol.phi_h(&fol.tau(y)));
                let rhs = lin(&[(re(1.0), &gl), (re(ct), &s.t), (re(-cn), &s.n)]);
                acc.vec(&lhs, &rhs);
            }
        }
        Ok(())
    }

    fn b17_29(&self, acc: &mut Acc, id: IdentityId, s: &Scalars) -> Result<(), CheckError> {
        let m = self.metric(id)?;
        let fol = &self.fol;
        let hb = fol.horizontal_basis();
        let (t, nf) = (fol.t_field(), fol.n_field());
        let k = 1.0 / s.phi - s.r;
        let hf = 0.5 * s.f;
        for x in &hb {
            let px = fol.phi_h(x);
            let xr = fields::along(&fol.r, x).value().re;
            let pxr = fields::along(&fol.r, &px).value().re;
            let xv = fields::values(x);
            let pxv = fields::values(&px);
            let (lhs, rhs) = match id {
                IdentityId::B17 => {
                    let tx = fields::values(&fol.tau(x));
                    (
                        m.covariant_derivative(x, &t),
                        lin(&[
                            (re(1.0), &tx),
                            (re(-k), &pxv),
                            (re(-hf * xr), &s.t),
                            (re(-hf * pxr), &s.n),
                        ]),
                    )
                }
                IdentityId::B21 => {
                    let tpx = fields::values(&fol.tau(&px));
                    (
                        m.covariant_derivative(x, &nf),
                        lin(&[
                            (re(-k), &xv),
                            (re(1.0), &tpx),
                            (re(hf * pxr), &s.t),
                            (re(-hf * xr), &s.n),
                        ]),
                    )
                }
                IdentityId::B25 => {
                    let gl = fields::values(&fol.gl(&t, x));
                    (
                        m.covariant_derivative(&t, x),
                        lin(&[
                            (re(1.0), &gl),
                            (re(-k), &pxv),
                            (re(-hf * xr), &s.t),
                            (re(-hf * pxr), &s.n),
                        ]),
                    )
                }
                _ => {
                    let gl = fields::values(&fol.gl(&nf, x));
                    (
                        m.covariant_derivative(&nf, x),
                        lin(&[
                            (re(1.0), &gl),
                            (re(-1.0 / s.phi), &xv),
                            (re(hf * pxr), &s.t),
                            (re(-hf * xr), &s.n),
                        ]),
                    )
                }
            };
            acc.vec(&fields::values(&lhs), &rhs);
        }
        Ok(())
    }

    fn b30_33(&self, acc: &mut Acc, id: IdentityId, s: &Scalars) -> Result<(), CheckError> {
        let m = self.metric(id)?;
        let fol = &self.fol;
        let (t, nf) = (fol.t_field(), fol.n_field());
        let hf = 0.5 * s.f;
        let (lhs, rhs) = match id {
            IdentityId::B30 => (
                m.covariant_derivative(&nf, &t),
                lin(&[(re(-0.5), &s.phi_xr), (re(-hf * s.g), &s.t), (re(-hf * s.tr), &s.n)]),
            ),
            IdentityId::B31 => (
                m.covariant_derivative(&t, &nf),
                lin(&[(re(0.5), &s.phi_xr), (re(-hf * s.h), &s.t), (re(-hf * s.tr), &s.n)]),
            ),
            IdentityId::B32 => (
                m.covariant_derivative(&t, &t),
                lin(&[(re(-0.5), &s.xr), (re(-hf * s.tr), &s.t), (re(hf * s.h), &s.n)]),
            ),
            _ => (
                m.covariant_derivative(&nf, &nf),
                lin(&[(re(-0.5), &s.xr), (re(hf * s.tr), &s.t), (re(-hf * s.g), &s.n)]),
            ),
        };
        acc.vec(&fields::values(&lhs), &rhs);
        Ok(())
    }

    fn a2(&self, acc: &mut Acc) {
        let fol = &self.fol;
        let lf = &fol.levi;
        let m = lf.w.len();
        let basis = self.ambient_basis();
        let r = fol.r.value().re;
        for u in &basis {
            for v in &basis {
                let (uv, vv) = (fields::values(u), fields::values(v));
                let lhs = fol.dtheta(u, v).value().re;
                let (tu, tv) = (lf.theta_alpha(&uv), lf.theta_alpha(&vv));
                let mut levi = C64::new(0.0, 0.0);
                for a in 0..m {
                    for b in 0..m {
                        levi += lf.gram[a][b] * 0.5 * (tu[a] * tv[b].conj() - tv[a] * tu[b].conj());
                    }
                }
                let rhs = 2.0 * I * levi
                    + re(r * 0.5
                        * (fol.dphi(u).value().re * fol.theta(v).value().re
                            - fol.dphi(v).value().re * fol.theta(u).value().re));
                acc.num(re(lhs), rhs);
            }
        }
    }

    fn a4(&self, acc: &mut Acc) {
        let fol = &self.fol;
        let (t, nf) = (fol.t_field(), fol.n_field());
        let r = fol.r.value().re;
        for u in &self.ambient_basis() {
            acc.real(fol.dtheta(&t, u).value().re, -0.5 * r * fol.dphi(u).value().re);
            acc.real(fol.dtheta(&nf, u).value().re, r * fol.theta(u).value().re);
        }
    }

    fn a5(&self, acc: &mut Acc, s: &Scalars) {
        let fol = &self.fol;
        let lf = &fol.levi;
        let m = lf.w.len();
        let lhs = fields::values(&fields::bracket(&fol.t_field(), &fol.n_field()));
        let dbr: V = (0..fol.n).map(|k| fol.r.dzbar(k).value()).collect();
        // W^α(r) = g^{αβ̄} W_β̄(r).
        let wbar_r: V = lf
            .w
            .iter()
            .map(|w| w.iter().zip(&dbr).map(|(a, b)| a.conj() * b).sum())
            .collect();
        let mut x = vec![C64::new(0.0, 0.0); fol.n];
        if m > 0 {
            let gm = nalgebra::DMatrix::from_fn(m, m, |a, b| lf.gram[a][b]);
            let ginv = gm.try_inverse().expect("Levi Gram matrix checked at construction");
            for a in 0..m {
                let mut up = C64::new(0.0, 0.0);
                for b in 0..m {
                    up += ginv[(b, a)] * wbar_r[b];
                }
                for j in 0..fol.n {
                    x[j] += up * lf.w[a][j];
                }
            }
        }
        let rhs = lin(&[(I, &x), (re(2.0 * s.r), &s.t)]);
        acc.vec(&lhs, &rhs);
        // The same field is X_r.
        acc.vec(&x, &s.xr);
    }

    fn torsion_purity(&self, acc: &mut Acc, id: IdentityId, s: &Scalars) {
        let fol = &self.fol;
        let (t, nf) = (fol.t_field(), fol.n_field());
        let hb: Vec<Field> = fol.levi.w.iter().map(|w| fol.horizontal(w)).collect();
        let tor = |a: &[Jet], b: &[Jet]| cv_real(&fields::values(&fol.gl_torsion(a, b)));
        let tcv = cv_real(&s.t);
        if id == IdentityId::A9 {
            let lhs = fields::values(&fol.gl_torsion(&t, &nf));
            let rhs = lin(&[(-I, &s.xr), (re(-2.0 * s.r), &s.t)]);
            acc.vec(&lhs, &rhs);
            return;
        }
        let hv = crate::jlinalg::values(&fol.h);
        for x in &hb {
            let jx = fields::j_field(x);
            for y in &hb {
                let jy = fields::j_field(y);
                match id {
                    IdentityId::A6 => {
                        let (txy, tjxy, txjy, tjxjy) = (tor(x, y), tor(&jx, y), tor(x, &jy), tor(&jx, &jy));
                        let zw = cv_lin(&[(re(0.25), &txy), (-0.25 * I, &tjxy), (-0.25 * I, &txjy), (re(-0.25), &tjxjy)]);
                        acc.zero(&cv_flat(&zw));
                        let zwb = cv_lin(&[(re(0.25), &txy), (0.25 * I, &txjy), (-0.25 * I, &tjxy), (re(0.25), &tjxjy)]);
                        let (xv, yv) = (fields::values(x), fields::values(y));
                        let mut l = C64::new(0.0, 0.0);
                        for j in 0..fol.n {
                            for k in 0..fol.n {
                                l += hv[j][k] * xv[j] * yv[k].conj();
                            }
                        }
                        let l = l * fol.pairing;
                        let rhs = cv_lin(&[(2.0 * I * l, &tcv)]);
                        acc.vec(&cv_flat(&zwb), &cv_flat(&rhs));
                    }
                    IdentityId::A7 => {
                        let lhs = cv_lin(&[(re(0.5), &tor(&nf, y)), (-0.5 * I, &tor(&nf, &jy))]);
                        let tau_w = cv_lin(&[(re(0.5), &tor(&t, y)), (-0.5 * I, &tor(&t, &jy))]);
                        let w: CV = (fields::values(y), vec![re(0.0); fol.n]);
                        let rhs = cv_lin(&[(re(s.r), &w), (I, &tau_w)]);
                        acc.vec(&cv_flat(&lhs), &cv_flat(&rhs));
                    }
                    _ => {
                        let tau_w = cv_lin(&[(re(0.5), &tor(&t, y)), (-0.5 * I, &tor(&t, &jy))]);
                        acc.zero(&tau_w.0);
                        acc.scale = acc.scale.max(fields::sup(&tau_w.1));
                    }
                }
            }
        }
    }

    fn a10_11(&self, acc: &mut Acc, id: IdentityId) {
        let fol = &self.fol;
        let t = fol.t_field();
        for x in &fol.horizontal_basis() {
            let tx = fol.tau(x);
            if id == IdentityId::A10 {
                let l = fields::values(&fol.phi_h(&tx));
                let r = fields::values(&fol.tau(&fol.phi_h(x)));
                acc.vec(&l, &lin(&[(re(-1.0), &r)]));
            } else {
                acc.vec(&fields::values(&tx), &fields::values(&fol.gl_torsion(&t, x)));
            }
        }
    }

    fn omega(&self, acc: &mut Acc) {
        let fol = &self.fol;
        let hb = fol.horizontal_basis();
        for x in &hb {
            for y in &hb {
                let om = fol.g_theta(x, &fol.phi_h(y)).value().re;
                acc.real(om, -fol.dtheta(x, y).value().re);
            }
        }
    }

    fn chains(&self, acc: &mut Acc, id: IdentityId, s: &Scalars) {
        let fol = &self.fol;
        let f = fol.f();
        if id == IdentityId::NfChain {
            let nf = fol.n_field();
            let lhs = fields::along(&f, &nf).value().re;
            acc.real(lhs, s.f * s.f * (2.0 / (s.phi * s.phi) + s.nr));
            return;
        }
        let mut dirs = fol.horizontal_basis();
        dirs.push(fol.t_field());
        for x in &dirs {
            let lhs = fields::along(&f, x).value().re;
            acc.real(lhs, s.f * s.f * fields::along(&fol.r, x).value().re);
        }
    }

    fn lemma(&self, acc: &mut Acc) {
        let fol = &self.fol;
        let t = fol.t_field();
        let mut dirs = fol.horizontal_basis();
        dirs.push(t.clone());
        for x in &dirs {
            let xv = fields::values(x);
            let th = fol.theta(x).value().re;
            let pp = fields::values(&fol.phi_h(&fol.phi_h(x)));
            let tv = fields::values(&t);
            acc.vec(&pp, &lin(&[(re(-1.0), &xv), (re(th), &tv)]));
            acc.real(fol.g_theta(x, &t).value().re, th);
            for y in &dirs {
                let l = fol.g_theta(&fol.phi_h(x), &fol.phi_h(y)).value().re;
                let r = fol.g_theta(x, y).value().re - th * fol.theta(y).value().re;
                acc.real(l, r);
            }
        }
    }

    fn gl_axioms(&self, acc: &mut Acc) {
        let fol = &self.fol;
        let (t, nf) = (fol.t_field(), fol.n_field());
        let mut dirs = fol.horizontal_basis();
        dirs.push(t.clone());
        for x in dirs.iter().chain(std::iter::once(&nf)) {
            acc.zero(&fields::values(&fol.gl(x, &t)));
            acc.zero(&fields::values(&fol.gl(x, &nf)));
            for y in &dirs {
                let gxy = fol.gl(x, y);
                for z in &dirs {
                    let l = fields::along(&fol.g_theta(y, z), x).value().re;
                    let r = fol.g_theta(&gxy, z).value().re + fol.g_theta(y, &fol.gl(x, z)).value().re;
                    acc.real(l, r);
                }
            }
        }
    }

    fn e425(&self, acc: &mut Acc, id: IdentityId, s: &Scalars) -> Result<(), CheckError> {
        let m = self.metric(id)?;
        let fol = &self.fol;
        let hb = fol.horizontal_basis();
        let f = s.f;
        let gt = |a: &[Jet], b: &[Jet]| fol.g_theta(a, b).value().re;
        let a_form = |a: &[Jet], b: &[Jet]| fol.g_theta(&fol.tau(a), b);
        let omega = |a: &[Jet], b: &[Jet]| gt(a, &fol.phi_h(b));
        let dr = |a: &[Jet]| fields::along(&fol.r, a).value().re;
        for x in &hb {
            for y in &hb {
                let xy = fields::bracket(x, y);
                let th_xy = fol.theta(&xy).value().re;
                let (px, py) = (fol.phi_h(x), fol.phi_h(y));
                let (xv, yv) = (fields::values(x), fields::values(y));
                let (pxv, pyv) = (fields::values(&px), fields::values(&py));
                let tx = fields::values(&fol.tau(x));
                let ty = fields::values(&fol.tau(y));
                let tpx = fields::values(&fol.tau(&px));
                let tpy = fields::values(&fol.tau(&py));
                let gxy = fol.gl(x, y);
                let gyx = fol.gl(y, x);
                for z in &hb {
                    let lhs = fields::values(&m.curvature(x, y, z));
                    let rr = fields::values(&fol.gl_curvature(x, y, z));
                    let pz = fields::values(&fol.phi_h(z));
                    let tz = fol.tau(z);
                    let ayz = a_form(y, z).value().re;
                    let axz = a_form(x, z).value().re;
                    let (oyz, oxz) = (omega(y, z), omega(x, z));
                    let (oytz, oxtz) = (omega(y, &tz), omega(x, &tz));
                    let (gyz, gxz) = (gt(y, z), gt(x, z));
                    let gxz_ = fol.gl(x, z);
                    let gyz_ = fol.gl(y, z);
                    // (∇_X A)(Y,Z) = X(A(Y,Z)) − A(∇_X Y, Z) − A(Y, ∇_X Z).
                    let nabla_a = |xx: &[Jet], yy: &[Jet], zz: &[Jet], gxyy: &[Jet], gxzz: &[Jet]| {
                        fields::along(&a_form(yy, zz), xx).value().re
                            - a_form(gxyy, zz).value().re
                            - a_form(yy, gxzz).value().re
                    };
                    let dxa = nabla_a(x, y, z, &gxy, &gxz_);
                    let dya = nabla_a(y, x, z, &gyx, &gyz_);
                    // (∇_X τ)Z = ∇_X(τZ) − τ(∇_X Z).
                    let dtau = |xx: &[Jet], gxzz: &[Jet]| fields::sub(&fol.gl(xx, &tz), &fol.tau(gxzz));
                    let o_y_dxt = omega(y, &dtau(x, &gxz_));
                    let o_x_dyt = omega(x, &dtau(y, &gyz_));
                    let (xr, yr, zr) = (dr(x), dr(y), dr(z));
                    let (pxr, pyr) = (dr(&px), dr(&py));
                    let pzr = dr(&fol.phi_h(z));
                    let ct = f * (dxa - dya)
                        + 0.5 * f
                            * (xr * (f * ayz - oyz) - yr * (f * axz - oxz) - pxr * (gyz + f * oytz)
                                + pyr * (gxz + f * oxtz)
                                + zr * th_xy);
                    let cn = f * (o_y_dxt - o_x_dyt)
                        - 0.5 * f
                            * (xr * (gyz - f * oytz) - yr * (gxz - f * oxtz) - pxr * (f * ayz + oyz)
                                + pyr * (f * axz + oxz)
                                + pzr * th_xy);
                    let c1 = f * ayz + oyz;
                    let c2 = f * axz + oxz;
                    let c3 = gyz + f * oytz;
                    let c4 = gxz + f * oxtz;
                    let rhs = lin(&[
                        (re(1.0), &rr),
                        (re(th_xy / f), &pz),
                        (re(c1), &tx),
                        (re(-c1 / f), &pxv),
                        (re(-c2), &ty),
                        (re(c2 / f), &pyv),
                        (re(c3 / f), &xv),
                        (re(-c3), &tpx),
                        (re(-c4 / f), &yv),
                        (re(c4), &tpy),
                        (re(ct), &s.t),
                        (re(-cn), &s.n),
                    ]);
                    acc.vec(&lhs, &rhs);
                }
            }
        }
        Ok(())
    }

    fn e426(&self, acc: &mut Acc, id: IdentityId, s: &Scalars) -> Result<(), CheckError> {
        let m = self.metric(id)?;
        let fol = &self.fol;
        let n1 = fol.n as f64 + 1.0;
        let hb = fol.horizontal_basis();
        // Basis directions plus sums, so the plane is not always a frame plane.
        let mut dirs = hb.clone();
        for a in 0..hb.len() {
            for b in (a + 1)..hb.len() {
                dirs.push(fields::add(&hb[a], &fields::scale(&hb[b], 0.7)));
            }
        }
        for x in &dirs {
            let px = fol.phi_h(x);
            let lhs = m.inner(&m.curvature(x, &px, &px), x).value().re;
            let rx = fol.gl_curvature(x, &px, &px);
            let gxx = fol.g_theta(x, x).value().re;
            let tx = fol.tau(x);
            let axx = fol.g_theta(&tx, x).value().re;
            let axpx = fol.g_theta(&tx, &px).value().re;
            let rhs = -n1 / s.phi
                * (fol.g_theta(&rx, x).value().re + 4.0 / s.f * gxx * gxx
                    - 2.0 * s.f * (axx * axx + axpx * axpx));
            acc.real(lhs, rhs);
        }
        Ok(())
    }

    fn e433_434(&self, acc: &mut Acc, id: IdentityId, s: &Scalars) -> Result<(), CheckError> {
        let m = self.metric(id)?;
        let fol = &self.fol;
        let (t, nf) = (fol.t_field(), fol.n_field());
        let f = s.f;
        let phi_xr = fol.phi_h(&fol.x_r);
        let tau_pxr = fields::values(&fol.tau(&phi_xr));
        if id == IdentityId::E433 {
            let lhs = fields::values(&m.covariant_derivative(&fields::bracket(&nf, &t), &t));
            let rhs = lin(&[
                (re(s.r - 1.0 / f), &s.xr),
                (re(-1.0), &tau_pxr),
                (re(f * s.r * s.tr), &s.t),
                (re(-0.5 * f * (s.xr_norm2 + 2.0 * s.r * s.h)), &s.n),
            ]);
            acc.vec(&lhs, &rhs);
            return Ok(());
        }
        let lhs = fields::scale(&m.curvature(&nf, &t, &t), -2.0);
        let nxr = fields::values(&fol.gl(&nf, &fol.x_r));
        let tpxr = fields::values(&fol.gl(&t, &phi_xr));
        let p2 = 2.0 / (s.phi * s.phi) + s.nr;
        let ct = f * (f * p2 * s.tr + s.ntr - s.tg + (2.0 * s.r - f * s.g) * s.tr);
        let cn = f * (2.0 * s.xr_norm2 + f * s.h * p2 + s.nh + f * s.tr * s.tr + s.ttr + 2.0 * s.r * s.h);
        let rhs = lin(&[
            (re(1.0), &nxr),
            (re(-1.0), &tpxr),
            (re(-f * s.tr), &s.phi_xr),
            (re(-2.0), &tau_pxr),
            (re(2.0 * s.r + 0.5 * f * (s.g + s.h) - 1.0 / s.phi - 3.0 / f), &s.xr),
            (re(ct), &s.t),
            (re(-cn), &s.n),
        ]);
        acc.vec(&fields::values(&lhs), &rhs);
        Ok(())
    }

    fn sigma0(&self, acc: &mut Acc, id: IdentityId, s: &Scalars) -> Result<(), CheckError> {
        let m = self.metric(id)?;
        let fol = &self.fol;
        let n1 = fol.n as f64 + 1.0;
        let (t, nf) = (fol.t_field(), fol.n_field());
        let den = sigma0_denominator(m, &t, &nf);
        let num = 2.0 * m.inner(&m.curvature(&nf, &t, &t), &nf).value().re;
        let rhs = s.f * s.f * s.phi / n1
            * (2.0 * s.xr_norm2 + s.ttr + s.f * s.tr * s.tr + 2.0 * s.h * s.r + s.nh + s.f * s.h * s.nr
                + 2.0 * s.f * s.h / (s.phi * s.phi));
        acc.real(num / den, rhs);
        acc.real(den, (n1 / s.phi / s.f).powi(2));
        Ok(())
    }

    pub fn check_all(&self, ids: &[IdentityId]) -> Vec<Result<IdentityResidual, CheckError>> {
        ids.iter().map(|&id| self.check(id)).collect()
    }

    /// Curvature sample for the horizontal plane through `π₁₀(c)`.
    pub fn sample(&self, c: &[C64]) -> Result<CurvatureSample, CheckError> {
        let fol = &self.fol;
        let m = self.metric(IdentityId::Sigma0Ratio)?;
        let s = Scalars::new(fol);
        let n1 = fol.n as f64 + 1.0;
        let x = fol.horizontal(c);
        let xv = fields::values(&x);
        let nx = fields::sup(&xv);
        if !(nx > 1e-12 * fields::sup(c).max(1e-300)) {
            return Err(CheckError::DegeneratePlane(nx));
        }
        let k_theta = fol.k_theta(&x)?;
        let px = fol.phi_h(&x);
        let gxx = fol.g_theta(&x, &x).value().re;
        let tx = fol.tau(&x);
        let axx = fol.g_theta(&tx, &x).value().re;
        let axpx = fol.g_theta(&tx, &px).value().re;
        let k_g_h = -s.phi / n1 * (4.0 * k_theta + 4.0 / s.f - 2.0 * s.f * (axx * axx + axpx * axpx) / (gxx * gxx));
        let (t, nf) = (fol.t_field(), fol.n_field());
        let den = sigma0_denominator(m, &t, &nf);
        let k_g_sigma0 = m.inner(&m.curvature(&nf, &t, &t), &nf).value().re / den;
        let l1 = 2.0 / n1 * (s.f / s.phi)
            * (s.f * s.f * s.nr + 4.0 / (1.0 - s.r * s.phi).powi(2) - 6.0 * s.f * s.f * s.r / s.phi
                + 4.0 * s.f * s.f * s.r * s.r);
        let l2 = s.f * s.f * s.phi / n1 * s.nh;
        Ok(CurvatureSample {
            point: fol.z.clone(),
            epsilon: -s.phi,
            k_g_h,
            k_g_sigma0,
            k_theta,
            r: s.r,
            f: s.f,
            phi_over_f: s.phi / s.f,
            l1,
            l2,
            f2_phi_h: s.f * s.f * s.phi * s.h,
            tail_estimate: self.tail_estimate,
        })
    }

    /// Sectional curvature of the horizontal plane through `π₁₀(c)` from the
    /// Kähler curvature tensor.
    pub fn hol_sectional_kahler(&self, c: &[C64]) -> Result<f64, CheckError> {
        let m = self.metric(IdentityId::Sigma0Ratio)?;
        let fol = &self.fol;
        let x = fol.horizontal(c);
        let px = fol.phi_h(&x);
        let num = m.inner(&m.curvature(&x, &px, &px), &x).value().re;
        let gxx = m.inner(&x, &x).value().re;
        let gyy = m.inner(&px, &px).value().re;
        let gxy = m.inner(&x, &px).value().re;
        let den = gxx * gyy - gxy * gxy;
        if !(den > 0.0) {
            return Err(CheckError::DegeneratePlane(den));
        }
        Ok(num / den)
    }
}

fn sigma0_denominator(m: &MetricField, t: &[Jet], nf: &[Jet]) -> f64 {
    let gnn = m.inner(nf, nf).value().re;
    let gtt = m.inner(t, t).value().re;
    let gnt = m.inner(nf, t).value().re;
    gnn * gtt - gnt * gnt
}

/// Pointwise scalars and vectors shared by the identity formulas.
struct Scalars {
    phi: f64,
    r: f64,
    f: f64,
    g: f64,
    h: f64,
    nr: f64,
    tr: f64,
    ntr: f64,
    ttr: f64,
    tg: f64,
    nh: f64,
    xr_norm2: f64,
    t: V,
    n: V,
    xr: V,
    phi_xr: V,
}

impl Scalars {
    fn new(fol: &Foliation) -> Scalars {
        let t = fol.t_field();
        let nf = fol.n_field();
        let tr = fol.t_r();
        // Undefined on φ = 0; only Bergman identities, which never sample
        // there, read them.
        let g = fol.g_scalar();
        let h = fol.h_scalar();
        let val = |j: &Option<Jet>| j.as_ref().map_or(f64::NAN, |j| j.value().re);
        let phi = fol.phi.value().re;
        let r = fol.r.value().re;
        Scalars {
            phi,
            r,
            f: phi / (1.0 - phi * r),
            g: val(&g),
            h: val(&h),
            nr: fol.n_r().value().re,
            tr: tr.value().re,
            ntr: fields::along(&tr, &nf).value().re,
            ttr: fields::along(&tr, &t).value().re,
            tg: val(&g.as_ref().map(|g| fields::along(g, &t))),
            nh: val(&h.as_ref().map(|h| fields::along(h, &nf))),
            xr_norm2: fol.g_theta(&fol.x_r, &fol.x_r).value().re,
            t: fields::values(&t),
            n: fields::values(&nf),
            xr: fields::values(&fol.x_r),
            phi_xr: fields::values(&fol.phi_h(&fol.x_r)),
        }
    }
}

/// Curvatures at one collar point.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureSample {
    pub point: Vec<C64>,
    pub epsilon: f64,
    /// Horizontal `J`-invariant plane, by the foliation formula.
    pub k_g_h: f64,
    pub k_g_sigma0: f64,
    pub k_theta: f64,
    pub r: f64,
    pub f: f64,
    pub phi_over_f: f64,
    pub l1: f64,
    pub l2: f64,
    pub f2_phi_h: f64,
    pub tail_estimate: f64,
}
