//! Truncated Taylor jets in the Wirtinger variables `(z, z̄)` of `Cⁿ`.
//!
//! A [`Jet`] stores the Taylor coefficients of a function around a base point
//! `z₀`, in the `2n` independent variables `δz = z − z₀` and `δz̄ = z̄ − z̄₀`,
//! for every monomial of total degree at most [`MAX_ORDER`]. Coefficients are
//! kept in a graded ordering, so the coefficients of a lower-order jet are a
//! prefix of the higher-order ones. Each jet also carries the order through
//! which its coefficients are exact: differentiation lowers it by one and
//! binary operations take the minimum, so composite expressions never report
//! digits that were truncated away.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Highest total degree stored.
pub const MAX_ORDER: usize = 4;

/// Default magnitude below which a divisor is rejected.
pub const DEFAULT_DIV_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("division by a jet whose value {0:e} is below the floor")]
    DivisionByZeroJet(f64),
    #[error("{func} requires a positive real value, got {value}")]
    DomainError { func: &'static str, value: C64 },
}

/// A coordinate direction: `∂/∂z_j` or `∂/∂z̄_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Z(usize),
    Zbar(usize),
}

/// Monomial tables shared by all jets in a given dimension.
pub struct Layout {
    n: usize,
    nvars: usize,
    exps: Vec<Vec<u8>>,
    deg: Vec<u8>,
    /// `count[p]` = number of monomials of degree ≤ p.
    count: [usize; MAX_ORDER + 1],
    index: HashMap<Vec<u8>, usize>,
    /// Pairs `(i, j)` with `e_i + e_j = e_k`, grouped by `k`.
    mul_pairs: Vec<(u32, u32)>,
    mul_start: Vec<usize>,
    /// `shift[v][t] = (s, m)`: coefficient `t` of `∂_v f` is `m · c_s`.
    shift: Vec<Vec<(usize, f64)>>,
    conj_perm: Vec<usize>,
    factorial_weight: Vec<f64>,
}

impl Layout {
    fn build(n: usize) -> Layout {
        let nvars = 2 * n;
        let mut exps: Vec<Vec<u8>> = Vec::new();
        let mut count = [0usize; MAX_ORDER + 1];
        for d in 0..=MAX_ORDER {
            let mut cur = vec![0u8; nvars];
            push_degree(&mut exps, &mut cur, 0, d as u8);
            count[d] = exps.len();
        }
        let deg: Vec<u8> = exps.iter().map(|e| e.iter().sum()).collect();
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();

        let mut mul_pairs = Vec::new();
        let mut mul_start = Vec::with_capacity(exps.len() + 1);
        for ek in &exps {
            mul_start.push(mul_pairs.len());
            for (i, ei) in exps.iter().enumerate() {
                if ei.iter().zip(ek).all(|(a, b)| a <= b) {
                    let ej: Vec<u8> = ek.iter().zip(ei).map(|(b, a)| b - a).collect();
                    mul_pairs.push((i as u32, index[&ej] as u32));
                }
            }
        }
        mul_start.push(mul_pairs.len());

        let mut shift = vec![Vec::with_capacity(count[MAX_ORDER - 1]); nvars];
        for (v, sv) in shift.iter_mut().enumerate() {
            for e in exps.iter().take(count[MAX_ORDER - 1]) {
                let mut up = e.clone();
                up[v] += 1;
                sv.push((index[&up], up[v] as f64));
            }
        }

        let conj_perm = exps
            .iter()
            .map(|e| {
                let mut c = e[n..].to_vec();
                c.extend_from_slice(&e[..n]);
                index[&c]
            })
            .collect();
        let factorial_weight = exps
            .iter()
            .map(|e| e.iter().map(|&k| factorial(k as usize)).product())
            .collect();

        Layout {
            n,
            nvars,
            exps,
            deg,
            count,
            index,
            mul_pairs,
            mul_start,
            shift,
            conj_perm,
            factorial_weight,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self, order: usize) -> usize {
        self.count[order]
    }

    pub fn exponents(&self, k: usize) -> &[u8] {
        &self.exps[k]
    }

    pub fn degree(&self, k: usize) -> usize {
        self.deg[k] as usize
    }

    /// Index of the monomial `δz^α δz̄^β`.
    pub fn index_of(&self, alpha: &[u8], beta: &[u8]) -> Option<usize> {
        if alpha.len() != self.n || beta.len() != self.n {
            return None;
        }
        let mut e = alpha.to_vec();
        e.extend_from_slice(beta);
        self.index.get(&e).copied()
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, cur: &mut [u8], pos: usize, left: u8) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.to_vec());
        cur[pos] = 0;
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k;
        push_degree(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// Shared layout for dimension `n`.
pub fn layout(n: usize) -> Arc<Layout> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Layout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(Layout::build(n)))
        .clone()
}

#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    base: Arc<[C64]>,
    order: usize,
    c: Vec<C64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.layout.n)
            .field("order", &self.order)
            .field("value", &self.c[0])
            .finish()
    }
}

/// Coordinate jets `z₁..zₙ, z̄₁..z̄ₙ` at `z`.
pub fn seed_coordinates(z: &[C64]) -> Vec<Jet> {
    assert!(!z.is_empty(), "dimension must be positive");
    let lay = layout(z.len());
    let base: Arc<[C64]> = Arc::from(z);
    let n = z.len();
    (0..2 * n)
        .map(|v| {
            let mut j = Jet::constant_on(&lay, &base, C64::new(0.0, 0.0));
            j.c[0] = if v < n { z[v] } else { z[v - n].conj() };
            j.c[1 + v] = C64::new(1.0, 0.0);
            j
        })
        .collect()
}

impl Jet {
    fn constant_on(lay: &Arc<Layout>, base: &Arc<[C64]>, v: C64) -> Jet {
        let mut c = vec![C64::new(0.0, 0.0); lay.count[MAX_ORDER]];
        c[0] = v;
        Jet {
            layout: lay.clone(),
            base: base.clone(),
            order: MAX_ORDER,
            c,
        }
    }

    /// Constant jet sharing this jet's base point.
    pub fn constant_like(&self, v: impl Into<C64>) -> Jet {
        let mut c = vec![C64::new(0.0, 0.0); self.c.len()];
        c[0] = v.into();
        Jet {
            layout: self.layout.clone(),
            base: self.base.clone(),
            order: self.order,
            c,
        }
    }

    /// Constant jet at `z` (exact to every order).
    pub fn constant(z: &[C64], v: impl Into<C64>) -> Jet {
        let lay = layout(z.len());
        Jet::constant_on(&lay, &Arc::from(z), v.into())
    }

    pub fn zero_like(&self) -> Jet {
        self.constant_like(0.0)
    }

    /// Builds a jet from raw Taylor coefficients in layout order.
    pub fn from_taylor(z: &[C64], order: usize, coeffs: Vec<C64>) -> Jet {
        let lay = layout(z.len());
        assert!(order <= MAX_ORDER);
        assert_eq!(coeffs.len(), lay.count[order], "coefficient count");
        Jet {
            layout: lay,
            base: Arc::from(z),
            order,
            c: coeffs,
        }
    }

    pub fn dim(&self) -> usize {
        self.layout.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn base_point(&self) -> &[C64] {
        &self.base
    }

    pub fn value(&self) -> C64 {
        self.c[0]
    }

    /// Taylor coefficients in layout order.
    pub fn taylor(&self) -> &[C64] {
        &self.c
    }

    /// Taylor coefficient of `δz^α δz̄^β`; zero beyond the exact order.
    pub fn coeff(&self, alpha: &[u8], beta: &[u8]) -> C64 {
        match self.layout.index_of(alpha, beta) {
            Some(k) if k < self.c.len() => self.c[k],
            _ => C64::new(0.0, 0.0),
        }
    }

    /// `∂^α ∂̄^β f(z₀) = α! β! · coeff(α, β)`.
    pub fn derivative(&self, alpha: &[u8], beta: &[u8]) -> C64 {
        match self.layout.index_of(alpha, beta) {
            Some(k) if k < self.c.len() => self.c[k] * self.layout.factorial_weight[k],
            _ => C64::new(0.0, 0.0),
        }
    }

    /// Derivative by flat multi-index position in layout order.
    pub fn derivative_at(&self, k: usize) -> C64 {
        self.c[k] * self.layout.factorial_weight[k]
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        let len = self.layout.count[order];
        Jet {
            layout: self.layout.clone(),
            base: self.base.clone(),
            order,
            c: self.c[..len].to_vec(),
        }
    }

    fn check_compatible(&self, other: &Jet) {
        assert_eq!(self.layout.n, other.layout.n, "jet dimensions differ");
        debug_assert!(
            Arc::ptr_eq(&self.base, &other.base) || self.base[..] == other.base[..],
            "jet base points differ"
        );
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(C64, C64) -> C64) -> Jet {
        self.check_compatible(other);
        let order = self.order.min(other.order);
        let len = self.layout.count[order];
        let c = (0..len).map(|k| f(self.c[k], other.c[k])).collect();
        Jet {
            layout: self.layout.clone(),
            base: self.base.clone(),
            order,
            c,
        }
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        self.check_compatible(other);
        let order = self.order.min(other.order);
        let lay = &self.layout;
        let len = lay.count[order];
        let mut c = vec![C64::new(0.0, 0.0); len];
        for (k, ck) in c.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &(i, j) in &lay.mul_pairs[lay.mul_start[k]..lay.mul_start[k + 1]] {
                acc += self.c[i as usize] * other.c[j as usize];
            }
            *ck = acc;
        }
        Jet {
            layout: self.layout.clone(),
            base: self.base.clone(),
            order,
            c,
        }
    }

    pub fn scale(&self, s: impl Into<C64>) -> Jet {
        let s = s.into();
        let mut out = self.clone();
        for v in &mut out.c {
            *v *= s;
        }
        out
    }

    pub fn add_scalar(&self, s: impl Into<C64>) -> Jet {
        let mut out = self.clone();
        out.c[0] += s.into();
        out
    }

    /// Jet of `conj(f)`.
    pub fn conj(&self) -> Jet {
        let perm = &self.layout.conj_perm;
        let c = (0..self.c.len()).map(|k| self.c[perm[k]].conj()).collect();
        Jet {
            layout: self.layout.clone(),
            base: self.base.clone(),
            order: self.order,
            c,
        }
    }

    pub fn re(&self) -> Jet {
        (self + &self.conj()).scale(0.5)
    }

    pub fn im(&self) -> Jet {
        (self - &self.conj()).scale(C64::new(0.0, -0.5))
    }

    /// Partial derivative; the result is exact through `order − 1`.
    pub fn partial(&self, var: Var) -> Jet {
        let n = self.layout.n;
        let v = match var {
            Var::Z(j) => {
                assert!(j < n);
                j
            }
            Var::Zbar(j) => {
                assert!(j < n);
                n + j
            }
        };
        if self.order == 0 {
            return Jet {
                layout: self.layout.clone(),
                base: self.base.clone(),
                order: 0,
                c: vec![C64::new(0.0, 0.0)],
            };
        }
        let order = self.order - 1;
        let len = self.layout.count[order];
        let sh = &self.layout.shift[v];
        let c = (0..len).map(|t| self.c[sh[t].0] * sh[t].1).collect();
        Jet {
            layout: self.layout.clone(),
            base: self.base.clone(),
            order,
            c,
        }
    }

    pub fn dz(&self, j: usize) -> Jet {
        self.partial(Var::Z(j))
    }

    pub fn dzbar(&self, j: usize) -> Jet {
        self.partial(Var::Zbar(j))
    }

    /// `Σ_k u_k δ^k` with `δ = self − value`, by Horner.
    fn compose(&self, series: &[C64]) -> Jet {
        let mut delta = self.clone();
        delta.c[0] = C64::new(0.0, 0.0);
        let top = series.len().min(self.order + 1);
        let mut acc = self.constant_like(series[top - 1]);
        for k in (0..top - 1).rev() {
            acc = acc.mul_jet(&delta);
            acc.c[0] += series[k];
        }
        acc.order = self.order;
        acc.c.truncate(self.layout.count[self.order]);
        acc
    }

    fn positive_real(&self, func: &'static str) -> Result<f64, JetError> {
        let v = self.c[0];
        if v.re > 0.0 && v.im.abs() <= 1e-12 * v.re {
            Ok(v.re)
        } else {
            Err(JetError::DomainError { func, value: v })
        }
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let a = self.positive_real("ln")?;
        let mut s = vec![C64::new(a.ln(), 0.0)];
        let mut p = 1.0;
        for k in 1..=MAX_ORDER {
            p /= a;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            s.push(C64::new(sign * p / k as f64, 0.0));
        }
        Ok(self.compose(&s))
    }

    /// Real power of a positive real-valued jet.
    pub fn powf(&self, e: f64) -> Result<Jet, JetError> {
        let a = self.positive_real("pow")?;
        let mut s = Vec::with_capacity(MAX_ORDER + 1);
        let mut binom = 1.0;
        for k in 0..=MAX_ORDER {
            s.push(C64::new(binom * a.powf(e - k as f64), 0.0));
            binom *= (e - k as f64) / (k as f64 + 1.0);
        }
        Ok(self.compose(&s))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        self.powf(0.5)
    }

    pub fn exp(&self) -> Jet {
        let a = self.c[0].exp();
        let s: Vec<C64> = (0..=MAX_ORDER).map(|k| a / factorial(k)).collect();
        self.compose(&s)
    }

    pub fn try_recip_with_floor(&self, floor: f64) -> Result<Jet, JetError> {
        let a = self.c[0];
        if a.norm() < floor {
            return Err(JetError::DivisionByZeroJet(a.norm()));
        }
        let inv = a.inv();
        let mut s = Vec::with_capacity(MAX_ORDER + 1);
        let mut p = inv;
        for k in 0..=MAX_ORDER {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s.push(p * sign);
            p *= inv;
        }
        Ok(self.compose(&s))
    }

    pub fn try_recip(&self) -> Result<Jet, JetError> {
        self.try_recip_with_floor(DEFAULT_DIV_FLOOR)
    }

    pub fn try_div_with_floor(&self, other: &Jet, floor: f64) -> Result<Jet, JetError> {
        Ok(self.mul_jet(&other.try_recip_with_floor(floor)?))
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet, JetError> {
        self.try_div_with_floor(other, DEFAULT_DIV_FLOOR)
    }

    /// `max |c(α,β) − conj c(β,α)|`; zero for real-valued functions.
    pub fn hermitian_defect(&self) -> f64 {
        let perm = &self.layout.conj_perm;
        (0..self.c.len())
            .map(|k| (self.c[k] - self.c[perm[k]].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        self.zip_with(o, |a, b| a + b)
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        self.zip_with(o, |a, b| a - b)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        self.mul_jet(o)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        &self + &o
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        &self - &o
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        self.mul_jet(&o)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, o: &Jet) {
        *self = &*self + o;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, o: &Jet) {
        *self = &*self - o;
    }
}
