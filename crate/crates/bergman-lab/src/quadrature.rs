//! Gauss–Legendre rules and the composite rule used for simplex integrals.

use std::f64::consts::PI;

/// Nodes and weights of the `q`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(q, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(q, t);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[q - 1 - i] = t;
        w[i] = wi;
        w[q - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(q: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if q == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=q {
        let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = q as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Composite rule on `u ∈ [0, 1]` in the variable `u = sin²(πv/2)`.
///
/// Uniform panels in `v` resolve Beta-type peaks `u^a (1−u)^b` with a width
/// independent of the peak location. Returns `(u, 1−u, weight)` with the
/// Jacobian folded into the weight.
pub fn sine_square_rule(panels: usize, q: usize) -> Vec<(f64, f64, f64)> {
    let (x, w) = gauss_legendre(q);
    let h = 1.0 / panels as f64;
    let mut out = Vec::with_capacity(panels * q);
    for p in 0..panels {
        let a = p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            let v = a + 0.5 * h * (xi + 1.0);
            let s = (0.5 * PI * v).sin();
            let c = (0.5 * PI * v).cos();
            let jac = 0.5 * PI * (PI * v).sin();
            out.push((s * s, c * c, 0.5 * h * wi * jac));
        }
    }
    out
}

/// Panel count for monomial degrees up to `degree`: peaks have `v`-width
/// about `1/(π√d)`, and each panel spans at most a few of them.
pub fn panels_for_degree(degree: usize) -> usize {
    ((PI * (degree.max(1) as f64).sqrt()) / 8.0).ceil().max(1.0) as usize
}
