//! Monomial norms `‖z^α‖²` of a Reinhardt domain by Gauss–Legendre
//! quadrature, compared with the closed form on the ball.

use bergman_lab::domains::{self, DomainSpec, ShadowPolynomial};
use std::f64::consts::PI;

fn ball_norm(a: &[u32]) -> f64 {
    // π² α₁! α₂! / (|α| + 2)!
    let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
    PI * PI * fact(a[0]) * fact(a[1]) / fact(a[0] + a[1] + 2)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ball = DomainSpec::reinhardt_series(ShadowPolynomial::ball(2), 20, 32);
    let table = domains::monomial_norms(&ball, None)?;
    for a in [[0u32, 0], [3, 1], [10, 7], [0, 20]] {
        println!("ball α={a:?}  quadrature {:.15e}  closed form {:.15e}", table.norm(&a), ball_norm(&a));
    }
    let pert = DomainSpec::reinhardt_series(ShadowPolynomial::perturbed_ball(), 20, 32);
    let table = domains::monomial_norms(&pert, None)?;
    for a in [[0u32, 0], [3, 1], [10, 7]] {
        println!("perturbed α={a:?}  {:.15e}", table.norm(&a));
    }
    Ok(())
}
