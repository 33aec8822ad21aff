//! Truncated Wirtinger jets: exact derivatives through order four, and the
//! order bookkeeping that keeps truncated digits out of results.

use bergman_lab::cjet::{seed_coordinates, C64};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let z = [C64::new(0.4, -0.1), C64::new(0.2, 0.3)];
    let c = seed_coordinates(&z);
    // f = log(1 − z₁z̄₁ − z₂z̄₂)
    let s = c[0].mul_jet(&c[2]) + c[1].mul_jet(&c[3]);
    let f = (-s).add_scalar(1.0).ln()?;
    let one_minus: f64 = 1.0 - z.iter().map(|v| v.norm_sqr()).sum::<f64>();
    println!("f            = {:.15}", f.value().re);
    println!("∂₁∂̄₁ f       = {:.15}", f.derivative(&[1, 0], &[1, 0]).re);
    // −(1 − |z₂|²)/(1 − |z|²)²
    println!("closed form  = {:.15}", -(1.0 - z[1].norm_sqr()) / (one_minus * one_minus));
    let d = f.dz(0).dzbar(0);
    println!("order of f: {}, of ∂₁∂̄₁f: {}", f.order(), d.order());
    Ok(())
}
