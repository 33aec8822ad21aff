//! CR foliation of `φ = |z|² − 1`: each level sphere `|z|² = 1 − ε` carries
//! pseudohermitian sectional curvature `1/|z|²` and vanishing torsion.

use bergman_lab::cjet::C64;
use bergman_lab::crfoliation::{sphere_phi, Foliation};
use bergman_lab::fields;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for eps in [0.5, 0.1, 0.0] {
        let rad = (1.0 - eps as f64).sqrt();
        let z = [C64::new(0.6 * rad, 0.0), C64::new(0.0, 0.8 * rad)];
        let fol = Foliation::new(sphere_phi(&z))?;
        let h = fol.horizontal_basis();
        let tau = fol.tau(&h[0]);
        println!(
            "ε={eps:<4} r={:.12} k_θ={:.12} |τ|={:.1e} Levi gram={:?}",
            fol.r.value().re,
            fol.k_theta(&h[0])?,
            fields::sup(&fields::values(&tau)),
            fol.levi.gram
        );
    }
    Ok(())
}
