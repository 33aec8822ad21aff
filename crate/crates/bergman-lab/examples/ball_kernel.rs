//! Kernel of the unit ball and its defining function `φ = −K^{−1/(n+1)}`.
//!
//! Run: `cargo run --example ball_kernel`

use bergman_lab::cjet::C64;
use bergman_lab::domains::{self, DomainSpec, KernelModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for n in [2, 3] {
        let model = KernelModel::build(DomainSpec::unit_ball(n), None)?;
        let mut z = vec![C64::new(0.0, 0.0); n];
        z[0] = C64::new(0.5, 0.2);
        let kj = model.kernel_jet(&z)?;
        let phi = domains::defining_function(&kj.k)?;
        // On the ball φ is a constant multiple of |z|² − 1.
        println!(
            "n={n}  K={:.12}  φ={:.12}  closed form φ={:.12}",
            kj.k.value().re,
            phi.value().re,
            domains::ball_phi_closed_form(n, &z)
        );
    }
    Ok(())
}
