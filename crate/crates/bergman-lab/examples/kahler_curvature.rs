//! Bergman metric and curvature tensor, computed two independent ways, and
//! the holomorphic sectional curvature of the ball (constant `−4/(n+1)`).

use bergman_lab::cjet::C64;
use bergman_lab::domains;
use bergman_lab::kahler::{bergman_metric, curvature_hessian, curvature_kobayashi, hol_sectional};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let z = [C64::new(0.3, 0.1), C64::new(-0.2, 0.4)];
    let k = domains::kernel_ball(2, &z)?;
    let m = bergman_metric(&domains::log_kernel(&k)?)?;
    let rh = curvature_hessian(&m);
    let rk = curvature_kobayashi(&k, &m)?;
    println!("route difference      {:.2e}", rh.max_diff(&rk));
    println!("symmetry residual     {:.2e}", rh.symmetry_residual());
    for v in [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.3, 0.7), C64::new(1.0, -0.2)]] {
        println!("hol sectional along {v:?}: {:.12}", hol_sectional(&m, &rh, &v)?);
    }
    Ok(())
}
