//! Boundary scan of holomorphic sectional curvature along a ray of the
//! perturbed Reinhardt domain, extrapolated to the boundary.
//!
//! The norm table for degree 1200 takes a few seconds to build; set
//! `BERGMAN_LAB_CACHE` to reuse it across runs.

use bergman_lab::asympt::{self, PlaneChoice, RaySpec};
use bergman_lab::cjet::C64;
use bergman_lab::domains::{cache_dir_from_env, DomainSpec, KernelModel, ShadowPolynomial};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = DomainSpec::reinhardt_series(ShadowPolynomial::perturbed_ball(), 1200, 32);
    let model = KernelModel::build(spec, cache_dir_from_env().as_deref())?;
    let eps = asympt::geometric_epsilons(0.4, 0.05, 7);
    for plane in [PlaneChoice::HorizontalRandom, PlaneChoice::Sigma0] {
        let ray = RaySpec::new(vec![C64::new(0.0, 0.0); 2], &[C64::new(0.6, 0.0), C64::new(0.0, 0.8)], eps.clone(), plane, 1)?;
        let rep = asympt::scan(&model, &ray, 3, 1e-2)?;
        println!("plane {}", rep.plane);
        for row in &rep.rows {
            let s = &row.sample;
            println!("  ε={:.4}  k={:+.8}  L1={:+.5}  L2={:+.5}", s.epsilon, row.k, s.l1, s.l2);
        }
        println!(
            "  limit {:+.6} (target {:+.6}, observed order {:?}) {}",
            rep.extrapolated_limit,
            rep.target,
            rep.fit_order,
            if rep.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(())
}
