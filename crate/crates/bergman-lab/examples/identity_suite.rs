//! Every identity of the suite evaluated at one collar point of the
//! perturbed Reinhardt domain, with residuals relative to the term scale.

use bergman_lab::asympt;
use bergman_lab::cjet::C64;
use bergman_lab::curvcheck::{Geometry, IdentityId};
use bergman_lab::domains::{DomainSpec, KernelModel, ShadowPolynomial};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = DomainSpec::reinhardt_series(ShadowPolynomial::perturbed_ball(), 400, 32);
    let model = KernelModel::build(spec, bergman_lab::domains::cache_dir_from_env().as_deref())?;
    let origin = [C64::new(0.0, 0.0); 2];
    let z = asympt::locate_level(&model, &origin, &[C64::new(0.6, 0.1), C64::new(-0.3, 0.5)], 0.2)?;
    let geo = Geometry::from_model(&model, &z)?;
    println!("point {z:?}  series tail {:.1e}", geo.tail_estimate);
    for id in IdentityId::ALL {
        let r = geo.check(id)?;
        println!("{:>14}  residual {:.2e}  relative {:.2e}", id.name(), r.residual, r.relative());
    }
    Ok(())
}
