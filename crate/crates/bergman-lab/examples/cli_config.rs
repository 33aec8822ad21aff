//! Drives the command-line layer from code: parse a configuration, run
//! `verify`, and inspect the worst residual per identity.

use bergman_lab::cli::{self, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::parse(
        "domain.kind = affine_image\n\
         domain.dim = 2\n\
         domain.affine.matrix = 1.2+0.1i,0.3; -0.2i,0.9\n\
         domain.affine.translation = 0.5,-0.3i\n\
         verify.random_points = 4\n\
         run.seed = 3\n",
    )?;
    let rep = cli::cmd_verify(&cfg)?;
    for (id, w) in &rep.worst_relative {
        println!("{id:>14}  {w:.2e}");
    }
    println!("pass: {}", rep.pass);
    println!("{}", &cli::verify_csv(&rep)[..200]);
    Ok(())
}
