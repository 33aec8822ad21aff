//! Jets of `log K` against Richardson-extrapolated central differences.

mod common;

use bergman_lab::domains::KernelModel;
use common::*;

const TOL: f64 = 1e-5;

fn max_mismatch(model: &KernelModel, seed: u64) -> f64 {
    collar_points(model, seed, 20, 0.2, 0.9)
        .iter()
        .map(|z| ad_mismatch(model, z, 1e-4, 0.0))
        .fold(0.0, f64::max)
}

#[test]
fn ball_two() {
    assert!(max_mismatch(&ball(2), 1) < TOL);
}

#[test]
fn ball_three() {
    assert!(max_mismatch(&ball(3), 2) < TOL);
}

#[test]
fn affine_image() {
    assert!(max_mismatch(&affine(), 3) < TOL);
}

#[test]
fn perturbed_series() {
    assert!(max_mismatch(perturbed(), 4) < TOL);
}

#[test]
fn oracle_detects_a_wrong_coefficient() {
    // Steps of 0.1 leave truncation error far above tolerance, so the
    // comparison is sensitive to the difference quotients it uses.
    let m = ball(2);
    let z = vec![c(0.3, 0.1), c(-0.2, 0.2)];
    assert!(ad_mismatch(&m, &z, 1e-4, 0.0) < TOL);
    assert!(ad_mismatch(&m, &z, 1e-1, 0.0) > TOL, "coarse steps must be visible");
}
