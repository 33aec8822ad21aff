//! Bergman-kernel geometry of strictly pseudoconvex domains.
//!
//! The crate computes jets of Bergman kernels, the Bergman metric and its
//! curvature, the CR-foliation data of the level sets of
//! `φ = −K^{−1/(n+1)}`, and the boundary behaviour of holomorphic sectional
//! curvature, which tends to `−4/(n+1)`.

pub mod cjet;
pub mod domains;
pub mod hexfloat;
pub mod jlinalg;
pub mod quadrature;
pub mod fields;
pub mod kahler;
pub mod crfoliation;
pub mod curvcheck;
pub mod asympt;
pub mod cli;
