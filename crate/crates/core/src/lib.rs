//! Monotone meshfree finite differences for linear elliptic equations in
//! non-divergence form on scattered point clouds.

pub mod calibrate;
pub mod domain;
pub mod experiments;
pub mod fields;
pub mod geometry;
pub mod io;
pub mod kernel;
pub mod mt19937;
pub mod pointcloud;
pub mod simplex;
pub mod solver;
pub mod stencil;
