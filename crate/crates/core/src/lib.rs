//! Full-body collision avoidance for serial-chain manipulators.
//!
//! The pipeline: rasterize obstacles into an [`grid::OccupancyGrid`], erode the
//! free space by the sampling resolution, solve Poisson's equation on what is
//! left to obtain a smooth safety function ([`psf::ScalarField`]), then filter
//! nominal joint velocities through a quadratic program with one barrier row
//! per robot surface sample ([`filter`]).
//!
//! This crate is `no_std` and only needs `alloc`. Timing, IO and file formats
//! live in the `psfguard` companion crate.
#![no_std]
// `!(x > 0.0)` is how parameter checks reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod edt;
pub mod error;
pub mod filter;
pub mod grid;
pub mod kinematics;
pub mod math;
pub mod psf;
pub mod qp;
pub mod sampling;
pub mod shapes;
pub mod sim;

pub use error::{Error, Result};
pub use nalgebra;

/// World-frame 3-vector, meters unless stated otherwise.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Rigid transform (rotation + translation).
pub type Pose = nalgebra::Isometry3<f64>;
