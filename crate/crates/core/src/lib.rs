//! Watertight surface fitting with optimized Voronoi generators.
//!
//! The crate is `no_std` (with `alloc`). Enabling the `parallel` feature
//! (default) pulls in `std` and evaluates per-sample and per-cell work
//! on the rayon thread pool. All reductions are performed in a fixed order,
//! so results do not depend on the number of threads.
//!
//! Pipeline, in module order:
//!
//! - [`mesh`]: triangle and polygon meshes, normalization into `[-0.5, 0.5]^3`
//! - [`sampling`]: area-weighted surface samples, winding-number occupancy
//! - [`knn`]: exact k-nearest-neighbor index
//! - [`voroloss`]: loss and gradient from bisector-plane distances
//! - [`optim`]: grid initialization, Adam, the fitting loop
//! - [`voronoi`]: clipped Voronoi diagram with shared canonical vertices
//! - [`extract`]: occupancy tagging, surface extraction, repair, validation
//! - [`metrics`]: Chamfer distance, F1 and normal consistency

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;
#[cfg(all(test, not(feature = "std")))]
extern crate std;

pub mod error;
pub mod extract;
pub mod knn;
pub mod mesh;
pub mod metrics;
pub mod optim;
pub mod sampling;
pub mod selfcheck;
pub mod shapes;
pub mod voroloss;
pub mod voronoi;

mod par;

pub use error::{Error, Result};
pub use glam::DVec3;
