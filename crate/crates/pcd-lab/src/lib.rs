//! Spectral laboratory for paracontrolled stochastic quantization of the
//! dynamic Φ⁴ model on the torus `T^d`, `d ∈ {1, 2, 3}`.
//!
//! Module map:
//! - [`lattice`]: truncated Fourier fields, transforms, dealiased products.
//! - [`besov`]: Littlewood–Paley blocks, Besov–Hölder norms, regularity fits.
//! - [`paracalc`]: paraproducts, commutators, heat flow, Duhamel integration.
//! - [`ou`]: exact sampling of the mollified Ornstein–Uhlenbeck field.
//! - [`renorm`]: renormalization constants and the rough-distribution tuple.
//! - [`solver`]: direct ETD1 solver and the paracontrolled Picard iteration.
//! - [`harness`]: configuration, experiment drivers and run manifests.

pub mod besov;
pub mod error;
mod fft;
pub mod harness;
pub mod io;
pub mod lattice;
pub mod ou;
pub mod paracalc;
pub mod renorm;
pub mod rng;
pub mod solver;
pub mod stats;
pub mod sums;

pub use error::{Error, Result};
pub use lattice::{Dealias, LatticeSpec, PhysicalField, SpectralField, TrajectoryField};
