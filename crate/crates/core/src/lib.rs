//! Core toolkit for simulating MRI phase acquisitions of susceptibility
//! phantoms at arbitrary dipole orientations and inverting them back to
//! susceptibility maps with classical methods.
//!
//! Conventions shared by every module:
//! - volumes are x-fastest (`x + nx*(y + ny*z)`) and double precision;
//! - the forward FFT is unnormalized, the inverse divides by the voxel count;
//! - frequency grids are integer cycles per field of view with DC at index 0;
//! - susceptibility is in ppm, fields in ppm of B0, phases in radians.

pub mod error;
pub mod fft;
pub mod mask;
pub mod metrics;
pub mod operators;
pub mod phantom;
pub mod physics;
pub mod qvol;
pub mod recon;
pub mod rng;
pub mod synth;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{AcquisitionMeta, CVolume3, OrientationVector, Volume3};
