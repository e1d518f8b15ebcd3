//! Coherent absorption spectra of cyclic three-level chiral molecules.
//!
//! Left- and right-handed molecules share every parameter except the sign of
//! one transition dipole, which shifts the loop phase by π. Driving all three
//! transitions at once makes each enantiomer absorb the probe at a different
//! dressed-state detuning, so the two peak heights of a mixture report its
//! enantiomeric excess.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod bloch;
pub mod cli;
pub mod config;
pub mod doppler;
pub mod error;
pub mod model;
pub mod propagation;
pub mod spectra;

pub use error::{Error, Result};
pub use model::{
    DensityMatrix, DriveConfig, Handedness, MediumConfig, MoleculeParams, Peaks, SpectrumPoint,
    SpectrumResult,
};
pub use spectra::{Engine, Solver};
