//! Numerical laboratory for the photonic emulation of quantum work
//! statistics.
//!
//! A harmonic oscillator is emulated by Hermite-Gaussian optical modes;
//! its free evolution by a fractional Fourier transform; a sudden
//! momentum kick by a linear phase mask. Interfering the two orderings
//! of "evolve" and "kick" yields intensity traces whose interference
//! term is the two-point-measurement characteristic function `G(s)`.
//!
//! Modules, bottom up:
//!
//! - [`hermite`]: grids, sampled fields, normalized eigenmodes.
//! - [`thermo`]: spectrum and thermal ensemble.
//! - [`transition`]: kick amplitudes `c_{m,n}` (closed form and quadrature).
//! - [`workstats`]: `G(s)`, work distribution, fluctuation checks.
//! - [`optics`]: Fresnel propagation, lenses, split-step, FRFT.
//! - [`interferometer`]: two-path intensity traces and reconstruction.
//! - [`openmaps`]: Kraus channels on a truncated eigenbasis.
//! - [`scenario`], [`commands`], [`verify`]: the batch front-end.

pub mod commands;
pub mod csvio;
pub mod error;
pub mod hermite;
pub mod interferometer;
pub mod openmaps;
pub mod optics;
pub mod scenario;
pub mod thermo;
pub mod transition;
pub mod verify;
pub mod workstats;

pub use error::{Error, Result};
pub use hermite::{hg_mode, overlap, GridSpec, HgBasis, ModeIndex, SampledField};
pub use num_complex::Complex64;
pub use thermo::{thermal_weights, Spectrum, ThermalEnsemble};
pub use transition::{build_matrix, coeff_closed, TransitionMatrix};
