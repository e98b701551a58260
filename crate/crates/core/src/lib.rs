//! Quantum potentials whose bound-state spectra are prescribed integer
//! sequences.
//!
//! The crate builds even 1D potentials with an exact finite spectrum through a
//! chain of supersymmetric partner potentials ([`susy`]), checks them with an
//! independent finite-difference eigensolver ([`eigensolver`]), produces the
//! scalable semiclassical prime potential ([`semiclassical`]), simulates the
//! phase-only holographic realization of a potential ([`hologram`]) and
//! implements the transmission-resonance lucky-prime filter ([`scattering`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigensolver;
pub mod error;
pub mod grid;
pub mod hologram;
pub mod interp;
pub mod pipeline;
pub mod quadrature;
pub mod scattering;
pub mod semiclassical;
pub mod sequences;
pub mod susy;
pub mod units;

pub use eigensolver::{bound_states, compare_spectrum, DiscrepancyReport, Spectrum};
pub use error::{Error, Result};
pub use grid::{Grid, PotentialGrid};
pub use sequences::IntegerSequence;
pub use susy::{design_potential, KineticConvention};

/// Kinetic scale of the `-½ d²/dx²` convention, the one the Pöschl-Teller
/// chain closes under.
pub const HALF_KINETIC_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Kinetic scale of the `-d²/dx²` convention.
pub const UNIT_KINETIC_SCALE: f64 = 1.0;
