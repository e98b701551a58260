//! Conversion between dimensionless spectra and physical energies.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// CODATA 2018 values (SI).
pub mod constants {
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
    pub const BOLTZMANN: f64 = 1.380_649e-23;
    pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
    pub const RB87_MASS_U: f64 = 86.909_180_527;
}

use constants::*;

pub fn rb87_mass() -> f64 {
    RB87_MASS_U * ATOMIC_MASS_UNIT
}

/// Mass in kg from `rb87` or a plain number of kilograms.
pub fn parse_mass(s: &str) -> Result<f64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "rb87" | "87rb" => Ok(rb87_mass()),
        other => other
            .parse::<f64>()
            .map_err(|_| invalid(format!("unknown mass '{s}' (use rb87 or kilograms)"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalContext {
    /// kg
    pub mass: f64,
    /// Dimensionless length of the potential.
    pub l: f64,
    /// Physical length of the same potential, m.
    #[serde(rename = "L")]
    pub length: f64,
}

impl PhysicalContext {
    pub fn new(mass: f64, l: f64, length: f64) -> Result<Self> {
        for (name, v) in [("mass", mass), ("l", l), ("L", length)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { mass, l, length })
    }

    /// Physical length giving a scale of `h × hz` for the dimensionless length `l`.
    pub fn with_scale_hz(mass: f64, l: f64, hz: f64) -> Result<Self> {
        if !(hz > 0.0) {
            return Err(invalid("frequency scale must be positive"));
        }
        let ratio_sq = PLANCK * hz * mass / (HBAR * HBAR);
        Self::new(mass, l, l / ratio_sq.sqrt())
    }
}

/// An energy in the three unit forms used for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    #[serde(rename = "scale_J")]
    pub joules: f64,
    #[serde(rename = "scale_hHz")]
    pub hz: f64,
    #[serde(rename = "scale_kBK")]
    pub kelvin: f64,
}

impl Energy {
    pub fn from_joules(joules: f64) -> Self {
        Self {
            joules,
            hz: joules / PLANCK,
            kelvin: joules / BOLTZMANN,
        }
    }
}

/// `ħ²/m · (l/L)²`, energy per dimensionless unit.
pub fn energy_scale(ctx: &PhysicalContext) -> Energy {
    let r = ctx.l / ctx.length;
    Energy::from_joules(HBAR * HBAR / ctx.mass * r * r)
}

pub fn to_physical(e: f64, ctx: &PhysicalContext) -> Energy {
    Energy::from_joules(e * energy_scale(ctx).joules)
}

pub fn to_dimensionless(joules: f64, ctx: &PhysicalContext) -> f64 {
    joules / energy_scale(ctx).joules
}
