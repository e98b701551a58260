//! Semiclassical potential from a smooth density of states.
//!
//! For `H = -s² d²/dx² + V` with `V` even and increasing on `x > 0`, the
//! Abel inversion of the WKB counting rule gives
//!
//! ```text
//! x(V) = s ∫_{E0}^{V} ρ(E) dE / √(V - E),      ρ = dn/dE
//! ```
//!
//! Substituting `E = V - t²` removes the endpoint singularity:
//! `x(V) = 2 s ∫_0^{√(V-E0)} ρ(V - t²) dt`.

use std::cell::Cell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, PotentialGrid};
use crate::interp;
use crate::quadrature::GaussLegendre;
use crate::sequences::moebius;

/// Default truncation of the Möbius series.
pub const DEFAULT_TERMS: usize = 25;

/// `dπ/dE ≈ (1 / ln E) Σ_{m=1}^{terms} μ(m)/m · E^{(1-m)/m}`.
pub fn prime_density_of_states(e: f64, terms: usize) -> Result<f64> {
    if !(e > 2.0) || !e.is_finite() {
        return Err(invalid(format!("prime density of states needs E > 2, got {e}")));
    }
    if terms == 0 {
        return Err(invalid("at least one series term is required"));
    }
    Ok(dos_series(e, terms))
}

fn dos_series(e: f64, terms: usize) -> f64 {
    let mut sum = 0.0;
    for m in 1..=terms as u64 {
        let mu = moebius(m).expect("m >= 1");
        if mu != 0 {
            let mf = m as f64;
            sum += mu as f64 / mf * e.powf((1.0 - mf) / mf);
        }
    }
    sum / e.ln()
}

/// Composite Gauss-Legendre settings for the inversion integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionQuadrature {
    pub nodes_per_panel: usize,
    pub panels: usize,
}

impl Default for InversionQuadrature {
    fn default() -> Self {
        Self {
            nodes_per_panel: 64,
            panels: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalProfile {
    pub v_values: Vec<f64>,
    pub x_values: Vec<f64>,
    pub e0: f64,
    pub kinetic_scale: f64,
}

/// `x(V)` for a single `V` (the integral above).
pub fn turning_point<F: Fn(f64) -> f64>(
    dos: &F,
    e0: f64,
    v: f64,
    kinetic_scale: f64,
    quad: InversionQuadrature,
) -> Result<f64> {
    if v <= e0 {
        return Ok(0.0);
    }
    let rule = GaussLegendre::new(quad.nodes_per_panel);
    let bad = Cell::new(None);
    let integrand = |t: f64| {
        let e = v - t * t;
        let rho = dos(e);
        if !(rho > 0.0) && bad.get().is_none() {
            bad.set(Some(e));
        }
        2.0 * rho
    };
    let value = rule.composite(&integrand, 0.0, (v - e0).sqrt(), quad.panels);
    if let Some(energy) = bad.get() {
        return Err(Error::NonPositiveDensity { energy });
    }
    Ok(kinetic_scale * value)
}

/// Samples `x(V)` at `samples` equally spaced `V` in `[e0, v_max]`.
pub fn invert_to_potential<F: Fn(f64) -> f64>(
    dos: F,
    e0: f64,
    v_max: f64,
    samples: usize,
    kinetic_scale: f64,
    quad: InversionQuadrature,
) -> Result<SemiclassicalProfile> {
    if !(v_max > e0) {
        return Err(invalid(format!("need v_max > e0, got {v_max} <= {e0}")));
    }
    if samples < 2 {
        return Err(invalid("at least two samples are required"));
    }
    if !(kinetic_scale > 0.0) {
        return Err(invalid("kinetic scale must be positive"));
    }
    let v_values: Vec<f64> = (0..samples)
        .map(|i| e0 + (v_max - e0) * i as f64 / (samples - 1) as f64)
        .collect();
    let x_values = v_values
        .iter()
        .map(|&v| turning_point(&dos, e0, v, kinetic_scale, quad))
        .collect::<Result<Vec<_>>>()?;
    Ok(SemiclassicalProfile {
        v_values,
        x_values,
        e0,
        kinetic_scale,
    })
}

/// Prime profile with the truncated Möbius density.
pub fn prime_profile(
    e0: f64,
    v_max: f64,
    samples: usize,
    terms: usize,
    kinetic_scale: f64,
) -> Result<SemiclassicalProfile> {
    if !(e0 >= 2.0) {
        return Err(invalid(format!("prime profile needs e0 >= 2, got {e0}")));
    }
    // The series is regular at E = 2; only the validation in
    // prime_density_of_states excludes it.
    invert_to_potential(
        |e| if e > 2.0 { dos_series(e, terms) } else { dos_series(2.0, terms) },
        e0,
        v_max,
        samples,
        kinetic_scale,
        InversionQuadrature::default(),
    )
}

impl SemiclassicalProfile {
    pub fn x_max(&self) -> f64 {
        *self.x_values.last().expect("non-empty profile")
    }

    pub fn v_max(&self) -> f64 {
        *self.v_values.last().expect("non-empty profile")
    }

    /// Mirrors the profile to an even potential on `grid`, flat at `v_max`
    /// beyond the last turning point.
    pub fn to_potential(&self, grid: Grid) -> Result<PotentialGrid> {
        if self.x_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Numerical("semiclassical profile is not strictly increasing".into()));
        }
        let c = grid.center();
        let half: Vec<f64> = (0..=c)
            .map(|k| interp::linear(&self.x_values, &self.v_values, grid.x(c + k)))
            .collect();
        PotentialGrid::from_half(grid, &half, self.v_max())
    }
}

/// WKB phase `(1 / π s) ∫ √(E - V) dx` over the classically allowed region
/// of a sampled potential (trapezoid rule).
pub fn wkb_phase(potential: &PotentialGrid, energy: f64, kinetic_scale: f64) -> f64 {
    let h = potential.spacing();
    let f: Vec<f64> = potential.values.iter().map(|v| (energy - v).max(0.0).sqrt()).collect();
    let n = f.len();
    let integral = h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1]));
    integral / (PI * kinetic_scale)
}

/// Number of WKB levels `n + ½ <= phase` at or below `energy`.
pub fn wkb_level_count(potential: &PotentialGrid, energy: f64, kinetic_scale: f64) -> usize {
    (wkb_phase(potential, energy, kinetic_scale) + 0.5).floor().max(0.0) as usize
}
