//! Phase-only hologram synthesis for 1D potential profiles.
//!
//! An `m × m` phase plane is embedded at the centre of a zero `2m × 2m`
//! plane and propagated to the far field by a centred unitary DFT. The phase
//! is optimised so that the normalised field on a signal region (SR) matches
//! a target amplitude with uniform phase; light outside the SR is free.
//!
//! Cost, with both fields normalised to unit power on the SR:
//!
//! ```text
//! C = 10^d (1 - Σ_SR |τ̃| |Ẽ|)²
//! ```

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, PotentialGrid};
use crate::interp::UniformSpline;

pub const DEFAULT_M: usize = 64;
pub const DEFAULT_SR_LENGTH: usize = 100;
pub const DEFAULT_STEEPNESS: i32 = 9;

/// Pixels of the output plane where the target is imposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRegion {
    n: usize,
    mask: Vec<bool>,
    /// Row-major indices of the SR pixels, ascending.
    pixels: Vec<usize>,
}

impl SignalRegion {
    pub fn from_mask(n: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != n * n {
            return Err(invalid("mask does not match the output plane"));
        }
        let pixels: Vec<usize> = (0..n * n).filter(|&i| mask[i]).collect();
        if pixels.is_empty() {
            return Err(invalid("signal region is empty"));
        }
        // Strictly inside: no pixel on the plane border.
        if pixels.iter().any(|&i| {
            let (r, c) = (i / n, i % n);
            r == 0 || c == 0 || r == n - 1 || c == n - 1
        }) {
            return Err(invalid("signal region touches the plane border"));
        }
        Ok(Self { n, mask, pixels })
    }

    /// `len` pixels of one row, centred on the middle column.
    pub fn centered_row(n: usize, row: usize, len: usize) -> Result<Self> {
        if len == 0 || len + 2 > n {
            return Err(invalid(format!("SR length {len} does not fit a {n}-pixel row")));
        }
        let start = (n - len) / 2;
        let mut mask = vec![false; n * n];
        for c in start..start + len {
            mask[row * n + c] = true;
        }
        Self::from_mask(n, mask)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    pub fn contains(&self, index: usize) -> bool {
        self.mask[index]
    }

    /// `(row, first column, length)` if the SR is one contiguous row segment.
    pub fn as_row(&self) -> Option<(usize, usize, usize)> {
        let first = self.pixels[0];
        let row = first / self.n;
        let ok = self
            .pixels
            .iter()
            .enumerate()
            .all(|(k, &p)| p == first + k && p / self.n == row);
        ok.then(|| (row, first % self.n, self.pixels.len()))
    }
}

/// Affine map between a potential window and SR intensities:
/// `Ĩ_j = (ceiling - V(x_j)) / scale` at pixel centres `x_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileMap {
    pub ceiling: f64,
    pub scale: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub pixels: usize,
}

impl ProfileMap {
    pub fn pixel_x(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.pixel_width()
    }

    pub fn pixel_width(&self) -> f64 {
        (self.x_max - self.x_min) / self.pixels as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetProfile {
    /// Unit-power amplitude over the SR pixels.
    pub amplitude: Vec<f64>,
    pub map: ProfileMap,
}

/// Intensity `∝ ceiling - V` sampled at `sr_length` pixel centres across
/// `[-half_window, half_window]`.
pub fn potential_to_target(
    potential: &PotentialGrid,
    sr_length: usize,
    ceiling: f64,
    half_window: f64,
) -> Result<TargetProfile> {
    if sr_length == 0 {
        return Err(invalid("SR length must be positive"));
    }
    if ceiling < potential.max() {
        return Err(invalid(format!(
            "ceiling {ceiling} is below the potential maximum {}",
            potential.max()
        )));
    }
    if !(half_window > 0.0) {
        return Err(invalid("window half width must be positive"));
    }
    let mut map = ProfileMap {
        ceiling,
        scale: 1.0,
        x_min: -half_window,
        x_max: half_window,
        pixels: sr_length,
    };
    let intensity: Vec<f64> = (0..sr_length)
        .map(|j| ceiling - potential.value_at(map.pixel_x(j)))
        .collect();
    let scale: f64 = intensity.iter().sum();
    if !(scale > 0.0) {
        return Err(invalid("target has no intensity: ceiling equals the potential everywhere"));
    }
    map.scale = scale;
    Ok(TargetProfile {
        amplitude: intensity.iter().map(|i| (i / scale).sqrt()).collect(),
        map,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HologramState {
    pub m: usize,
    /// Row-major `m × m`, values in `[0, 2π)`.
    pub phase: Vec<f64>,
    pub signal_region: SignalRegion,
    /// Unit-power amplitude in SR pixel order.
    pub target_amplitude: Vec<f64>,
    pub target_phase: f64,
    pub steepness_d: i32,
    pub map: Option<ProfileMap>,
}

impl HologramState {
    pub fn new(m: usize, signal_region: SignalRegion, target_amplitude: Vec<f64>, steepness_d: i32) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m must be positive"));
        }
        if signal_region.n != 2 * m {
            return Err(invalid("signal region must live on the 2m × 2m plane"));
        }
        if target_amplitude.len() != signal_region.len() {
            return Err(invalid(format!(
                "{} target values for {} SR pixels",
                target_amplitude.len(),
                signal_region.len()
            )));
        }
        if target_amplitude.iter().any(|a| !(*a >= 0.0)) {
            return Err(invalid("target amplitude must be non-negative"));
        }
        let power: f64 = target_amplitude.iter().map(|a| a * a).sum();
        if !(power > 0.0) {
            return Err(invalid("target amplitude has zero power"));
        }
        let norm = power.sqrt();
        Ok(Self {
            m,
            phase: vec![0.0; m * m],
            signal_region,
            target_amplitude: target_amplitude.iter().map(|a| a / norm).collect(),
            target_phase: 0.0,
            steepness_d,
            map: None,
        })
    }

    /// State for a 1D target on the centre row of the output plane.
    pub fn for_target(m: usize, target: &TargetProfile, steepness_d: i32) -> Result<Self> {
        let sr = SignalRegion::centered_row(2 * m, m, target.amplitude.len())?;
        let mut state = Self::new(m, sr, target.amplitude.clone(), steepness_d)?;
        state.map = Some(target.map);
        Ok(state)
    }

    pub fn padded_size(&self) -> usize {
        2 * self.m
    }

    pub fn randomize_phase(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.phase {
            *p = rng.gen_range(0.0..TAU);
        }
    }
}

pub fn uniform_illumination(m: usize) -> Vec<f64> {
    vec![1.0; m * m]
}

/// Gaussian beam `exp(-r² / w²)` centred on the modulator, `w` in pixels.
pub fn gaussian_illumination(m: usize, waist: f64) -> Vec<f64> {
    let c = (m as f64 - 1.0) / 2.0;
    (0..m * m)
        .map(|i| {
            let (r, q) = ((i / m) as f64 - c, (i % m) as f64 - c);
            (-(r * r + q * q) / (waist * waist)).exp()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputField {
    pub n: usize,
    pub field: Vec<Complex64>,
    pub power: f64,
}

impl OutputField {
    pub fn intensity(&self) -> Vec<f64> {
        self.field.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Centred unitary 2D DFT on an `n × n` plane (`n` even).
struct Fourier {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fourier {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Roll by `n/2` in both axes (its own inverse for even `n`).
    fn shift(&self, data: &mut [Complex64]) {
        let n = self.n;
        let h = n / 2;
        for r in 0..h {
            for c in 0..n {
                data.swap(r * n + c, (r + h) * n + (c + h) % n);
            }
        }
    }

    fn apply(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let fft = if inverse { &self.inverse } else { &self.forward };
        self.shift(data);
        fft.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            fft.process(&mut col);
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
        self.shift(data);
        let scale = 1.0 / n as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }
}

/// Evaluates fields, cost and gradient for one state geometry.
pub struct Simulator {
    m: usize,
    fourier: Fourier,
    illumination: Vec<f64>,
}

impl Simulator {
    pub fn new(m: usize, illumination: Vec<f64>) -> Result<Self> {
        if illumination.len() != m * m {
            return Err(invalid(format!(
                "illumination has {} values, expected {}",
                illumination.len(),
                m * m
            )));
        }
        if illumination.iter().any(|a| !(*a >= 0.0)) {
            return Err(invalid("illumination must be non-negative"));
        }
        Ok(Self {
            m,
            fourier: Fourier::new(2 * m),
            illumination,
        })
    }

    fn embed(&self, phase: &[f64]) -> Vec<Complex64> {
        let m = self.m;
        let n = 2 * m;
        let off = m / 2;
        let mut plane = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..m {
            for c in 0..m {
                let k = r * m + c;
                plane[(r + off) * n + c + off] = Complex64::from_polar(self.illumination[k], phase[k]);
            }
        }
        plane
    }

    pub fn propagate(&self, phase: &[f64]) -> Result<OutputField> {
        if phase.len() != self.m * self.m {
            return Err(invalid("phase does not match the modulator size"));
        }
        let mut field = self.embed(phase);
        self.fourier.apply(&mut field, false);
        let power = field.iter().map(|z| z.norm_sqr()).sum();
        Ok(OutputField {
            n: 2 * self.m,
            field,
            power,
        })
    }

    fn overlap(state: &HologramState, field: &[Complex64]) -> Result<(f64, f64)> {
        let sr = state.signal_region.pixels();
        let power: f64 = sr.iter().map(|&i| field[i].norm_sqr()).sum();
        if !(power > 0.0) {
            return Err(Error::Numerical("no power in the signal region".into()));
        }
        let raw: f64 = sr
            .iter()
            .zip(&state.target_amplitude)
            .map(|(&i, a)| a * field[i].norm())
            .sum();
        Ok((raw / power.sqrt(), power))
    }

    pub fn cost(&self, state: &HologramState) -> Result<f64> {
        let out = self.propagate(&state.phase)?;
        let (o, _) = Self::overlap(state, &out.field)?;
        Ok(steepness(state) * (1.0 - o).powi(2))
    }

    /// Cost and its gradient with respect to every phase pixel.
    pub fn cost_and_gradient(&self, state: &HologramState) -> Result<(f64, Vec<f64>)> {
        let m = self.m;
        let n = 2 * m;
        let x = self.embed(&state.phase);
        let mut e = x.clone();
        self.fourier.apply(&mut e, false);
        let (o, power) = Self::overlap(state, &e)?;
        let k = steepness(state);
        let cost = k * (1.0 - o).powi(2);

        // ∂O/∂E* on the SR, zero elsewhere.
        let root = power.sqrt();
        let mut g = vec![Complex64::new(0.0, 0.0); n * n];
        for (&i, a) in state.signal_region.pixels().iter().zip(&state.target_amplitude) {
            let z = e[i];
            let mag = z.norm();
            let unit = if mag > 0.0 { z / mag } else { Complex64::new(0.0, 0.0) };
            g[i] = (*a * unit - o * z / root) / (2.0 * root);
        }
        // Adjoint of the unitary transform is its inverse.
        self.fourier.apply(&mut g, true);
        let dc_do = -2.0 * k * (1.0 - o);
        let off = m / 2;
        let mut grad = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..m {
                let p = (r + off) * n + c + off;
                let d_o = -2.0 * (x[p] * g[p].conj()).im;
                grad[r * m + c] = dc_do * d_o;
            }
        }
        Ok((cost, grad))
    }
}

fn steepness(state: &HologramState) -> f64 {
    10f64.powi(state.steepness_d)
}

pub fn propagate(state: &HologramState, illumination: &[f64]) -> Result<OutputField> {
    Simulator::new(state.m, illumination.to_vec())?.propagate(&state.phase)
}

pub fn cost_and_gradient(state: &HologramState, illumination: &[f64]) -> Result<(f64, Vec<f64>)> {
    Simulator::new(state.m, illumination.to_vec())?.cost_and_gradient(state)
}

/// Fraction of the output power landing in the SR.
pub fn sr_power_fraction(state: &HologramState, field: &OutputField) -> f64 {
    let sr: f64 = state.signal_region.pixels().iter().map(|&i| field.field[i].norm_sqr()).sum();
    sr / field.power
}

/// `‖Ĩ - T̃‖ / ‖T̃‖` with both intensities normalised to unit sum on the SR.
pub fn sr_intensity_error(state: &HologramState, field: &OutputField) -> f64 {
    let sr = state.signal_region.pixels();
    let got: Vec<f64> = sr.iter().map(|&i| field.field[i].norm_sqr()).collect();
    let total: f64 = got.iter().sum();
    let want_total: f64 = state.target_amplitude.iter().map(|a| a * a).sum();
    let mut num = 0.0;
    let mut den = 0.0;
    for (g, a) in got.iter().zip(&state.target_amplitude) {
        let t = a * a / want_total;
        num += (g / total - t).powi(2);
        den += t * t;
    }
    (num / den).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOutcome {
    pub state: HologramState,
    /// Cost before the first step and after every accepted step.
    pub history: Vec<f64>,
    /// Set when the line search could not decrease the cost even along the
    /// steepest descent direction; `state` is then the best point found.
    pub line_search_failed: bool,
}

const ARMIJO: f64 = 1e-4;
/// Largest phase change (radians) allowed by a trial step.
const MAX_TRIAL_STEP: f64 = 0.5;

/// Polak–Ribière conjugate gradient with Armijo backtracking. With
/// `seed = Some(_)` the phase is first reset to uniform random values.
pub fn optimize_phase(
    state: &HologramState,
    illumination: &[f64],
    max_iters: usize,
    seed: Option<u64>,
) -> Result<OptimizeOutcome> {
    if max_iters == 0 {
        return Err(invalid("max_iters must be at least 1"));
    }
    let sim = Simulator::new(state.m, illumination.to_vec())?;
    let mut state = state.clone();
    if let Some(seed) = seed {
        state.randomize_phase(seed);
    }
    let (mut cost, mut grad) = sim.cost_and_gradient(&state)?;
    let mut history = vec![cost];
    let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut alpha_hint: Option<f64> = None;
    let mut line_search_failed = false;

    for _ in 0..max_iters {
        if cost == 0.0 || grad.iter().all(|g| *g == 0.0) {
            break;
        }
        let mut slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if !(slope < 0.0) {
            dir = grad.iter().map(|g| -g).collect();
            slope = -grad.iter().map(|g| g * g).sum::<f64>();
        }
        let accepted = match line_search(&sim, &state, &dir, cost, slope, alpha_hint)? {
            Some(step) => Some(step),
            None => {
                // Retry once along steepest descent.
                dir = grad.iter().map(|g| -g).collect();
                slope = -grad.iter().map(|g| g * g).sum::<f64>();
                line_search(&sim, &state, &dir, cost, slope, None)?
            }
        };
        let Some((alpha, trial)) = accepted else {
            line_search_failed = true;
            break;
        };
        alpha_hint = Some(alpha);
        let (new_cost, new_grad) = sim.cost_and_gradient(&trial)?;
        let num: f64 = new_grad.iter().zip(&grad).map(|(a, b)| a * (a - b)).sum();
        let den: f64 = grad.iter().map(|g| g * g).sum();
        let beta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
        dir = new_grad.iter().zip(&dir).map(|(g, d)| -g + beta * d).collect();
        state = trial;
        cost = new_cost;
        grad = new_grad;
        history.push(cost);
    }
    Ok(OptimizeOutcome {
        state,
        history,
        line_search_failed,
    })
}

fn line_search(
    sim: &Simulator,
    state: &HologramState,
    dir: &[f64],
    cost: f64,
    slope: f64,
    hint: Option<f64>,
) -> Result<Option<(f64, HologramState)>> {
    let dmax = dir.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    if dmax == 0.0 {
        return Ok(None);
    }
    let cap = MAX_TRIAL_STEP / dmax;
    let mut alpha = hint.map_or(cap, |h| (2.0 * h).min(cap));
    let mut trial = state.clone();
    for _ in 0..60 {
        for ((t, p), d) in trial.phase.iter_mut().zip(&state.phase).zip(dir) {
            *t = (p + alpha * d).rem_euclid(TAU);
        }
        let c = sim.cost(&trial)?;
        if c <= cost + ARMIJO * alpha * slope && c < cost {
            return Ok(Some((alpha, trial)));
        }
        alpha *= 0.5;
    }
    Ok(None)
}

/// Recovers the potential seen along the SR row: inverts the affine map of
/// [`potential_to_target`], interpolates onto a grid of the given spacing and
/// pads the region outside the window with the ceiling out to
/// `window + margin`.
pub fn extract_profile(field: &OutputField, state: &HologramState, spacing: f64, margin: f64) -> Result<PotentialGrid> {
    let (row, start, len) = state
        .signal_region
        .as_row()
        .ok_or_else(|| invalid("signal region is not a single row segment"))?;
    let map = state
        .map
        .ok_or_else(|| invalid("state carries no potential mapping"))?;
    if map.pixels != len {
        return Err(invalid("mapping does not match the SR length"));
    }
    let readout = SrReadout { row, start, map };
    extract_from_intensity(&field.intensity(), field.n, &readout, spacing, margin)
}

/// Where the SR sits in the output plane and how its intensities map back to
/// a potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrReadout {
    pub row: usize,
    pub start: usize,
    pub map: ProfileMap,
}

impl SrReadout {
    pub fn of(state: &HologramState) -> Option<Self> {
        let (row, start, len) = state.signal_region.as_row()?;
        let map = state.map?;
        (map.pixels == len).then_some(Self { row, start, map })
    }
}

/// [`extract_profile`] from a row-major `n × n` intensity matrix.
pub fn extract_from_intensity(
    intensity: &[f64],
    n: usize,
    readout: &SrReadout,
    spacing: f64,
    margin: f64,
) -> Result<PotentialGrid> {
    let SrReadout { row, start, map } = *readout;
    if intensity.len() != n * n || row >= n || start + map.pixels > n {
        return Err(invalid("signal region lies outside the intensity matrix"));
    }
    let sr = &intensity[row * n + start..row * n + start + map.pixels];
    let total: f64 = sr.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("no power in the signal region".into()));
    }
    let v: Vec<f64> = sr.iter().map(|i| map.ceiling - map.scale * i / total).collect();
    resample_profile(&v, &map, spacing, margin)
}

/// Pixel-centre samples back onto a symmetric grid, ceiling outside the
/// window.
pub fn resample_profile(values: &[f64], map: &ProfileMap, spacing: f64, margin: f64) -> Result<PotentialGrid> {
    if !(margin >= 0.0) {
        return Err(invalid("margin must be non-negative"));
    }
    let half = map.x_max.max(-map.x_min) + margin;
    let grid = Grid::with_spacing(half, spacing)?;
    let spline = UniformSpline::new(map.pixel_x(0), map.pixel_width(), values.to_vec());
    let v = (0..grid.points())
        .map(|i| {
            let x = grid.x(i);
            if x < map.x_min || x > map.x_max {
                map.ceiling
            } else {
                spline.eval(x)
            }
        })
        .collect();
    PotentialGrid::new(grid, v, map.ceiling)
}
