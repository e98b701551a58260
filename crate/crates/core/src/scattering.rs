//! One-dimensional transmission through truncated potentials and the
//! lucky-prime resonance filter built from two of them in series.
//!
//! Cells are slabs of constant potential centred on the grid nodes. The
//! state `(ψ, ψ')` is carried across a slab of width `h` by
//!
//! ```text
//! [ cos kh      sin(kh)/k ]      k² = (E - V) / s²
//! [ -k sin kh   cos kh    ]
//! ```
//!
//! which has unit determinant for any complex `k`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, PotentialGrid};

/// Peak transmission needed to report a resonance.
pub const RESONANCE_THRESHOLD: f64 = 0.5;
/// Default lucky-prime decision threshold.
pub const FILTER_THRESHOLD: f64 = 0.5;
/// Half width of the window searched around a candidate integer.
pub const FILTER_WINDOW: f64 = 0.5;
pub const DEFAULT_SEPARATION: f64 = 2.0;

const RENORM: f64 = 1e100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncated {
    /// Capped values on the original grid; `asymptote` is the lead level.
    pub potential: PotentialGrid,
    pub cutoff: f64,
    /// Old asymptote minus new asymptote.
    pub shift: f64,
}

/// Caps `potential` at `cutoff`; beyond the grid ends the potential drops to
/// a free lead at zero energy. Outside the outermost crossing of the cutoff
/// the capped potential is a plateau at `cutoff` up to the grid end, so the
/// grid extent (see [`window`]) sets the barrier thickness.
pub fn truncate_potential(potential: &PotentialGrid, cutoff: f64) -> Result<Truncated> {
    truncate_with_lead(potential, cutoff, 0.0)
}

pub fn truncate_with_lead(potential: &PotentialGrid, cutoff: f64, lead: f64) -> Result<Truncated> {
    if !(cutoff > potential.min()) {
        return Err(invalid(format!(
            "cutoff {cutoff} is not above the potential minimum {}",
            potential.min()
        )));
    }
    if !(lead < cutoff) {
        return Err(invalid("lead level must lie below the cutoff"));
    }
    let values = potential.values.iter().map(|&x| x.min(cutoff)).collect();
    Ok(Truncated {
        potential: PotentialGrid::new(potential.grid, values, lead)?,
        cutoff,
        shift: potential.asymptote - lead,
    })
}

/// Potential restricted to `|x| <= half_width` (same spacing).
pub fn window(potential: &PotentialGrid, half_width: f64) -> Result<PotentialGrid> {
    let g = potential.grid;
    let keep = (half_width / g.spacing()).round() as usize;
    if keep == 0 || keep > g.center() {
        return Err(invalid(format!("window half width {half_width} outside the grid")));
    }
    let c = g.center();
    let grid = Grid::new(keep as f64 * g.spacing(), 2 * keep + 1)?;
    PotentialGrid::new(grid, potential.values[c - keep..=c + keep].to_vec(), potential.asymptote)
}

/// How the potential between nodes is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Propagator {
    /// Constant slabs of width `h` centred on the nodes; exact for step
    /// potentials sampled at slab centres.
    Slab,
    /// Fourth-order Magnus steps between neighbouring nodes, with the
    /// potential at the two Gauss points from cubic interpolation.
    #[default]
    Magnus,
}

/// Energy-independent cell data: potential at two points per cell.
struct Cells {
    lower: Vec<f64>,
    upper: Vec<f64>,
    h: f64,
    /// Commutator weight; zero for slabs.
    commutator: f64,
}

impl Cells {
    fn new(potential: &PotentialGrid, propagator: Propagator) -> Self {
        let h = potential.spacing();
        let v = &potential.values;
        match propagator {
            Propagator::Slab => Self {
                lower: v.clone(),
                upper: v.clone(),
                h,
                commutator: 0.0,
            },
            Propagator::Magnus => {
                let g = 0.5 - 0.5 / 3f64.sqrt();
                let n = v.len();
                let at = |i: isize| v[i.clamp(0, n as isize - 1) as usize];
                let interp = |i: usize, t: f64| {
                    let i = i as isize;
                    let (a, b, c, d) = (at(i - 1), at(i), at(i + 1), at(i + 2));
                    -t * (t - 1.0) * (t - 2.0) / 6.0 * a + (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0 * b
                        - (t + 1.0) * t * (t - 2.0) / 2.0 * c
                        + (t + 1.0) * t * (t - 1.0) / 6.0 * d
                };
                Self {
                    lower: (0..n - 1).map(|i| interp(i, g)).collect(),
                    upper: (0..n - 1).map(|i| interp(i, 1.0 - g)).collect(),
                    h,
                    commutator: 3f64.sqrt() * h * h / 12.0,
                }
            }
        }
    }

    /// `exp(Ω) = C I + S Ω` with `Ω = [[a, h], [h q̄, -a]]` for cell `i`.
    fn step(&self, i: usize, energy: Complex64, s2: f64) -> (Complex64, Complex64, Complex64, Complex64) {
        let q1 = (self.lower[i] - energy) / s2;
        let q2 = (self.upper[i] - energy) / s2;
        let qbar = 0.5 * (q1 + q2);
        let a = self.commutator * (q1 - q2);
        let (c, sh) = cosh_sinhc(a * a + self.h * self.h * qbar);
        (c, sh, a, qbar)
    }
}

/// `(cosh √z, sinh √z / √z)` as entire functions of `z`.
fn cosh_sinhc(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 1e-6 {
        return (1.0 + z / 2.0 + z * z / 24.0, 1.0 + z / 6.0 + z * z / 120.0);
    }
    let m = z.sqrt();
    (m.cosh(), m.sinh() / m)
}

/// Incoming and reflected amplitudes for unit outgoing amplitude, with the
/// common factor `exp(log_scale)` kept apart.
#[derive(Debug, Clone, Copy)]
struct Amplitudes {
    incoming: Complex64,
    reflected: Complex64,
    log_scale: f64,
}

fn amplitudes(cells: &Cells, lead: f64, energy: Complex64, s: f64) -> Amplitudes {
    let s2 = s * s;
    let q = ((energy - lead) / s2).sqrt();
    let mut psi = Complex64::new(1.0, 0.0);
    let mut dpsi = Complex64::i() * q;
    let mut log_scale = 0.0;
    let h = cells.h;
    for i in (0..cells.lower.len()).rev() {
        let (c, sh, a, qbar) = cells.step(i, energy, s2);
        // exp(-Ω) = C I - S Ω.
        let p = (c - sh * a) * psi - sh * h * dpsi;
        let d = -sh * h * qbar * psi + (c + sh * a) * dpsi;
        psi = p;
        dpsi = d;
        let norm = psi.norm().max(dpsi.norm());
        if norm > RENORM {
            psi /= norm;
            dpsi /= norm;
            log_scale += norm.ln();
        }
    }
    let ratio = dpsi / (Complex64::i() * q);
    Amplitudes {
        incoming: 0.5 * (psi + ratio),
        reflected: 0.5 * (psi - ratio),
        log_scale,
    }
}

/// Product of the forward cell matrices at one energy, rescaled to unit
/// maximum entry whenever it grows large; the determinant of the unscaled
/// product is one.
pub fn transfer_matrix(
    potential: &PotentialGrid,
    energy: f64,
    kinetic_scale: f64,
    propagator: Propagator,
) -> ([[Complex64; 2]; 2], f64) {
    let cells = Cells::new(potential, propagator);
    let s2 = kinetic_scale * kinetic_scale;
    let e = Complex64::new(energy, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut m = [[one, zero], [zero, one]];
    let mut log_scale = 0.0;
    let h = cells.h;
    for i in 0..cells.lower.len() {
        let (c, sh, a, qbar) = cells.step(i, e, s2);
        let cell = [[c + sh * a, sh * h], [sh * h * qbar, c - sh * a]];
        let mut next = [[zero; 2]; 2];
        for r in 0..2 {
            for k in 0..2 {
                next[r][k] = cell[r][0] * m[0][k] + cell[r][1] * m[1][k];
            }
        }
        let norm = next.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        if norm > RENORM {
            for z in next.iter_mut().flatten() {
                *z /= norm;
            }
            log_scale += norm.ln();
        }
        m = next;
    }
    (m, log_scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub t: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub energy: f64,
    pub peak: f64,
    /// Full width from the complex pole.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionScan {
    pub energies: Vec<f64>,
    #[serde(rename = "T")]
    pub t_values: Vec<f64>,
    #[serde(rename = "R")]
    pub r_values: Vec<f64>,
    pub resonances: Vec<Resonance>,
}

/// A potential prepared for repeated transmission evaluations.
pub struct Scatterer {
    cells: Cells,
    lead: f64,
    s: f64,
}

impl Scatterer {
    pub fn new(potential: &PotentialGrid, kinetic_scale: f64, propagator: Propagator) -> Result<Self> {
        if !(kinetic_scale > 0.0) {
            return Err(invalid("kinetic scale must be positive"));
        }
        Ok(Self {
            cells: Cells::new(potential, propagator),
            lead: potential.asymptote,
            s: kinetic_scale,
        })
    }

    fn amp(&self, energy: f64) -> Amplitudes {
        amplitudes(&self.cells, self.lead, Complex64::new(energy, 0.0), self.s)
    }

    pub fn transmission(&self, energy: f64) -> Result<Transmission> {
        if !(energy > self.lead) || !energy.is_finite() {
            return Err(invalid(format!("energy {energy} is not above the lead level {}", self.lead)));
        }
        let a = self.amp(energy);
        let t = (-2.0 * a.log_scale).exp() / a.incoming.norm_sqr();
        let r = (a.reflected / a.incoming).norm_sqr();
        if !t.is_finite() || !r.is_finite() {
            return Err(Error::Numerical(format!("transfer matrix overflow at E = {energy}")));
        }
        Ok(Transmission { t, r })
    }

    /// `T` in the flux form `1 / (1 + |B|² e^{2Λ})`, bounded by one and
    /// better conditioned than `1/|A|²` on very narrow peaks.
    fn t(&self, energy: f64) -> f64 {
        let a = self.amp(energy);
        let x = a.reflected.norm_sqr() * (2.0 * a.log_scale).exp();
        if x.is_finite() {
            1.0 / (1.0 + x)
        } else {
            0.0
        }
    }

    /// `ln |A(E)|`, incoming amplitude at unit outgoing amplitude.
    fn log_incoming(&self, energy: f64) -> f64 {
        let a = self.amp(energy);
        a.log_scale + a.incoming.norm().ln()
    }

    /// Secant iteration on the analytic incoming amplitude, sampled on the
    /// real axis, divided by `(E - p)` for each already known pole `p`.
    /// Returns the complex pole.
    fn refine_pole(&self, e0: f64, e1: f64, lo: f64, hi: f64, known: &[Complex64]) -> Option<Complex64> {
        let value = |e: f64| {
            let a = self.amp(e);
            let mut z = a.incoming;
            for p in known {
                z /= Complex64::new(e, 0.0) - p;
            }
            (z, a.log_scale)
        };
        let (mut xa, mut xb) = (e0, e1);
        let (mut a, mut la) = value(xa);
        let (mut b, mut lb) = value(xb);
        let mut pole = None;
        for _ in 0..80 {
            let ratio = a / b * (la - lb).exp();
            let denom = Complex64::new(1.0, 0.0) - ratio;
            if denom.norm() == 0.0 || !denom.is_finite() {
                break;
            }
            let z = xb - (xb - xa) / denom;
            if !z.is_finite() {
                break;
            }
            pole = Some(z);
            let next = z.re.clamp(lo, hi);
            if (next - xb).abs() <= 1e-15 * next.abs().max(1.0) {
                break;
            }
            xa = xb;
            a = b;
            la = lb;
            xb = next;
            (b, lb) = value(xb);
        }
        pole
    }

    /// Transmission maxima on `[lo, hi]`. Dips of `ln|A|` on a uniform sample
    /// seed the pole search; up to two poles are extracted per dip so that
    /// nearly coincident resonances are both seen.
    pub fn peaks(&self, lo: f64, hi: f64, samples: usize) -> Vec<Resonance> {
        let samples = samples.max(3);
        let step = (hi - lo) / (samples - 1) as f64;
        let es: Vec<f64> = (0..samples).map(|i| lo + step * i as f64).collect();
        let la: Vec<f64> = es.iter().map(|&e| self.log_incoming(e)).collect();
        let mut out: Vec<Resonance> = Vec::new();
        for i in 0..samples {
            let left = if i > 0 { la[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < samples { la[i + 1] } else { f64::INFINITY };
            if !(la[i] <= left && la[i] < right) {
                continue;
            }
            let a = (es[i] - step).max(lo);
            let b = (es[i] + step).min(hi);
            let mut known: Vec<Complex64> = Vec::new();
            for _ in 0..2 {
                let Some(pole) = self.refine_pole(es[i], es[i] + 0.25 * step, a, b, &known) else {
                    break;
                };
                known.push(pole);
                if pole.re < a || pole.re > b {
                    continue;
                }
                let width = (-2.0 * pole.im).abs();
                let (energy, peak) = golden_max(|x| self.t(x), pole.re, width, a, b);
                if out.iter().any(|r| (r.energy - energy).abs() <= 1e-12 * energy.abs().max(1.0)) {
                    continue;
                }
                out.push(Resonance { energy, peak, width });
            }
        }
        out.sort_by(|x, y| x.energy.total_cmp(&y.energy));
        out
    }
}

/// Transmission and reflection probabilities at one energy; the leads sit at
/// `potential.asymptote` on both sides.
pub fn transmission(potential: &PotentialGrid, energy: f64, kinetic_scale: f64, propagator: Propagator) -> Result<Transmission> {
    Scatterer::new(potential, kinetic_scale, propagator)?.transmission(energy)
}

/// Golden-section polish of a peak located near `centre` with the given width.
fn golden_max(f: impl Fn(f64) -> f64, centre: f64, width: f64, lo: f64, hi: f64) -> (f64, f64) {
    let half = width.max(1e-13 * centre.abs().max(1.0)) * 2.0;
    let (mut a, mut b) = ((centre - half).max(lo), (centre + half).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if (b - a) <= 1e-15 * centre.abs().max(1.0) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let fm = f(centre);
    let best = if fc > fd { (c, fc) } else { (d, fd) };
    if fm >= best.1 {
        (centre, fm)
    } else {
        best
    }
}

/// Transmission on the given energies plus the maxima between the first
/// and last of them whose peak reaches [`RESONANCE_THRESHOLD`].
pub fn transmission_scan(
    potential: &PotentialGrid,
    energies: &[f64],
    kinetic_scale: f64,
    propagator: Propagator,
) -> Result<TransmissionScan> {
    if energies.is_empty() {
        return Err(invalid("no energies to scan"));
    }
    if energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("scan energies must be strictly ascending"));
    }
    let sc = Scatterer::new(potential, kinetic_scale, propagator)?;
    let mut t_values = Vec::with_capacity(energies.len());
    let mut r_values = Vec::with_capacity(energies.len());
    for &e in energies {
        let tr = sc.transmission(e)?;
        t_values.push(tr.t);
        r_values.push(tr.r);
    }
    let resonances = if energies.len() >= 3 {
        sc.peaks(energies[0], energies[energies.len() - 1], energies.len())
            .into_iter()
            .filter(|r| r.peak >= RESONANCE_THRESHOLD)
            .collect()
    } else {
        Vec::new()
    };
    Ok(TransmissionScan {
        energies: energies.to_vec(),
        t_values,
        r_values,
        resonances,
    })
}

/// `A`, a flat lead section of length `separation`, then `B`, on one grid.
pub fn compose_apparatus(a: &PotentialGrid, b: &PotentialGrid, separation: f64) -> Result<PotentialGrid> {
    if (a.asymptote - b.asymptote).abs() > 1e-9 {
        return Err(invalid(format!(
            "asymptote mismatch: {} vs {}",
            a.asymptote, b.asymptote
        )));
    }
    if !(separation >= 0.0) {
        return Err(invalid("separation must be non-negative"));
    }
    let h = a.spacing();
    if (b.spacing() - h).abs() > 1e-12 * h {
        return Err(invalid(format!("spacing mismatch: {h} vs {}", b.spacing())));
    }
    let lead = a.asymptote;
    let gap = (separation / h).round() as usize;
    let mut values: Vec<f64> = Vec::with_capacity(a.values.len() + gap + b.values.len() + 1);
    values.extend_from_slice(&a.values);
    values.extend(std::iter::repeat_n(lead, gap));
    values.extend_from_slice(&b.values);
    if values.len().is_multiple_of(2) {
        values.push(lead);
    }
    let half = (values.len() - 1) as f64 * h / 2.0;
    PotentialGrid::new(Grid::new(half, values.len())?, values, lead)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub w: u64,
    pub pass: bool,
    pub peak_energy: f64,
    pub peak_t: f64,
}

/// True iff the transmission of `apparatus` exceeds `threshold` somewhere in
/// `w ± 0.5`.
pub fn lucky_prime_test(w: u64, apparatus: &PotentialGrid, kinetic_scale: f64, threshold: f64) -> Result<bool> {
    let sc = Scatterer::new(apparatus, kinetic_scale, Propagator::Magnus)?;
    Ok(filter_probe(w, &sc, threshold, f64::INFINITY)?.pass)
}

/// As [`lucky_prime_test`], reporting the best peak found; `max_energy` is
/// the upper end of the supported range.
pub fn filter_probe(w: u64, apparatus: &Scatterer, threshold: f64, max_energy: f64) -> Result<FilterOutcome> {
    let lo = w as f64 - FILTER_WINDOW;
    let hi = w as f64 + FILTER_WINDOW;
    if !(lo > apparatus.lead) || hi > max_energy {
        return Err(invalid(format!(
            "w = {w} outside the scan range ({}, {max_energy})",
            apparatus.lead + FILTER_WINDOW
        )));
    }
    apparatus.transmission(w as f64)?;
    let mut best = (w as f64, apparatus.t(w as f64));
    for p in apparatus.peaks(lo, hi, 401) {
        if p.peak > best.1 {
            best = (p.energy, p.peak);
        }
    }
    Ok(FilterOutcome {
        w,
        pass: best.1 > threshold,
        peak_energy: best.0,
        peak_t: best.1,
    })
}

/// Parameters of the lucky-prime apparatus: a lucky-number well cut to a
/// narrow window (broad resonances), a gap, and a prime well cut to a wider
/// window (narrow resonances).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub lucky_count: usize,
    pub prime_count: usize,
    pub lucky_window: f64,
    pub prime_window: f64,
    /// Lead level on both sides and in the gap.
    pub lead: f64,
    pub separation: f64,
    /// Cutoff as a multiple of the largest target level.
    pub cutoff_factor: f64,
    pub spacing: f64,
    pub design_half_width: f64,
    pub kinetic_scale: f64,
    pub threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            lucky_count: 10,
            prime_count: 15,
            lucky_window: 2.2,
            prime_window: 3.5,
            lead: -15.0,
            separation: DEFAULT_SEPARATION,
            cutoff_factor: 1.2,
            spacing: 0.005,
            design_half_width: 12.0,
            kinetic_scale: crate::HALF_KINETIC_SCALE,
            threshold: FILTER_THRESHOLD,
        }
    }
}

pub struct Filter {
    pub config: FilterConfig,
    pub lucky: Truncated,
    pub prime: Truncated,
    pub apparatus: PotentialGrid,
    scatterer: Scatterer,
}

impl Filter {
    pub fn scatterer(&self) -> &Scatterer {
        &self.scatterer
    }
}

impl Filter {
    pub fn build(config: FilterConfig) -> Result<Self> {
        if config.lucky_count == 0 || config.prime_count == 0 {
            return Err(invalid("filter needs at least one level in each well"));
        }
        let grid = Grid::with_spacing(config.design_half_width, config.spacing)?;
        let s = config.kinetic_scale;
        let stage = |levels: Vec<f64>, half_width: f64| -> Result<Truncated> {
            let top = *levels.last().expect("non-empty");
            let v = crate::susy::design_potential(&levels, grid, s)?;
            truncate_with_lead(&window(&v, half_width)?, config.cutoff_factor * top, config.lead)
        };
        let lucky = stage(crate::sequences::first_lucky(config.lucky_count).to_f64(), config.lucky_window)?;
        let prime = stage(crate::sequences::first_primes(config.prime_count).to_f64(), config.prime_window)?;
        let apparatus = compose_apparatus(&lucky.potential, &prime.potential, config.separation)?;
        let scatterer = Scatterer::new(&apparatus, s, Propagator::Magnus)?;
        Ok(Self {
            config,
            lucky,
            prime,
            apparatus,
            scatterer,
        })
    }

    /// Highest energy covered: the lower of the two cutoffs.
    pub fn max_energy(&self) -> f64 {
        self.lucky.cutoff.min(self.prime.cutoff)
    }

    /// Integers `w` whose whole window lies inside the supported range.
    pub fn range(&self) -> std::ops::RangeInclusive<u64> {
        let lo = (self.config.lead + FILTER_WINDOW).floor() as i64 + 1;
        let hi = (self.max_energy() - FILTER_WINDOW).floor() as i64;
        (lo.max(1) as u64)..=(hi.max(0) as u64)
    }

    pub fn probe(&self, w: u64) -> Result<FilterOutcome> {
        filter_probe(w, &self.scatterer, self.config.threshold, self.max_energy())
    }

    pub fn test(&self, w: u64) -> Result<bool> {
        Ok(self.probe(w)?.pass)
    }
}
