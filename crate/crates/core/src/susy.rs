//! Exact inverse spectral design through a chain of supersymmetric partner
//! potentials.
//!
//! Kinetic energy is `-s² d²/dx²` with `s` the kinetic scale. Each chain step
//! solves the Riccati equation `s W' - W² + V_prev = Ẽ` with `W(0) = 0`
//! through the linearization `W = -s u'/u`, `u'' = (V_prev - Ẽ) u / s²`,
//! and builds the partner `V_next = 2Ẽ + 2W² - V_prev`, which carries the
//! spectrum of `V_prev` plus a new ground state at `Ẽ`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, PotentialGrid};
use crate::{HALF_KINETIC_SCALE, UNIT_KINETIC_SCALE};

/// Named kinetic conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KineticConvention {
    /// `-½ d²/dx²`; the convention under which the Pöschl-Teller family closes.
    #[default]
    Half,
    /// `-d²/dx²`.
    Unit,
}

impl KineticConvention {
    pub fn scale(self) -> f64 {
        match self {
            KineticConvention::Half => HALF_KINETIC_SCALE,
            KineticConvention::Unit => UNIT_KINETIC_SCALE,
        }
    }
}

impl std::str::FromStr for KineticConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(Self::Half),
            "unit" => Ok(Self::Unit),
            other => Err(invalid(format!("unknown kinetic convention `{other}` (half|unit)"))),
        }
    }
}

/// Target spectrum shifted so the highest level sits at zero, listed from the
/// top down: `gaps[k] = e_{N-1-k} - e_{N-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSequence {
    pub gaps: Vec<f64>,
    pub top_level: f64,
}

pub fn gaps_from_spectrum(levels: &[f64]) -> Result<GapSequence> {
    if levels.len() < 2 {
        return Err(invalid("at least two levels are needed to form a gap"));
    }
    if levels.iter().any(|l| !l.is_finite()) {
        return Err(invalid("levels must be finite"));
    }
    if let Some(w) = levels.windows(2).find(|w| w[1] <= w[0]) {
        return Err(invalid(format!(
            "levels must be strictly increasing ({} followed by {})",
            w[0], w[1]
        )));
    }
    let top_level = levels[levels.len() - 1];
    Ok(GapSequence {
        gaps: levels.iter().rev().map(|e| e - top_level).collect(),
        top_level,
    })
}

/// Odd superpotential sampled on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpotentialGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
}

const RENORMALIZE_EVERY: usize = 1000;

/// One Riccati step of the chain. Returns the superpotential and the next
/// potential, both on the grid of `prev`.
pub fn chain_step(
    prev: &PotentialGrid,
    gap: f64,
    kinetic_scale: f64,
) -> Result<(SuperpotentialGrid, PotentialGrid)> {
    chain_step_indexed(prev, gap, kinetic_scale, 1)
}

fn chain_step_indexed(
    prev: &PotentialGrid,
    gap: f64,
    kinetic_scale: f64,
    step: usize,
) -> Result<(SuperpotentialGrid, PotentialGrid)> {
    if !(kinetic_scale > 0.0) {
        return Err(invalid(format!("kinetic scale must be positive, got {kinetic_scale}")));
    }
    if gap > 0.0 || !gap.is_finite() {
        return Err(invalid(format!("chain gaps must be <= 0, got {gap}")));
    }
    if !prev.even_symmetric {
        return Err(invalid("chain step needs an even-symmetric potential"));
    }
    let grid = prev.grid;
    let c = grid.center();
    let h = grid.spacing();
    let inv_s2 = 1.0 / (kinetic_scale * kinetic_scale);
    // Half line: half[k] = V_prev(k h), k = 0..=c.
    let half: Vec<f64> = prev.values[c..].to_vec();
    let q = |v: f64| (v - gap) * inv_s2;

    let mut u = vec![0.0; c + 1];
    let mut du = vec![0.0; c + 1];
    let (mut y, mut dy) = (1.0f64, 0.0f64);
    u[0] = y;
    du[0] = dy;
    // (u, u') are rescaled together every RENORMALIZE_EVERY steps; keep the
    // factor per node so W = -s u'/u is unaffected.
    for k in 0..c {
        let v0 = half[k];
        let v1 = half[k + 1];
        let vm = midpoint_value(&half, k);
        let (q0, qm, q1) = (q(v0), q(vm), q(v1));
        let k1y = dy;
        let k1d = q0 * y;
        let k2y = dy + 0.5 * h * k1d;
        let k2d = qm * (y + 0.5 * h * k1y);
        let k3y = dy + 0.5 * h * k2d;
        let k3d = qm * (y + 0.5 * h * k2y);
        let k4y = dy + h * k3d;
        let k4d = q1 * (y + h * k3y);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        dy += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        if !(y > 0.0) {
            return Err(Error::NodeCrossing {
                step,
                gap,
                x: grid.x(c + k + 1),
            });
        }
        if (k + 1) % RENORMALIZE_EVERY == 0 {
            let scale = y.abs().max(dy.abs());
            y /= scale;
            dy /= scale;
        }
        u[k + 1] = y;
        du[k + 1] = dy;
    }
    if !y.is_finite() || !dy.is_finite() {
        return Err(Error::Numerical(format!("overflow in chain step {step}")));
    }

    let w_half: Vec<f64> = u
        .iter()
        .zip(&du)
        .map(|(&u, &du)| -kinetic_scale * du / u)
        .collect();
    let mut w = vec![0.0; grid.points()];
    for (k, &wk) in w_half.iter().enumerate() {
        w[c + k] = wk;
        w[c - k] = -wk;
    }
    w[c] = 0.0;
    let next_half: Vec<f64> = w_half
        .iter()
        .zip(&half)
        .map(|(&wk, &vk)| 2.0 * gap + 2.0 * wk * wk - vk)
        .collect();
    let next = PotentialGrid::from_half(grid, &next_half, prev.asymptote)?;
    Ok((SuperpotentialGrid { grid, values: w }, next))
}

/// Cubic interpolation of the half-line samples at `(k + ½) h`, using the
/// even extension at the left end and a one-sided stencil at the right end.
fn midpoint_value(half: &[f64], k: usize) -> f64 {
    let n = half.len();
    let at = |i: isize| -> f64 { half[i.unsigned_abs()] };
    let k = k as isize;
    if ((k + 2) as usize) < n {
        (-at(k - 1) + 9.0 * at(k) + 9.0 * at(k + 1) - at(k + 2)) / 16.0
    } else if k >= 2 {
        0.0625 * at(k - 2) - 0.3125 * at(k - 1) + 0.9375 * at(k) + 0.3125 * at(k + 1)
    } else {
        0.5 * (at(k) + at(k + 1))
    }
}

/// Pointwise residual of `s W' - W² + V_prev - Ẽ` with `W'` from a
/// fourth-order central difference (odd extension at `x = 0`). The two
/// outermost nodes on each side are reported as zero.
pub fn riccati_residual(
    prev: &PotentialGrid,
    w: &SuperpotentialGrid,
    gap: f64,
    kinetic_scale: f64,
) -> Vec<f64> {
    let n = w.values.len();
    let h = w.grid.spacing();
    let mut r = vec![0.0; n];
    for i in 2..n - 2 {
        let wv = &w.values;
        let dw = (wv[i - 2] - 8.0 * wv[i - 1] + 8.0 * wv[i + 1] - wv[i + 2]) / (12.0 * h);
        r[i] = kinetic_scale * dw - wv[i] * wv[i] + prev.values[i] - gap;
    }
    r
}

/// All potentials of the chain, `V_0 = 0` through `V_{N-1}`, without the
/// final shift by the top level.
pub fn design_chain(levels: &[f64], grid: Grid, kinetic_scale: f64) -> Result<(GapSequence, Vec<PotentialGrid>)> {
    let gaps = gaps_from_spectrum(levels)?;
    let mut chain = vec![PotentialGrid::from_fn(grid, 0.0, |_| 0.0)];
    for (k, &gap) in gaps.gaps.iter().enumerate().skip(1) {
        let prev = chain.last().expect("chain starts non-empty");
        let (_, next) = chain_step_indexed(prev, gap, kinetic_scale, k)?;
        chain.push(next);
    }
    Ok((gaps, chain))
}

/// Even potential whose spectrum is `levels`: the top level sits at the
/// continuum threshold (the asymptote) and the others are bound below it.
pub fn design_potential(levels: &[f64], grid: Grid, kinetic_scale: f64) -> Result<PotentialGrid> {
    let (gaps, chain) = design_chain(levels, grid, kinetic_scale)?;
    let last = chain.last().expect("chain starts non-empty");
    let out = last.shifted(gaps.top_level);
    debug_assert!(out.even_symmetric);
    Ok(out)
}

/// `-½ N(N+1) / cosh² x` on the grid.
pub fn poschl_teller_reference(n: u32, grid: Grid) -> PotentialGrid {
    let depth = 0.5 * (n as f64) * (n as f64 + 1.0);
    PotentialGrid::from_fn(grid, 0.0, |x| -depth / x.cosh().powi(2))
}

/// Gaps `0, -1/2, -2, ..., -N²/2` of the Pöschl-Teller family.
pub fn poschl_teller_gaps(n: u32) -> Vec<f64> {
    (0..=n).map(|k| -0.5 * (k * k) as f64).collect()
}

/// Sup-norm distance between the chain built from the Pöschl-Teller gaps
/// and the closed form, for a given kinetic scale.
pub fn poschl_teller_closure_error(n: u32, grid: Grid, kinetic_scale: f64) -> Result<f64> {
    let levels: Vec<f64> = poschl_teller_gaps(n).into_iter().rev().collect();
    let (_, chain) = design_chain(&levels, grid, kinetic_scale)?;
    let built = chain.last().expect("non-empty chain");
    let reference = poschl_teller_reference(n, grid);
    Ok(built
        .values
        .iter()
        .zip(&reference.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Kinetic scale that makes the Pöschl-Teller chain close, by golden-section
/// search of the closure error on `[0.3, 1.5]`.
pub fn calibrate_kinetic_scale(n: u32, grid: Grid) -> Result<f64> {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.3, 1.5);
    let f = |s: f64| poschl_teller_closure_error(n, grid, s).unwrap_or(f64::INFINITY);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let s = 0.5 * (a + b);
    let err = f(s);
    if err > 1e-3 {
        return Err(Error::Numerical(format!(
            "Pöschl-Teller closure error {err} at calibrated scale {s}"
        )));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{first_lucky, first_primes};

    fn grid() -> Grid {
        Grid::with_spacing(12.0, 0.005).unwrap()
    }

    fn sup(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn gaps_small() {
        let g = gaps_from_spectrum(&[2.0, 3.0, 5.0]).unwrap();
        assert_eq!(g.gaps, vec![0.0, -2.0, -3.0]);
        assert_eq!(g.top_level, 5.0);
    }

    #[test]
    fn gaps_first_ten_primes() {
        let g = gaps_from_spectrum(&first_primes(10).to_f64()).unwrap();
        assert_eq!(
            g.gaps,
            vec![0.0, -6.0, -10.0, -12.0, -16.0, -18.0, -22.0, -24.0, -26.0, -27.0]
        );
        assert_eq!(g.top_level, 29.0);
    }

    #[test]
    fn gaps_reject_bad_levels() {
        assert!(gaps_from_spectrum(&[3.0, 3.0]).is_err());
        assert!(gaps_from_spectrum(&[4.0, 3.0]).is_err());
        assert!(gaps_from_spectrum(&[4.0]).is_err());
    }

    #[test]
    fn zero_gap_on_flat_potential_is_trivial() {
        let g = Grid::with_spacing(5.0, 0.01).unwrap();
        let zero = PotentialGrid::from_fn(g, 0.0, |_| 0.0);
        let (w, next) = chain_step(&zero, 0.0, HALF_KINETIC_SCALE).unwrap();
        assert!(w.values.iter().all(|&v| v == 0.0));
        assert!(next.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_gives_poschl_teller_one() {
        let g = grid();
        let zero = PotentialGrid::from_fn(g, 0.0, |_| 0.0);
        let (w, next) = chain_step(&zero, -0.5, HALF_KINETIC_SCALE).unwrap();
        let pt = poschl_teller_reference(1, g);
        assert!(sup(&next.values, &pt.values) < 1e-6);
        // Closed form: W = -tanh(x)/√2.
        for (i, &wv) in w.values.iter().enumerate() {
            let x = g.x(i);
            assert!((wv + x.tanh() * HALF_KINETIC_SCALE).abs() < 1e-8);
        }
    }

    #[test]
    fn superpotential_is_odd_and_vanishes_at_origin() {
        let g = Grid::with_spacing(8.0, 0.01).unwrap();
        let zero = PotentialGrid::from_fn(g, 0.0, |_| 0.0);
        let (w, _) = chain_step(&zero, -3.0, HALF_KINETIC_SCALE).unwrap();
        assert_eq!(w.values[g.center()], 0.0);
        for i in 0..g.points() {
            assert_eq!(w.values[i], -w.values[g.mirror(i)]);
        }
    }

    #[test]
    fn riccati_residual_is_second_order_small() {
        let g = grid();
        let h = g.spacing();
        let zero = PotentialGrid::from_fn(g, 0.0, |_| 0.0);
        let (w, next) = chain_step(&zero, -0.5, HALF_KINETIC_SCALE).unwrap();
        let r = riccati_residual(&zero, &w, -0.5, HALF_KINETIC_SCALE);
        assert!(r.iter().all(|v| v.abs() <= 10.0 * h * h));
        let (w2, _) = chain_step(&next, -2.0, HALF_KINETIC_SCALE).unwrap();
        let r2 = riccati_residual(&next, &w2, -2.0, HALF_KINETIC_SCALE);
        assert!(r2.iter().all(|v| v.abs() <= 10.0 * h * h));
    }

    #[test]
    fn gap_above_ground_state_is_rejected() {
        let g = Grid::with_spacing(8.0, 0.01).unwrap();
        let pt = poschl_teller_reference(1, g);
        // Ground state of -1/cosh² (half convention) is -1/2.
        match chain_step(&pt, -0.2, HALF_KINETIC_SCALE) {
            Err(Error::NodeCrossing { .. }) => {}
            other => panic!("expected node crossing, got {other:?}"),
        }
    }

    #[test]
    fn poschl_teller_references() {
        let g = Grid::new(3.0, 7).unwrap();
        assert!(poschl_teller_reference(0, g).values.iter().all(|&v| v == 0.0));
        let p1 = poschl_teller_reference(1, g);
        let p2 = poschl_teller_reference(2, g);
        for i in 0..7 {
            let x = g.x(i);
            assert!((p1.values[i] + 1.0 / x.cosh().powi(2)).abs() < 1e-15);
            assert!((p2.values[i] + 3.0 / x.cosh().powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn poschl_teller_closure() {
        for n in 1..=4 {
            let err = poschl_teller_closure_error(n, grid(), HALF_KINETIC_SCALE).unwrap();
            assert!(err < 1e-3, "N={n}: {err}");
        }
    }

    #[test]
    fn calibration_recovers_half_convention() {
        let g = Grid::with_spacing(10.0, 0.01).unwrap();
        let s = calibrate_kinetic_scale(2, g).unwrap();
        assert!((s - HALF_KINETIC_SCALE).abs() < 1e-3, "{s}");
    }

    #[test]
    fn intermediate_potentials_are_exactly_even() {
        let (_, chain) = design_chain(&first_primes(6).to_f64(), grid(), HALF_KINETIC_SCALE).unwrap();
        for v in &chain {
            assert!(v.even_symmetric);
            assert_eq!(v.max_asymmetry(), 0.0);
        }
    }

    #[test]
    fn designed_potential_tends_to_top_level() {
        let v = design_potential(&first_lucky(10).to_f64(), grid(), HALF_KINETIC_SCALE).unwrap();
        assert_eq!(v.asymptote, 33.0);
        assert!((v.values[0] - 33.0).abs() < 1e-6);
        assert!(v.even_symmetric);
    }

    #[test]
    fn twenty_integer_gaps_give_oscillating_potential() {
        let levels: Vec<f64> = (1..=21).map(|k| k as f64).collect();
        let v = design_potential(&levels, grid(), HALF_KINETIC_SCALE).unwrap();
        let c = v.grid.center();
        let right = &v.values[c..];
        let turns = right
            .windows(3)
            .filter(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0)
            .count();
        assert!(turns >= 2, "expected a non-monotonic profile, found {turns} turning points");
    }

    #[test]
    fn kinetic_convention_parsing() {
        assert_eq!("half".parse::<KineticConvention>().unwrap(), KineticConvention::Half);
        assert_eq!("unit".parse::<KineticConvention>().unwrap().scale(), 1.0);
        assert!("other".parse::<KineticConvention>().is_err());
    }

    mod props {
        use super::*;
        use crate::eigensolver::bound_states;
        use proptest::prelude::*;

        fn level_sets() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(1.0f64..3.0, 2..5).prop_map(|steps| {
                steps
                    .iter()
                    .scan(0.5, |acc, s| {
                        *acc += s;
                        Some((*acc * 4.0).round() / 4.0)
                    })
                    .collect()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn chain_is_even_and_holds_one_more_level_per_step(levels in level_sets()) {
                let grid = Grid::with_spacing(10.0, 0.01).unwrap();
                let (_, chain) = design_chain(&levels, grid, crate::HALF_KINETIC_SCALE).unwrap();
                for v in &chain {
                    prop_assert_eq!(v.max_asymmetry(), 0.0);
                }
                let v = design_potential(&levels, grid, crate::HALF_KINETIC_SCALE).unwrap();
                let s = bound_states(&v, crate::HALF_KINETIC_SCALE, None).unwrap();
                prop_assert_eq!(s.levels().len(), levels.len());
                for (e, t) in s.levels().iter().zip(&levels) {
                    prop_assert!((e - t).abs() < 0.05, "{} vs {}", e, t);
                }
            }
        }
    }
}
