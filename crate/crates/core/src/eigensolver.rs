//! Bound states of a sampled 1D potential from the three-point
//! finite-difference Hamiltonian `-s² D₂ + V` with Dirichlet box ends.
//!
//! Eigenvalues come from Sturm-sequence bisection of the symmetric
//! tridiagonal matrix and eigenvectors from inverse iteration, so only the
//! handful of states below the continuum edge is ever computed.
//!
//! A potential built by the supersymmetric chain carries its top level at the
//! continuum threshold as a zero-energy resonance. Such a level is reported
//! separately in [`Spectrum::threshold`] when the zero-energy solution is
//! flat at the box end, with the energy of the matching box state.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::PotentialGrid;

/// Largest `spacing² · (max V - min V) / s²` accepted.
pub const RESOLUTION_LIMIT: f64 = 0.1;

/// Relative sign-change dead band for node counting.
const NODE_DEAD_BAND: f64 = 1e-8;

/// Box-end flatness `L |u'/u|` below which the zero-energy solution counts
/// as a threshold state.
pub const THRESHOLD_FLATNESS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdLevel {
    /// Energy of the box state that continues the threshold resonance.
    pub energy: f64,
    /// `true` for an even state.
    pub even: bool,
    /// `L |u'/u|` of the zero-energy solution at the box end.
    pub flatness: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    /// Strictly bound eigenvalues, ascending, all below `continuum_edge - margin`.
    pub eigenvalues: Vec<f64>,
    pub continuum_edge: f64,
    pub kinetic_scale: f64,
    pub node_counts: Vec<usize>,
    pub threshold: Option<ThresholdLevel>,
    /// Eigenvectors normalized under `Σ ψ² h = 1`.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
}

impl Spectrum {
    /// Bound eigenvalues followed by the threshold level, if any.
    pub fn levels(&self) -> Vec<f64> {
        let mut out = self.eigenvalues.clone();
        if let Some(t) = &self.threshold {
            out.push(t.energy);
        }
        out
    }
}

struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    fn from_potential(potential: &PotentialGrid, kinetic_scale: f64) -> Self {
        let h = potential.spacing();
        let k = kinetic_scale * kinetic_scale / (h * h);
        Self {
            diag: potential.values.iter().map(|v| v + 2.0 * k).collect(),
            off: -k,
        }
    }

    /// Number of eigenvalues strictly below `lambda`.
    fn count_below(&self, lambda: f64) -> usize {
        let e2 = self.off * self.off;
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - lambda } else { d - lambda - e2 / q };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().copied().fold(f64::INFINITY, f64::min) - r;
        let hi = self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + r;
        (lo, hi)
    }

    /// `k`-th eigenvalue (0-based) by bisection.
    fn eigenvalue(&self, k: usize, lo: f64, hi: f64) -> f64 {
        let (mut a, mut b) = (lo, hi);
        let scale = a.abs().max(b.abs()).max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.count_below(mid) > k {
                b = mid;
            } else {
                a = mid;
            }
            if b - a <= 4.0 * f64::EPSILON * scale {
                break;
            }
        }
        0.5 * (a + b)
    }

    /// Inverse iteration for the eigenvector at `lambda`, orthogonalized
    /// against `previous`.
    fn eigenvector(&self, lambda: f64, previous: &[Vec<f64>]) -> Vec<f64> {
        let n = self.diag.len();
        let scale = lambda.abs().max(self.off.abs()).max(1.0);
        let shift = lambda + 1e-12 * scale;
        let lu = TriLu::factor(&self.diag, self.off, shift);
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64 / 13.0).collect();
        for _ in 0..4 {
            x = lu.solve(&x);
            for p in previous {
                let dot: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
                for (xi, pi) in x.iter_mut().zip(p) {
                    *xi -= dot * pi;
                }
            }
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut x {
                *v /= norm;
            }
        }
        x
    }
}

/// LU factorization of a shifted symmetric tridiagonal matrix with partial
/// pivoting (the `gttrf` layout: one extra super-diagonal of fill).
struct TriLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TriLu {
    fn factor(diag: &[f64], off: f64, shift: f64) -> Self {
        let n = diag.len();
        let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
        let mut dl = vec![off; n.saturating_sub(1)];
        let mut du = vec![off; n.saturating_sub(1)];
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let tiny = 1e-300;
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Self { dl, d, du, du2, swapped }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut x = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
                x[i + 1] -= self.dl[i] * x[i];
            } else {
                x[i + 1] -= self.dl[i] * x[i];
            }
        }
        x[n - 1] /= self.d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.d[i];
        }
        x
    }
}

fn count_nodes(psi: &[f64]) -> usize {
    let max = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let band = NODE_DEAD_BAND * max;
    let mut last = 0.0f64;
    let mut nodes = 0;
    for &v in psi {
        if v.abs() <= band {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            nodes += 1;
        }
        last = v;
    }
    nodes
}

fn check_resolution(potential: &PotentialGrid, kinetic_scale: f64) -> Result<()> {
    let h = potential.spacing();
    let range = potential.max() - potential.min();
    let s2 = kinetic_scale * kinetic_scale;
    if h * h * range > RESOLUTION_LIMIT * s2 {
        return Err(Error::Resolution {
            spacing: h,
            suggested: (RESOLUTION_LIMIT * s2 / range).sqrt(),
        });
    }
    Ok(())
}

/// Default exclusion margin below the continuum edge.
pub fn default_margin(potential: &PotentialGrid) -> f64 {
    1e-3 * (potential.boundary_mean() - potential.min()).max(0.0)
}

/// Bound states below `continuum_edge - margin`, where the edge is the mean
/// of the two boundary values; `margin = None` uses [`default_margin`].
pub fn bound_states(potential: &PotentialGrid, kinetic_scale: f64, margin: Option<f64>) -> Result<Spectrum> {
    if !(kinetic_scale > 0.0) {
        return Err(invalid(format!("kinetic scale must be positive, got {kinetic_scale}")));
    }
    check_resolution(potential, kinetic_scale)?;
    let margin = margin.unwrap_or_else(|| default_margin(potential));
    let edge = potential.boundary_mean();
    let matrix = Tridiagonal::from_potential(potential, kinetic_scale);
    let (lo, hi) = matrix.gershgorin();
    let count = matrix.count_below(edge - margin);

    let mut eigenvalues = Vec::with_capacity(count);
    let mut eigenvectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    for k in 0..count {
        let lambda = matrix.eigenvalue(k, lo, hi);
        let v = matrix.eigenvector(lambda, &eigenvectors);
        eigenvalues.push(lambda);
        eigenvectors.push(v);
    }
    let h = potential.spacing();
    let norm = 1.0 / h.sqrt();
    for v in &mut eigenvectors {
        for x in v.iter_mut() {
            *x *= norm;
        }
    }
    let node_counts = eigenvectors.iter().map(|v| count_nodes(v)).collect();

    let threshold = if potential.even_symmetric {
        detect_threshold(potential, kinetic_scale, edge, &matrix, count, (lo, hi), &eigenvectors)
    } else {
        None
    };

    Ok(Spectrum {
        eigenvalues,
        continuum_edge: edge,
        kinetic_scale,
        node_counts,
        threshold,
        eigenvectors,
    })
}

/// Numerov integration of the zero-energy solution of one parity on the
/// right half line; returns `L |u'/u|` at the box end.
fn zero_energy_flatness(potential: &PotentialGrid, kinetic_scale: f64, edge: f64, even: bool) -> f64 {
    let g = potential.grid;
    let c = g.center();
    let h = g.spacing();
    let h2 = h * h / 12.0;
    let q: Vec<f64> = potential.values[c..]
        .iter()
        .map(|v| (v - edge) / (kinetic_scale * kinetic_scale))
        .collect();
    let n = q.len();
    let mut prev;
    let mut cur;
    if even {
        prev = 1.0;
        cur = (1.0 + 5.0 * h2 * q[0]) / (1.0 - h2 * q[1]);
    } else {
        prev = 0.0;
        cur = h;
    }
    for i in 1..n - 1 {
        let next = (2.0 * cur * (1.0 + 5.0 * h2 * q[i]) - prev * (1.0 - h2 * q[i - 1])) / (1.0 - h2 * q[i + 1]);
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e100 {
            prev /= m;
            cur /= m;
        }
    }
    let slope = (cur - prev) / h;
    g.half_width() * (slope / cur).abs()
}

fn parity_of(v: &[f64]) -> f64 {
    let n = v.len();
    (0..n).map(|i| v[i] * v[n - 1 - i]).sum::<f64>() / v.iter().map(|x| x * x).sum::<f64>()
}

fn detect_threshold(
    potential: &PotentialGrid,
    kinetic_scale: f64,
    edge: f64,
    matrix: &Tridiagonal,
    count: usize,
    bounds: (f64, f64),
    bound_vectors: &[Vec<f64>],
) -> Option<ThresholdLevel> {
    let (even, flatness) = [true, false]
        .into_iter()
        .map(|even| (even, zero_energy_flatness(potential, kinetic_scale, edge, even)))
        .filter(|(_, f)| f.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    if flatness > THRESHOLD_FLATNESS {
        return None;
    }
    let n = matrix.diag.len();
    let mut vectors = bound_vectors.to_vec();
    // The threshold state is the first box state above the bound ones with
    // the parity of the zero-energy solution.
    for k in count..(count + 4).min(n) {
        let lambda = matrix.eigenvalue(k, bounds.0, bounds.1);
        let v = matrix.eigenvector(lambda, &vectors);
        let p = parity_of(&v);
        if (p > 0.0) == even {
            return Some(ThresholdLevel {
                energy: lambda,
                even,
                flatness,
                nodes: count_nodes(&v),
            });
        }
        vectors.push(v);
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub per_level_abs: Vec<f64>,
    pub per_level_frac: Vec<f64>,
    pub rms_frac: f64,
    pub rounds_to_target: Vec<bool>,
}

impl DiscrepancyReport {
    pub fn all_round(&self) -> bool {
        self.rounds_to_target.iter().all(|&b| b)
    }

    pub fn max_abs(&self) -> f64 {
        self.per_level_abs.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-level comparison of computed levels against integer-valued targets.
pub fn compare_levels(levels: &[f64], targets: &[f64]) -> Result<DiscrepancyReport> {
    if levels.len() != targets.len() {
        return Err(invalid(format!(
            "{} levels compared against {} targets",
            levels.len(),
            targets.len()
        )));
    }
    let per_level_abs: Vec<f64> = levels.iter().zip(targets).map(|(e, t)| (e - t).abs()).collect();
    let per_level_frac: Vec<f64> = per_level_abs
        .iter()
        .zip(targets)
        .map(|(d, t)| if *t != 0.0 { d / t.abs() } else { *d })
        .collect();
    let rms_frac = if per_level_frac.is_empty() {
        0.0
    } else {
        (per_level_frac.iter().map(|f| f * f).sum::<f64>() / per_level_frac.len() as f64).sqrt()
    };
    let rounds_to_target = levels.iter().zip(targets).map(|(e, t)| e.round() == *t).collect();
    Ok(DiscrepancyReport {
        per_level_abs,
        per_level_frac,
        rms_frac,
        rounds_to_target,
    })
}

/// Compares [`Spectrum::levels`] against the targets.
pub fn compare_spectrum(spectrum: &Spectrum, targets: &[f64]) -> Result<DiscrepancyReport> {
    compare_levels(&spectrum.levels(), targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::{HALF_KINETIC_SCALE, UNIT_KINETIC_SCALE};

    fn pt(depth: f64, half_width: f64, h: f64) -> PotentialGrid {
        PotentialGrid::from_fn(Grid::with_spacing(half_width, h).unwrap(), 0.0, |x| -depth / x.cosh().powi(2))
    }

    #[test]
    fn flat_potential_has_no_bound_states() {
        let v = PotentialGrid::from_fn(Grid::with_spacing(10.0, 0.01).unwrap(), 0.0, |_| 0.0);
        let s = bound_states(&v, HALF_KINETIC_SCALE, None).unwrap();
        assert!(s.eigenvalues.is_empty());
    }

    #[test]
    fn poschl_teller_unit_convention() {
        // -λ(λ+1)/cosh² with λ = 2 under -d²/dx²: levels -(λ-n)².
        let s = bound_states(&pt(6.0, 12.0, 0.005), UNIT_KINETIC_SCALE, None).unwrap();
        assert_eq!(s.eigenvalues.len(), 2);
        assert!((s.eigenvalues[0] + 4.0).abs() < 1e-3, "{:?}", s.eigenvalues);
        assert!((s.eigenvalues[1] + 1.0).abs() < 1e-3, "{:?}", s.eigenvalues);
    }

    #[test]
    fn poschl_teller_half_convention() {
        let s = bound_states(&pt(3.0, 12.0, 0.005), HALF_KINETIC_SCALE, None).unwrap();
        assert_eq!(s.eigenvalues.len(), 2);
        assert!((s.eigenvalues[0] + 2.0).abs() < 1e-3);
        assert!((s.eigenvalues[1] + 0.5).abs() < 1e-3);
        // Integer λ: zero-energy resonance at the edge.
        let t = s.threshold.expect("reflectionless well has a threshold state");
        assert!(t.even);
        assert!(t.energy >= 0.0 && t.energy < 0.05);
    }

    #[test]
    fn non_integer_depth_has_no_threshold_state() {
        let s = bound_states(&pt(2.0, 12.0, 0.005), HALF_KINETIC_SCALE, None).unwrap();
        assert!(s.threshold.is_none());
    }

    #[test]
    fn harmonic_oscillator() {
        let v = PotentialGrid::from_fn(Grid::with_spacing(8.0, 0.005).unwrap(), 64.0, |x| x * x);
        let s = bound_states(&v, UNIT_KINETIC_SCALE, Some(40.0)).unwrap();
        for (n, e) in s.eigenvalues.iter().take(5).enumerate() {
            assert!((e - (2 * n + 1) as f64).abs() < 1e-3, "n={n}: {e}");
        }
    }

    #[test]
    fn nodes_and_orthonormality() {
        let v = PotentialGrid::from_fn(Grid::with_spacing(8.0, 0.01).unwrap(), 64.0, |x| x * x);
        let s = bound_states(&v, UNIT_KINETIC_SCALE, Some(30.0)).unwrap();
        let h = v.spacing();
        for (i, n) in s.node_counts.iter().enumerate() {
            assert_eq!(*n, i);
        }
        for i in 0..s.eigenvectors.len() {
            for j in 0..s.eigenvectors.len() {
                let dot: f64 = s.eigenvectors[i].iter().zip(&s.eigenvectors[j]).map(|(a, b)| a * b).sum::<f64>() * h;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8, "<{i}|{j}> = {dot}");
            }
        }
    }

    #[test]
    fn box_independence() {
        let a = bound_states(&pt(3.0, 12.0, 0.01), HALF_KINETIC_SCALE, None).unwrap();
        let b = bound_states(&pt(3.0, 24.0, 0.01), HALF_KINETIC_SCALE, None).unwrap();
        assert_eq!(a.eigenvalues.len(), b.eigenvalues.len());
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn second_order_convergence() {
        let err = |h: f64| {
            let s = bound_states(&pt(3.0, 12.0, h), HALF_KINETIC_SCALE, None).unwrap();
            (s.eigenvalues[0] + 2.0).abs()
        };
        let ratio = err(0.04) / err(0.02);
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn resolution_precondition() {
        let v = PotentialGrid::from_fn(Grid::new(10.0, 11).unwrap(), 0.0, |x| -100.0 / x.cosh().powi(2));
        match bound_states(&v, HALF_KINETIC_SCALE, None) {
            Err(Error::Resolution { suggested, .. }) => assert!(suggested < 1.0),
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn compare_identical() {
        let r = compare_levels(&[2.0, 3.0, 5.0], &[2.0, 3.0, 5.0]).unwrap();
        assert!(r.per_level_abs.iter().all(|&d| d == 0.0));
        assert_eq!(r.rms_frac, 0.0);
        assert!(r.all_round());
        assert!(compare_levels(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rms_is_root_mean_square_of_fractions() {
        let r = compare_levels(&[1.5, 3.3], &[2.0, 3.0]).unwrap();
        let want = ((0.25f64.powi(2) + 0.1f64.powi(2)) / 2.0).sqrt();
        assert!((r.rms_frac - want).abs() < 1e-12);
        assert_eq!(r.rounds_to_target, vec![true, true]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn poschl_teller_levels_and_nodes(depth in 0.8f64..12.0) {
                // -D/cosh² under -½d²: λ(λ+1) = 2D, levels -(λ-n)²/2.
                let lambda = 0.5 * ((1.0 + 8.0 * depth).sqrt() - 1.0);
                let s = bound_states(&pt(depth, 12.0, 0.01), HALF_KINETIC_SCALE, None).unwrap();
                prop_assert!(!s.eigenvalues.is_empty());
                for (n, e) in s.eigenvalues.iter().enumerate() {
                    prop_assert_eq!(s.node_counts[n], n);
                    // Levels within ~0.1 of the edge feel the box.
                    if lambda - (n as f64) >= 0.5 {
                        let want = -0.5 * (lambda - n as f64).powi(2);
                        prop_assert!((e - want).abs() < 2e-3, "n={} {} vs {}", n, e, want);
                    }
                }
                let confined = (0..).take_while(|&n| lambda - n as f64 >= 0.5).count();
                prop_assert!(s.eigenvalues.len() >= confined);
            }
        }
    }
}
