//! Uniform symmetric grids and sampled potentials, plus the `x,V` CSV form.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Uniform grid on `[-half_width, half_width]` with an odd number of nodes,
/// so that `x = 0` is a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    points: usize,
}

impl Grid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(invalid(format!("half width must be positive, got {half_width}")));
        }
        if points < 3 || points.is_multiple_of(2) {
            return Err(invalid(format!("grid needs an odd number (>= 3) of points, got {points}")));
        }
        Ok(Self { half_width, points })
    }

    /// Grid with the requested spacing, rounded so the node count is odd and
    /// `half_width` is kept exactly.
    pub fn with_spacing(half_width: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(invalid(format!("spacing must be positive, got {spacing}")));
        }
        let half_cells = (half_width / spacing).round().max(1.0) as usize;
        Self::new(half_width, 2 * half_cells + 1)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    /// Index of the `x = 0` node.
    pub fn center(&self) -> usize {
        self.points / 2
    }

    pub fn x(&self, i: usize) -> f64 {
        // Symmetric evaluation keeps x(i) == -x(mirror(i)) bit for bit.
        let c = self.center() as f64;
        (i as f64 - c) * self.spacing()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    pub fn mirror(&self, i: usize) -> usize {
        self.points - 1 - i
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub asymptote: f64,
    pub even_symmetric: bool,
}

impl PotentialGrid {
    /// Wraps sampled values; `even_symmetric` is detected exactly.
    pub fn new(grid: Grid, values: Vec<f64>, asymptote: f64) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(invalid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.points()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("potential contains non-finite values".into()));
        }
        let even_symmetric = (0..grid.center()).all(|i| values[i] == values[grid.mirror(i)]);
        Ok(Self {
            grid,
            values,
            asymptote,
            even_symmetric,
        })
    }

    pub fn from_fn(grid: Grid, asymptote: f64, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.points()).map(|i| f(grid.x(i))).collect();
        Self::new(grid, values, asymptote).expect("closure values sized to grid")
    }

    /// Builds the full even potential from its samples on `x >= 0`
    /// (`half[0]` at `x = 0`).
    pub fn from_half(grid: Grid, half: &[f64], asymptote: f64) -> Result<Self> {
        let c = grid.center();
        if half.len() != c + 1 {
            return Err(invalid("half-line samples do not match the grid"));
        }
        let mut values = vec![0.0; grid.points()];
        for (k, &v) in half.iter().enumerate() {
            values[c + k] = v;
            values[c - k] = v;
        }
        Self::new(grid, values, asymptote)
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean of the two end values.
    pub fn boundary_mean(&self) -> f64 {
        0.5 * (self.values[0] + self.values[self.values.len() - 1])
    }

    pub fn max_asymmetry(&self) -> f64 {
        let g = &self.grid;
        (0..g.center())
            .map(|i| (self.values[i] - self.values[g.mirror(i)]).abs())
            .fold(0.0, f64::max)
    }

    /// Same potential shifted by a constant.
    pub fn shifted(&self, by: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v + by).collect(),
            asymptote: self.asymptote + by,
            even_symmetric: self.even_symmetric,
        }
    }

    /// Value at an arbitrary `x` by linear interpolation; the asymptote
    /// outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let h = self.spacing();
        let pos = (x + self.grid.half_width()) / h;
        if pos < 0.0 || pos > (self.values.len() - 1) as f64 {
            return self.asymptote;
        }
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let t = pos - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,V")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.grid.x(i), v)?;
        }
        Ok(())
    }

    /// Reads an `x,V` CSV. The grid must be uniform, symmetric and have an
    /// odd node count; the asymptote is taken from the end values.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 {
                if line.replace(' ', "") != "x,V" {
                    return Err(Error::Parse(format!("expected header `x,V`, found `{line}`")));
                }
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Parse(format!("line {}: missing column", lineno + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            xs.push(parse(parts.next())?);
            vs.push(parse(parts.next())?);
        }
        if xs.len() < 3 {
            return Err(Error::Parse("potential CSV needs at least three rows".into()));
        }
        let half_width = 0.5 * (xs[xs.len() - 1] - xs[0]);
        let grid = Grid::new(half_width, xs.len())?;
        let h = grid.spacing();
        for (i, &x) in xs.iter().enumerate() {
            if (x - grid.x(i)).abs() > 1e-6 * h.max(1e-12) + 1e-9 * half_width {
                return Err(Error::Parse(format!(
                    "row {}: x = {x} is off the uniform symmetric grid",
                    i + 2
                )));
            }
        }
        let asymptote = 0.5 * (vs[0] + vs[vs.len() - 1]);
        Self::new(grid, vs, asymptote)
    }
}
