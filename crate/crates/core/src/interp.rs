//! Interpolation helpers for resampling profiles between grids.

/// Linear interpolation of `ys` over strictly increasing `xs`; values
/// outside the range are clamped to the end samples.
pub fn linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (1.0 - t) + ys[i + 1] * t
}

/// Natural cubic spline through uniformly spaced samples.
#[derive(Debug, Clone)]
pub struct UniformSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl UniformSpline {
    pub fn new(x0: f64, h: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        assert!(n >= 2, "spline needs at least two samples");
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas).
            let k = n - 2;
            let mut c = vec![0.0; k];
            let mut d = vec![0.0; k];
            for i in 0..k {
                let rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]) / (h * h);
                if i == 0 {
                    c[i] = 1.0 / 4.0;
                    d[i] = rhs / 4.0;
                } else {
                    let denom = 4.0 - c[i - 1];
                    c[i] = 1.0 / denom;
                    d[i] = (rhs - d[i - 1]) / denom;
                }
            }
            for i in (0..k).rev() {
                m[i + 1] = d[i] - if i + 1 < k { c[i] * m[i + 2] } else { 0.0 };
            }
        }
        Self { x0, h, y, m }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        let pos = ((x - self.x0) / self.h).clamp(0.0, (n - 1) as f64);
        let i = (pos.floor() as usize).min(n - 2);
        let t = pos - i as f64;
        let a = 1.0 - t;
        let h2 = self.h * self.h;
        a * self.y[i]
            + t * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (t * t * t - t) * self.m[i + 1]) * h2 / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_hits_samples_and_clamps() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [0.0, 2.0, 6.0];
        assert_eq!(linear(&xs, &ys, 1.0), 2.0);
        assert_eq!(linear(&xs, &ys, 2.0), 4.0);
        assert_eq!(linear(&xs, &ys, -1.0), 0.0);
        assert_eq!(linear(&xs, &ys, 9.0), 6.0);
    }

    #[test]
    fn spline_reproduces_smooth_function() {
        let h = 0.1;
        let y: Vec<f64> = (0..=60).map(|i| (i as f64 * h).sin()).collect();
        let s = UniformSpline::new(0.0, h, y);
        // Natural end conditions are wrong for sin near x = 6; stay inside.
        for k in 5..250 {
            let x = k as f64 * 0.02;
            assert!((s.eval(x) - x.sin()).abs() < 2e-5, "x={x}");
        }
    }
}
