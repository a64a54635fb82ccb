//! Piecewise cubic Hermite interpolation.

/// Cubic Hermite interpolant through `(x_j, y_j)` with node slopes `d_j`,
/// continued linearly with the end slopes outside `[x_0, x_last]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicHermite {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl CubicHermite {
    /// Interpolant with caller-supplied slopes, used as given.
    pub fn with_slopes(x: Vec<f64>, y: Vec<f64>, d: Vec<f64>) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len() && y.len() == d.len());
        debug_assert!(x.windows(2).all(|w| w[0] < w[1]));
        Self { x, y, d }
    }

    /// Monotone interpolant from exact slopes: slopes are limited with the
    /// Fritsch–Carlson conditions so that monotone data stay monotone.
    pub fn monotone_with_slopes(x: Vec<f64>, y: Vec<f64>, mut d: Vec<f64>) -> Self {
        let n = x.len();
        for j in 0..n - 1 {
            let delta = (y[j + 1] - y[j]) / (x[j + 1] - x[j]);
            if delta == 0.0 {
                d[j] = 0.0;
                d[j + 1] = 0.0;
                continue;
            }
            for k in [j, j + 1] {
                if d[k].signum() != delta.signum() {
                    d[k] = 0.0;
                }
            }
            let a = d[j] / delta;
            let b = d[j + 1] / delta;
            let s = a * a + b * b;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                d[j] = t * a * delta;
                d[j + 1] = t * b * delta;
            }
        }
        Self { x, y, d }
    }

    /// Fritsch–Carlson PCHIP: slopes estimated from the data alone.
    pub fn pchip(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && n == y.len());
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|j| (y[j + 1] - y[j]) / h[j]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
            return Self { x, y, d };
        }
        for j in 1..n - 1 {
            if delta[j - 1] * delta[j] > 0.0 {
                let w1 = 2.0 * h[j] + h[j - 1];
                let w2 = h[j] + 2.0 * h[j - 1];
                d[j] = (w1 + w2) / (w1 / delta[j - 1] + w2 / delta[j]);
            }
        }
        let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
            let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if s.signum() != d0.signum() {
                0.0
            } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
                3.0 * d0
            } else {
                s
            }
        };
        d[0] = end(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Self { x, y, d }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn slopes(&self) -> &[f64] {
        &self.d
    }

    /// Index `j` of the segment `[x_j, x_{j+1}]` containing `t`, for `t`
    /// inside the node range.
    fn segment(&self, t: f64) -> usize {
        let j = self.x.partition_point(|&v| v <= t);
        j.saturating_sub(1).min(self.x.len() - 2)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] + self.d[0] * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1] + self.d[n - 1] * (t - self.x[n - 1]);
        }
        self.eval_segment(self.segment(t), t)
    }

    /// Evaluates segment `j` at `t` without range checks.
    #[inline]
    pub fn eval_segment(&self, j: usize, t: f64) -> f64 {
        let h = self.x[j + 1] - self.x[j];
        let s = (t - self.x[j]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[j] + h * (h10 * self.d[j] + h11 * self.d[j + 1]) + h01 * self.y[j + 1]
    }
}
