//! Small numerical kernels shared by the modules: node-grid quadrature,
//! finite-difference derivatives, not-a-knot cubic splines and bisection.

use crate::banded::BandMatrix;
use thiserror::Error;

/// Quadrature weights on `n + 1` uniform nodes with spacing `dx`.
///
/// Order 2 is the trapezoid rule; order 4 is composite Simpson and needs an
/// even number of intervals.
pub fn quadrature_weights(intervals: usize, dx: f64, order: u8) -> Vec<f64> {
    let mut w = vec![dx; intervals + 1];
    match order {
        4 => {
            assert!(intervals % 2 == 0, "Simpson rule needs an even interval count");
            for (j, wj) in w.iter_mut().enumerate() {
                *wj = if j == 0 || j == intervals {
                    dx / 3.0
                } else if j % 2 == 1 {
                    4.0 * dx / 3.0
                } else {
                    2.0 * dx / 3.0
                };
            }
        }
        _ => {
            w[0] = 0.5 * dx;
            w[intervals] = 0.5 * dx;
        }
    }
    w
}

pub fn integrate(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

/// First derivative on uniform nodes, central inside and one-sided at the
/// ends, at the requested order (2 or 4).
pub fn derivative(values: &[f64], dx: f64, order: u8) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "derivative needs at least five nodes");
    let f = values;
    let mut d = vec![0.0; n];
    if order == 4 {
        for j in 2..n - 2 {
            d[j] = (f[j - 2] - 8.0 * f[j - 1] + 8.0 * f[j + 1] - f[j + 2]) / (12.0 * dx);
        }
        d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * dx);
        d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * dx);
        let m = n - 1;
        d[m] = (25.0 * f[m] - 48.0 * f[m - 1] + 36.0 * f[m - 2] - 16.0 * f[m - 3] + 3.0 * f[m - 4])
            / (12.0 * dx);
        d[m - 1] = (3.0 * f[m] + 10.0 * f[m - 1] - 18.0 * f[m - 2] + 6.0 * f[m - 3] - f[m - 4])
            / (12.0 * dx);
    } else {
        for j in 1..n - 1 {
            d[j] = (f[j + 1] - f[j - 1]) / (2.0 * dx);
        }
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx);
        let m = n - 1;
        d[m] = (3.0 * f[m] - 4.0 * f[m - 1] + f[m - 2]) / (2.0 * dx);
    }
    d
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("a not-a-knot spline needs at least 4 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample abscissae must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

/// Cubic spline with not-a-knot end conditions (C² interpolant).
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, SplineError> {
        let n = x.len();
        if n < 4 || y.len() != n {
            return Err(SplineError::TooFewSamples(n.min(y.len())));
        }
        for i in 0..n {
            if !x[i].is_finite() || !y[i].is_finite() {
                return Err(SplineError::NonFinite(i));
            }
            if i > 0 && x[i] <= x[i - 1] {
                return Err(SplineError::NotIncreasing(i));
            }
        }
        let h: Vec<f64> = x.windows(2).map(|s| s[1] - s[0]).collect();
        let mut a = BandMatrix::zeros(n, 2, 2);
        let mut rhs = vec![0.0; n];
        a.set(0, 0, h[1]);
        a.set(0, 1, -(h[0] + h[1]));
        a.set(0, 2, h[0]);
        for i in 1..n - 1 {
            a.set(i, i - 1, h[i - 1]);
            a.set(i, i, 2.0 * (h[i - 1] + h[i]));
            a.set(i, i + 1, h[i]);
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        a.set(n - 1, n - 3, h[n - 2]);
        a.set(n - 1, n - 2, -(h[n - 3] + h[n - 2]));
        a.set(n - 1, n - 1, h[n - 3]);
        let m = a
            .factorize()
            .expect("not-a-knot system is nonsingular for increasing knots")
            .solve(&rhs)
            .expect("dimensions match");
        Ok(Self { x, y, m })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    /// Value, first and second derivative at `t` (cubic extrapolation of the
    /// end pieces outside the knot range).
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        let i = match self.x.partition_point(|&xk| xk <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = self.x[i + 1] - t;
        let b = t - self.x[i];
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let f = m0 * a * a * a / (6.0 * h)
            + m1 * b * b * b / (6.0 * h)
            + (y0 / h - m0 * h / 6.0) * a
            + (y1 / h - m1 * h / 6.0) * b;
        let fp = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - (y0 / h - m0 * h / 6.0)
            + (y1 / h - m1 * h / 6.0);
        let fpp = (m0 * a + m1 * b) / h;
        (f, fp, fpp)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.iter().map(|v| v * factor).collect(),
            m: self.m.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Bisection on a sign change of `f` over `[lo, hi]`; runs until the bracket
/// cannot shrink further or its width drops below `tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_cubics_exactly() {
        let x: Vec<f64> = (0..9).map(|i| -1.0 + 0.125 * i as f64 + 0.01 * (i % 3) as f64).collect();
        let cubic = |t: f64| 2.0 - t + 0.5 * t * t - 3.0 * t * t * t;
        let y = x.iter().map(|&t| cubic(t)).collect();
        let s = CubicSpline::new(x, y).unwrap();
        for k in 0..50 {
            let t = -1.0 + k as f64 / 49.0;
            let (f, fp, fpp) = s.eval(t);
            assert!((f - cubic(t)).abs() < 1e-12);
            assert!((fp - (-1.0 + t - 9.0 * t * t)).abs() < 1e-10);
            assert!((fpp - (1.0 - 18.0 * t)).abs() < 1e-9);
        }
    }

    #[test]
    fn spline_rejects_bad_knots() {
        assert_eq!(
            CubicSpline::new(vec![0.0, 1.0, 1.0, 2.0], vec![0.0; 4]),
            Err(SplineError::NotIncreasing(2))
        );
        assert_eq!(
            CubicSpline::new(vec![0.0, 1.0, 2.0], vec![0.0; 3]),
            Err(SplineError::TooFewSamples(3))
        );
    }

    #[test]
    fn quadrature_orders() {
        let n = 64;
        let dx = 1.0 / n as f64;
        let f: Vec<f64> = (0..=n).map(|j| (j as f64 * dx).exp()).collect();
        let exact = 1f64.exp() - 1.0;
        let t = integrate(&f, &quadrature_weights(n, dx, 2));
        let s = integrate(&f, &quadrature_weights(n, dx, 4));
        assert!((t - exact).abs() < 1e-4 && (t - exact).abs() > 1e-6);
        assert!((s - exact).abs() < 1e-9);
    }

    #[test]
    fn derivative_orders() {
        let n = 40;
        let dx = 1.0 / n as f64;
        let f: Vec<f64> = (0..=n).map(|j| (2.0 * j as f64 * dx).sin()).collect();
        for (order, tol) in [(2u8, 2e-3), (4u8, 2e-5)] {
            let d = derivative(&f, dx, order);
            for (j, dj) in d.iter().enumerate() {
                let exact = 2.0 * (2.0 * j as f64 * dx).cos();
                assert!((dj - exact).abs() < tol, "order {order} node {j}");
            }
        }
    }
}
