//! Periodic interpolation of vector-valued samples on the circle.
//!
//! Uniform grids use the trigonometric interpolant; nonuniform grids use a
//! periodic cubic spline.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Real Fourier coefficients of the trigonometric interpolant through `N`
/// equispaced samples of a `dims`-vector signal.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    n: usize,
    /// `a[(d, k)]`, `b[(d, k)]` for `k = 0..=N/2`.
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl TrigInterpolant {
    /// `samples` holds one sample per column, taken at `θ_j = 2πj/N`.
    pub fn new(samples: &DMatrix<f64>) -> Self {
        let dims = samples.nrows();
        let n = samples.ncols();
        assert!(n >= 1, "trigonometric interpolation needs at least one sample");
        let kmax = n / 2;
        let mut a = DMatrix::zeros(dims, kmax + 1);
        let mut b = DMatrix::zeros(dims, kmax + 1);
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for d in 0..dims {
            for (j, c) in buf.iter_mut().enumerate() {
                *c = Complex::new(samples[(d, j)], 0.0);
            }
            fft.process(&mut buf);
            let nf = n as f64;
            a[(d, 0)] = buf[0].re / nf;
            for k in 1..=kmax {
                if 2 * k == n {
                    a[(d, k)] = buf[k].re / nf;
                } else {
                    a[(d, k)] = 2.0 * buf[k].re / nf;
                    b[(d, k)] = -2.0 * buf[k].im / nf;
                }
            }
        }
        Self { n, a, b }
    }

    pub fn from_signal(samples: &[f64]) -> Self {
        Self::new(&DMatrix::from_row_slice(1, samples.len(), samples))
    }

    pub fn dims(&self) -> usize {
        self.a.nrows()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Cosine and sine coefficients, one row per dimension and one column
    /// per wavenumber `k = 0..=N/2`.
    pub fn coefficients(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.a, &self.b)
    }

    /// Value and first two derivatives at `theta`.
    pub fn eval_with_derivatives(&self, theta: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let dims = self.dims();
        let mut v = DVector::zeros(dims);
        let mut d1 = DVector::zeros(dims);
        let mut d2 = DVector::zeros(dims);
        for d in 0..dims {
            v[d] = self.a[(d, 0)];
        }
        for k in 1..self.a.ncols() {
            let kf = k as f64;
            let (s, c) = (kf * theta).sin_cos();
            for d in 0..dims {
                let (ak, bk) = (self.a[(d, k)], self.b[(d, k)]);
                v[d] += ak * c + bk * s;
                d1[d] += kf * (-ak * s + bk * c);
                d2[d] -= kf * kf * (ak * c + bk * s);
            }
        }
        (v, d1, d2)
    }

    pub fn eval(&self, theta: f64) -> DVector<f64> {
        let dims = self.dims();
        let mut v = DVector::zeros(dims);
        for d in 0..dims {
            v[d] = self.a[(d, 0)];
        }
        for k in 1..self.a.ncols() {
            let (s, c) = (k as f64 * theta).sin_cos();
            for d in 0..dims {
                v[d] += self.a[(d, k)] * c + self.b[(d, k)] * s;
            }
        }
        v
    }

    /// Scalar convenience for one-dimensional interpolants.
    pub fn eval_scalar(&self, theta: f64) -> f64 {
        self.eval(theta)[0]
    }
}

/// Periodic cubic spline through samples at strictly increasing phases
/// `θ_0 = 0 < … < θ_{N−1} < 2π`.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    knots: Vec<f64>,
    values: DMatrix<f64>,
    /// Second derivatives at the knots.
    m: DMatrix<f64>,
}

impl PeriodicSpline {
    /// `knots` has `N + 1` entries ending at `2π`; `values` has `N` columns
    /// (the closing sample is implied by periodicity).
    pub fn new(knots: &[f64], values: &DMatrix<f64>) -> Self {
        let n = values.ncols();
        assert_eq!(knots.len(), n + 1, "spline needs N+1 knots for N samples");
        let dims = values.nrows();
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let mut m = DMatrix::zeros(dims, n);
        if n >= 3 {
            // Cyclic tridiagonal system for the knot second derivatives.
            let mut sys = DMatrix::zeros(n, n);
            for i in 0..n {
                let hp = h[(i + n - 1) % n];
                let hn = h[i];
                sys[(i, (i + n - 1) % n)] += hp / 6.0;
                sys[(i, i)] += (hp + hn) / 3.0;
                sys[(i, (i + 1) % n)] += hn / 6.0;
            }
            let lu = sys.lu();
            for d in 0..dims {
                let rhs = DVector::from_fn(n, |i, _| {
                    let hp = h[(i + n - 1) % n];
                    let hn = h[i];
                    let yp = values[(d, (i + n - 1) % n)];
                    let y = values[(d, i)];
                    let yn = values[(d, (i + 1) % n)];
                    (yn - y) / hn - (y - yp) / hp
                });
                let sol = lu.solve(&rhs).expect("periodic spline system is diagonally dominant");
                m.set_row(d, &sol.transpose());
            }
        }
        Self { knots: knots.to_vec(), values: values.clone(), m }
    }

    pub fn eval(&self, theta: f64) -> DVector<f64> {
        let n = self.values.ncols();
        let t = theta.rem_euclid(2.0 * PI);
        let i = match self.knots.partition_point(|&k| k <= t) {
            0 => 0,
            p => (p - 1).min(n - 1),
        };
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        let j = (i + 1) % n;
        DVector::from_fn(self.values.nrows(), |d, _| {
            a * self.values[(d, i)]
                + b * self.values[(d, j)]
                + ((a * a * a - a) * self.m[(d, i)] + (b * b * b - b) * self.m[(d, j)]) * h * h / 6.0
        })
    }
}

/// Periodic interpolant matching the sampling grid.
#[derive(Debug, Clone)]
pub enum Periodic {
    Trig(TrigInterpolant),
    Spline(PeriodicSpline),
}

impl Periodic {
    /// `knots` has `N + 1` entries from 0 to 2π and `values` the matching
    /// `N` leading samples.
    pub fn new(knots: &[f64], values: &DMatrix<f64>) -> Self {
        if is_uniform(knots) {
            Periodic::Trig(TrigInterpolant::new(values))
        } else {
            Periodic::Spline(PeriodicSpline::new(knots, values))
        }
    }

    pub fn eval(&self, theta: f64) -> DVector<f64> {
        match self {
            Periodic::Trig(t) => t.eval(theta),
            Periodic::Spline(s) => s.eval(theta),
        }
    }
}

pub(crate) fn is_uniform(knots: &[f64]) -> bool {
    let n = knots.len() - 1;
    let h = 2.0 * PI / n as f64;
    knots.iter().enumerate().all(|(i, &k)| (k - i as f64 * h).abs() <= 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
    }

    #[test]
    fn trig_interpolant_is_exact_on_band_limited_signals() {
        let f = |t: f64| 0.3 + (t).sin() - 0.2 * (3.0 * t).cos() + 0.05 * (7.0 * t + 0.4).sin();
        for n in [32usize, 33] {
            let s: Vec<f64> = grid(n).into_iter().map(f).collect();
            let ti = TrigInterpolant::from_signal(&s);
            for k in 0..50 {
                let t = 0.123 * k as f64;
                assert!((ti.eval_scalar(t) - f(t)).abs() < 1e-13);
            }
            let (v, d1, d2) = ti.eval_with_derivatives(1.1);
            let df = |t: f64| t.cos() + 0.6 * (3.0 * t).sin() + 0.35 * (7.0 * t + 0.4).cos();
            let ddf = |t: f64| -t.sin() + 1.8 * (3.0 * t).cos() - 2.45 * (7.0 * t + 0.4).sin();
            assert!((v[0] - f(1.1)).abs() < 1e-13);
            assert!((d1[0] - df(1.1)).abs() < 1e-12);
            assert!((d2[0] - ddf(1.1)).abs() < 1e-11);
        }
    }

    #[test]
    fn trig_interpolant_reproduces_nodes_with_nyquist_mode() {
        let s: Vec<f64> = (0..16).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let ti = TrigInterpolant::from_signal(&s);
        for (j, t) in grid(16).into_iter().enumerate() {
            assert!((ti.eval_scalar(t) - s[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn spline_converges_on_nonuniform_grid() {
        let mut knots: Vec<f64> = (0..=64).map(|j| 2.0 * PI * (j as f64 / 64.0)).collect();
        for (j, k) in knots.iter_mut().enumerate().skip(1).take(62) {
            *k += 0.02 * (j as f64).sin();
        }
        let vals = DMatrix::from_fn(1, 64, |_, j| knots[j].cos());
        let sp = PeriodicSpline::new(&knots, &vals);
        for k in 0..100 {
            let t = 0.0627 * k as f64;
            assert!((sp.eval(t)[0] - t.cos()).abs() < 1e-5);
        }
        assert!(!is_uniform(&knots));
    }
}
