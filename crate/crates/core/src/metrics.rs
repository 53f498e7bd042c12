//! Phase signals on uniform circle grids and the geometry of the four phase
//! response curve spaces: `A = H¹`, `B = H¹/ℝ>0`, `C = H¹/Shift(S¹)` and
//! `D = H¹/(ℝ>0 × Shift(S¹))`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::interp::TrigInterpolant;
use crate::{Error, Result};

/// A 2π-periodic scalar signal sampled at `θ_j = 2πj/N`, `j = 0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSignal {
    values: Vec<f64>,
}

impl PhaseSignal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument(format!("phase signal needs at least 2 samples, got {}", values.len())));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("phase signal sample {j} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        Self::new((0..n).map(|j| f(grid_phase(j, n))).collect()).expect("signal samples must be finite")
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn phase(&self, j: usize) -> f64 {
        grid_phase(j, self.len())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { values: self.values.iter().map(|v| a * v).collect() }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &PhaseSignal) -> Result<Self> {
        same_grid(self, other)?;
        Ok(Self { values: self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect() })
    }

    pub fn interpolant(&self) -> TrigInterpolant {
        TrigInterpolant::from_signal(&self.values)
    }

    /// Value of the trigonometric interpolant at `theta`.
    pub fn eval(&self, theta: f64) -> f64 {
        self.interpolant().eval_scalar(theta)
    }

    /// `θ ↦ q(θ + σ)`, exact on grid shifts and through the trigonometric
    /// interpolant otherwise.
    pub fn shifted(&self, sigma: f64) -> Self {
        let n = self.len();
        let steps = sigma.rem_euclid(2.0 * PI) * n as f64 / (2.0 * PI);
        let m = steps.round();
        if (steps - m).abs() <= 1e-12 * n as f64 {
            let m = m as usize % n;
            return Self { values: (0..n).map(|j| self.values[(j + m) % n]).collect() };
        }
        let ti = self.interpolant();
        Self { values: (0..n).map(|j| ti.eval_scalar(grid_phase(j, n) + sigma)).collect() }
    }

    /// Resamples onto a uniform grid of `n` points through the trigonometric
    /// interpolant.
    pub fn resample(&self, n: usize) -> Self {
        if n == self.len() {
            return self.clone();
        }
        let ti = self.interpolant();
        Self { values: (0..n).map(|j| ti.eval_scalar(grid_phase(j, n))).collect() }
    }
}

pub(crate) fn grid_phase(j: usize, n: usize) -> f64 {
    2.0 * PI * j as f64 / n as f64
}

fn same_grid(a: &PhaseSignal, b: &PhaseSignal) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrcSpace {
    A,
    B,
    C,
    D,
}

impl PrcSpace {
    pub const ALL: [PrcSpace; 4] = [PrcSpace::A, PrcSpace::B, PrcSpace::C, PrcSpace::D];

    pub fn scale_invariant(self) -> bool {
        matches!(self, PrcSpace::B | PrcSpace::D)
    }

    pub fn shift_invariant(self) -> bool {
        matches!(self, PrcSpace::C | PrcSpace::D)
    }
}

impl std::fmt::Display for PrcSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// `⟨ξ, ζ⟩ = ∫ ξ ζ dθ` by the rectangle rule.
pub fn inner(a: &PhaseSignal, b: &PhaseSignal) -> Result<f64> {
    same_grid(a, b)?;
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(2.0 * PI / a.len() as f64 * s)
}

/// `‖ξ‖₂`.
pub fn norm(a: &PhaseSignal) -> f64 {
    inner(a, a).unwrap().sqrt()
}

fn fft(values: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn ifft_real(mut buf: Vec<Complex<f64>>) -> Vec<f64> {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.into_iter().map(|c| c.re / n as f64).collect()
}

/// Signed wavenumber of DFT bin `k`.
fn wavenumber(k: usize, n: usize) -> f64 {
    if 2 * k < n {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Spectral derivative `q′`. The Nyquist mode of an even-length signal is
/// dropped, matching the derivative of its trigonometric interpolant at the
/// nodes.
pub fn derivative(q: &PhaseSignal) -> PhaseSignal {
    let n = q.len();
    let mut c = fft(&q.values);
    for (k, ck) in c.iter_mut().enumerate() {
        if 2 * k == n {
            *ck = Complex::new(0.0, 0.0);
        } else {
            *ck *= Complex::new(0.0, wavenumber(k, n));
        }
    }
    PhaseSignal { values: ifft_real(c) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftResult {
    /// Maximizer of `c(σ) = ⟨q1(·), q2(· + σ)⟩`, in `[0, 2π)`.
    pub sigma: f64,
    /// `c(σ*)`.
    pub peak: f64,
    /// `c` at the grid shifts `2πm/N`.
    pub correlation: Vec<f64>,
    /// Set when the correlation is constant (a constant input signal).
    pub flat: bool,
    /// Set when another grid maximum matches the peak within `1e-9`.
    pub multiple: bool,
}

/// Circular cross-correlation `c_m = ⟨q1(·), q2(· + 2πm/N)⟩` via the DFT.
pub fn cross_correlation(q1: &PhaseSignal, q2: &PhaseSignal) -> Result<Vec<f64>> {
    same_grid(q1, q2)?;
    let n = q1.len();
    let a = fft(&q1.values);
    let b = fft(&q2.values);
    let prod: Vec<Complex<f64>> = a.iter().zip(&b).map(|(x, y)| x.conj() * y).collect();
    let scale = 2.0 * PI / n as f64;
    Ok(ifft_real(prod).into_iter().map(|v| v * scale).collect())
}

/// Newton's method for a stationary point of the trigonometric interpolant
/// `c`, kept within `radius` of `start`.
fn polish_max(c: &TrigInterpolant, start: f64, radius: f64) -> f64 {
    let mut s = start;
    for _ in 0..20 {
        let (_, d1, d2) = c.eval_with_derivatives(s);
        if !(d2[0] < 0.0) {
            break;
        }
        let step = -d1[0] / d2[0];
        let next = (s + step).clamp(start - radius, start + radius);
        if (next - s).abs() <= 1e-15 * (1.0 + s.abs()) {
            s = next;
            break;
        }
        s = next;
    }
    s
}

/// Optimal circular shift of `q2` against `q1`: the grid argmax of the
/// DFT cross-correlation, refined by a parabola through the peak and its
/// neighbours, then polished by Newton's method on the trigonometric
/// interpolant of the correlation.
pub fn optimal_shift(q1: &PhaseSignal, q2: &PhaseSignal) -> Result<ShiftResult> {
    let corr = cross_correlation(q1, q2)?;
    let n = corr.len();
    let (lo, hi) = corr.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = hi.abs().max(lo.abs());
    if hi - lo <= 1e-14 * scale.max(f64::MIN_POSITIVE) || norm(&derivative(q1)) == 0.0 || norm(&derivative(q2)) == 0.0 {
        return Ok(ShiftResult { sigma: 0.0, peak: corr[0], correlation: corr, flat: true, multiple: false });
    }
    let dtheta = 2.0 * PI / n as f64;
    let locals: Vec<usize> =
        (0..n).filter(|&m| corr[m] >= corr[(m + n - 1) % n] && corr[m] >= corr[(m + 1) % n]).collect();
    let grid_best = locals.iter().copied().fold(None, |acc: Option<usize>, m| match acc {
        Some(b) if corr[b] >= corr[m] => Some(b),
        _ => Some(m),
    });
    let grid_best = grid_best.unwrap_or(0);
    let tie = 1e-9 * scale.max(1.0);
    let multiple = locals.iter().filter(|&&m| (corr[m] - corr[grid_best]).abs() <= tie).count() > 1;

    let ti = TrigInterpolant::from_signal(&corr);
    // Every grid maximum is refined; the refined values decide.
    let mut best: Option<(f64, f64)> = None;
    for &m in &locals {
        let (cm, cp, cn) = (corr[m], corr[(m + 1) % n], corr[(m + n - 1) % n]);
        let denom = cn - 2.0 * cm + cp;
        let off = if denom < 0.0 { (0.5 * (cn - cp) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        let start = (m as f64 + off) * dtheta;
        let s = polish_max(&ti, start, dtheta);
        let v = ti.eval_scalar(s);
        let s = if v >= cm { s } else { m as f64 * dtheta };
        let v = v.max(cm);
        let s = snap(s.rem_euclid(2.0 * PI), dtheta, n);
        best = match best {
            Some((bs, bv)) if bv > v + tie || ((bv - v).abs() <= tie && bs <= s) => Some((bs, bv)),
            _ => Some((s, v)),
        };
    }
    let (sigma, peak) = best.unwrap();
    Ok(ShiftResult { sigma, peak, correlation: corr, flat: false, multiple })
}

/// Rounds a shift in `[0, 2π]` onto the grid when it lies within `1e-9`
/// steps of a node, mapping `2π` to `0`.
fn snap(sigma: f64, dtheta: f64, n: usize) -> f64 {
    let steps = sigma / dtheta;
    if (steps - steps.round()).abs() <= 1e-9 {
        (steps.round() as usize % n) as f64 * dtheta
    } else {
        sigma
    }
}

/// Lexicographic order of sample vectors, used to evaluate distances with a
/// canonical argument order so that they are exactly symmetric.
fn ordered<'a>(a: &'a PhaseSignal, b: &'a PhaseSignal) -> (&'a PhaseSignal, &'a PhaseSignal) {
    for (x, y) in a.values.iter().zip(&b.values) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return (a, b),
            std::cmp::Ordering::Greater => return (b, a),
            std::cmp::Ordering::Equal => {}
        }
    }
    (a, b)
}

/// Angle between two nonzero signals, `2·atan2(‖â − b̂‖, ‖â + b̂‖)`, which
/// equals `arccos(⟨â, b̂⟩)` and vanishes exactly for parallel signals.
fn angle(a: &PhaseSignal, b: &PhaseSignal) -> Result<f64> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroSignal("scale-invariant distance of a zero signal is undefined".into()));
    }
    let ua = a.scale(1.0 / na);
    let ub = b.scale(1.0 / nb);
    let diff = norm(&ua.axpy(-1.0, &ub)?);
    let sum = norm(&ua.axpy(1.0, &ub)?);
    Ok(2.0 * diff.atan2(sum))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distance {
    pub value: f64,
    /// Optimal shift of the second argument, for spaces C and D.
    pub shift: Option<ShiftResult>,
    /// Space D fell back to space B because a signal is constant.
    pub fell_back: bool,
}

/// Geodesic distance between `[q1]` and `[q2]`, with diagnostics.
pub fn distance_detailed(space: PrcSpace, q1: &PhaseSignal, q2: &PhaseSignal) -> Result<Distance> {
    same_grid(q1, q2)?;
    let (a, b) = ordered(q1, q2);
    let swapped = !std::ptr::eq(a, q1);
    let plain = |value| Distance { value, shift: None, fell_back: false };
    match space {
        PrcSpace::A => Ok(plain(norm(&a.axpy(-1.0, b)?))),
        PrcSpace::B => Ok(plain(angle(a, b)?)),
        PrcSpace::C | PrcSpace::D => {
            let sh = optimal_shift(a, b)?;
            if sh.flat && space == PrcSpace::D {
                return Ok(Distance { value: angle(a, b)?, shift: None, fell_back: true });
            }
            let bs = b.shifted(sh.sigma);
            let value = if space == PrcSpace::C { norm(&a.axpy(-1.0, &bs)?) } else { angle(a, &bs)? };
            let shift = if swapped {
                // Report the shift of q2 relative to q1.
                ShiftResult { sigma: (-sh.sigma).rem_euclid(2.0 * PI), ..sh }
            } else {
                sh
            };
            Ok(Distance { value, shift: Some(shift), fell_back: false })
        }
    }
}

/// Geodesic distance between `[q1]` and `[q2]` in `space`.
pub fn distance(space: PrcSpace, q1: &PhaseSignal, q2: &PhaseSignal) -> Result<f64> {
    Ok(distance_detailed(space, q1, q2)?.value)
}

/// Removes from `eta` its components along the vertical directions at `q`:
/// `q` itself for scale quotients and `q′` for shift quotients.
pub fn horizontal_project(space: PrcSpace, q: &PhaseSignal, eta: &PhaseSignal) -> Result<PhaseSignal> {
    same_grid(q, eta)?;
    let mut out = eta.clone();
    if space.scale_invariant() {
        let qq = inner(q, q)?;
        if qq == 0.0 {
            return Err(Error::ZeroSignal("horizontal projection at a zero signal".into()));
        }
        out = out.axpy(-inner(eta, q)? / qq, q)?;
    }
    if space.shift_invariant() {
        let dq = derivative(q);
        let dd = inner(&dq, &dq)?;
        if dd == 0.0 {
            if space == PrcSpace::C {
                return Err(Error::ZeroSignal("horizontal projection at a constant signal".into()));
            }
        } else {
            out = out.axpy(-inner(&out, &dq)? / dd, &dq)?;
        }
    }
    Ok(out)
}

/// Riemannian metric `g_q(ξ, ζ)` on horizontal vectors at `q`.
pub fn metric(space: PrcSpace, q: &PhaseSignal, xi: &PhaseSignal, zeta: &PhaseSignal) -> Result<f64> {
    let v = inner(xi, zeta)?;
    if space.scale_invariant() {
        let qq = inner(q, q)?;
        if qq == 0.0 {
            return Err(Error::ZeroSignal("metric at a zero signal".into()));
        }
        Ok(v / qq)
    } else {
        same_grid(q, xi)?;
        Ok(v)
    }
}

/// `‖ξ‖_q` for a horizontal vector `ξ`.
pub fn norm_in_space(space: PrcSpace, q: &PhaseSignal, xi: &PhaseSignal) -> Result<f64> {
    Ok(metric(space, q, xi, xi)?.sqrt())
}
