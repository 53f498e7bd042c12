//! Adaptive Dormand–Prince 5(4) integration of a model, optionally jointly
//! with its variational equations `Φ̇ = A Φ` and parameter sensitivities
//! `Ṡ = A S + ∂f/∂λ`.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};
use serde::{Deserialize, Serialize};

use crate::models::Model;
use crate::{Error, Result};

/// A scalar input signal `u(t)`, with `t` measured from the instant it is
/// applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Input {
    Zero,
    /// Rectangular pulse of height `amplitude` on `[onset, onset + duration)`.
    Pulse {
        onset: f64,
        duration: f64,
        amplitude: f64,
    },
    /// `amplitude·sin(angular_frequency·t + phase)`, switched off after
    /// `duration` if one is given.
    Sinusoid {
        amplitude: f64,
        angular_frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        duration: Option<f64>,
    },
}

impl Input {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Input::Zero => 0.0,
            Input::Pulse { onset, duration, amplitude } => {
                if t >= onset && t < onset + duration {
                    amplitude
                } else {
                    0.0
                }
            }
            Input::Sinusoid { amplitude, angular_frequency, phase, duration } => {
                if t < 0.0 || duration.is_some_and(|d| t >= d) {
                    0.0
                } else {
                    amplitude * (angular_frequency * t + phase).sin()
                }
            }
        }
    }

    /// Instants where `u` is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Input::Zero => vec![],
            Input::Pulse { onset, duration, .. } => vec![onset, onset + duration],
            Input::Sinusoid { duration, .. } => {
                let mut v = vec![0.0];
                v.extend(duration);
                v
            }
        }
    }

    /// Time after which `u ≡ 0`, if any.
    pub fn support_end(&self) -> Option<f64> {
        match *self {
            Input::Zero => Some(0.0),
            Input::Pulse { onset, duration, .. } => Some(onset + duration),
            Input::Sinusoid { duration, .. } => duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Input::Zero => true,
            Input::Pulse { onset, duration, amplitude } => {
                onset.is_finite() && onset >= 0.0 && duration.is_finite() && duration >= 0.0 && amplitude.is_finite()
            }
            Input::Sinusoid { amplitude, angular_frequency, phase, duration } => {
                amplitude.is_finite()
                    && angular_frequency.is_finite()
                    && phase.is_finite()
                    && duration.is_none_or(|d| d.is_finite() && d >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid input signal {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-11, max_steps: 5_000_000 }
    }
}

/// Which derivative blocks [`flow`] integrates alongside the state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Blocks {
    pub fundamental: bool,
    pub parameters: bool,
}

impl Blocks {
    pub const STATE: Blocks = Blocks { fundamental: false, parameters: false };
    pub const FUNDAMENTAL: Blocks = Blocks { fundamental: true, parameters: false };
    pub const ALL: Blocks = Blocks { fundamental: true, parameters: true };
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub x_end: DVector<f64>,
    /// `∂φ/∂x0`.
    pub phi: Option<DMatrix<f64>>,
    /// `∂φ/∂λ`.
    pub dphi_dlambda: Option<DMatrix<f64>>,
    /// `f(x_end, u(t), λ)`.
    pub dphi_dt: DVector<f64>,
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Integrates `ẏ = F(t, y)` from `t0` to `t1 > t0` in place. `observe` is
/// called after every accepted step and stops the integration early when it
/// returns `false`; the stopping time is returned.
pub(crate) fn dopri<F, O>(mut rhs: F, t0: f64, t1: f64, y: &mut [f64], tol: &Tolerances, mut observe: O) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]) -> bool,
{
    let d = y.len();
    if t1 <= t0 {
        return Ok(t0);
    }
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; d]; 7];
    let mut ytmp = vec![0.0; d];
    let mut ynew = vec![0.0; d];
    let mut t = t0;
    rhs(t, y, &mut k[0]);
    if k[0].iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    let scale = |a: f64, b: f64| tol.atol + tol.rtol * a.abs().max(b.abs());
    let rms = |v: &[f64], base: &[f64]| {
        (v.iter().zip(base).map(|(a, b)| (a / scale(*b, *b)).powi(2)).sum::<f64>() / d as f64).sqrt()
    };

    // Starting step after Hairer, Nørsett and Wanner.
    let span = t1 - t0;
    let mut h = {
        let d0 = rms(y, y);
        let d1 = rms(&k[0], y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        for i in 0..d {
            ytmp[i] = y[i] + h0 * k[0][i];
        }
        rhs(t + h0, &ytmp, &mut k[1]);
        let diff: Vec<f64> = k[1].iter().zip(&k[0]).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff, y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(span)
    };

    let mut steps = 0usize;
    let mut last_rejected = false;
    while t < t1 {
        if steps >= tol.max_steps {
            return Err(Error::TooManySteps(tol.max_steps));
        }
        let last = t + h >= t1 || (t1 - (t + h)) < 1e-12 * t1.abs().max(1.0);
        if last {
            h = t1 - t;
        }
        if h.abs() <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t });
        }
        for s in 1..7 {
            for i in 0..d {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            rhs(t + C[s] * h, &ytmp, &mut k[s]);
        }
        // Stage 7 is evaluated at the 5th-order solution, which ytmp holds.
        ynew.copy_from_slice(&ytmp);
        let mut err = 0.0;
        let mut finite = true;
        for i in 0..d {
            let mut e = 0.0;
            for (s, ks) in k.iter().enumerate() {
                e += E[s] * ks[i];
            }
            e *= h;
            if !ynew[i].is_finite() || !k[6][i].is_finite() {
                finite = false;
            }
            let sc = scale(y[i], ynew[i]);
            err += (e / sc).powi(2);
        }
        let err = if finite { (err / d as f64).sqrt() } else { f64::INFINITY };
        steps += 1;
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&ynew);
            k.swap(0, 6);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= if last_rejected { fac.min(1.0) } else { fac };
            last_rejected = false;
            if !observe(t, y) {
                return Ok(t);
            }
        } else {
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= fac;
            last_rejected = true;
        }
    }
    Ok(t)
}

fn segments(input: &Input, t0: f64, t1: f64) -> Vec<f64> {
    let mut pts = vec![t0];
    let mut bps: Vec<f64> = input.breakpoints().into_iter().filter(|&b| b > t0 && b < t1).collect();
    bps.sort_by(f64::total_cmp);
    pts.extend(bps);
    pts.push(t1);
    pts.dedup();
    pts
}

/// Integrates `ẏ = F(t, y, u(t))` from `t0` to `t1`, restarting at every
/// discontinuity of the input. `observe` sees every accepted step and can
/// stop the integration; the final time is returned.
pub(crate) fn integrate_with_input<F, O>(
    rhs: F,
    t0: f64,
    t1: f64,
    y: &mut [f64],
    input: &Input,
    tol: &Tolerances,
    mut observe: O,
) -> Result<f64>
where
    F: Fn(f64, &[f64], f64, &mut [f64]),
    O: FnMut(f64, &[f64]) -> bool,
{
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidArgument(format!("integration interval [{t0}, {t1}] is invalid")));
    }
    let pts = segments(input, t0, t1);
    let mut end = t0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // Evaluate the input strictly inside the segment so that a
        // discontinuity at either end is never sampled from the wrong side.
        let u_at = |t: f64| input.value(t.clamp(a + (b - a) * 1e-12, b - (b - a) * 1e-12));
        let mut stop = false;
        end = dopri(
            |t, y, out| rhs(t, y, u_at(t), out),
            a,
            b,
            y,
            tol,
            |t, y| {
                let go = observe(t, y);
                stop = !go;
                go
            },
        )?;
        if stop {
            break;
        }
    }
    Ok(end)
}

/// Integrates the model from `t0` to `t1` with the input evaluated at
/// absolute time, calling `observe(t, x)` after every accepted step.
#[allow(clippy::too_many_arguments)]
pub fn flow_observed<M, O>(
    model: &M,
    t0: f64,
    t1: f64,
    x0: &[f64],
    input: &Input,
    lambda: &[f64],
    tol: &Tolerances,
    observe: O,
) -> Result<DVector<f64>>
where
    M: Model + ?Sized,
    O: FnMut(f64, &[f64]) -> bool,
{
    let mut y = x0.to_vec();
    integrate_with_input(|_, y, u, out| model.rhs(y, u, lambda, out), t0, t1, &mut y, input, tol, observe)?;
    Ok(DVector::from_vec(y))
}

/// Flow `φ(t, x0, u)` over `[0, t]` with the requested derivative blocks.
pub fn flow<M: Model + ?Sized>(
    model: &M,
    t: f64,
    x0: &[f64],
    input: &Input,
    lambda: &[f64],
    tol: &Tolerances,
    blocks: Blocks,
) -> Result<FlowResult> {
    flow_interval(model, 0.0, t, x0, input, lambda, tol, blocks)
}

/// As [`flow`] on `[t0, t1]`, with the input read at absolute time.
#[allow(clippy::too_many_arguments)]
pub fn flow_interval<M: Model + ?Sized>(
    model: &M,
    t0: f64,
    t1: f64,
    x0: &[f64],
    input: &Input,
    lambda: &[f64],
    tol: &Tolerances,
    blocks: Blocks,
) -> Result<FlowResult> {
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidArgument(format!("integration interval [{t0}, {t1}] is invalid")));
    }
    let n = model.dim();
    if x0.len() != n {
        return Err(Error::InvalidArgument(format!("state has length {}, model dimension is {n}", x0.len())));
    }
    let l = lambda.len();
    let nphi = if blocks.fundamental { n * n } else { 0 };
    let nsen = if blocks.parameters { n * l } else { 0 };
    let mut y = vec![0.0; n + nphi + nsen];
    y[..n].copy_from_slice(x0);
    if blocks.fundamental {
        for i in 0..n {
            y[n + i * n + i] = 1.0;
        }
    }
    let rhs = |_t: f64, y: &[f64], u: f64, dy: &mut [f64]| {
        let (x, rest) = y.split_at(n);
        let (dx, drest) = dy.split_at_mut(n);
        model.rhs(x, u, lambda, dx);
        if nphi + nsen == 0 {
            return;
        }
        let jac = model.jac_x(x, u, lambda);
        if nphi > 0 {
            let phi = DMatrixView::from_slice(&rest[..nphi], n, n);
            let mut dphi = DMatrixViewMut::from_slice(&mut drest[..nphi], n, n);
            dphi.gemm(1.0, &jac, &phi, 0.0);
        }
        if nsen > 0 {
            let s = DMatrixView::from_slice(&rest[nphi..], n, l);
            let mut ds = DMatrixViewMut::from_slice(&mut drest[nphi..], n, l);
            ds.copy_from(&model.jac_p(x, u, lambda));
            ds.gemm(1.0, &jac, &s, 1.0);
        }
    };
    integrate_with_input(rhs, t0, t1, &mut y, input, tol, |_, _| true)?;
    let x_end = DVector::from_column_slice(&y[..n]);
    let u_end = input.value(t1);
    let dphi_dt = model.eval(x_end.as_slice(), u_end, lambda);
    Ok(FlowResult {
        phi: blocks.fundamental.then(|| DMatrix::from_column_slice(n, n, &y[n..n + nphi])),
        dphi_dlambda: blocks.parameters.then(|| DMatrix::from_column_slice(n, l, &y[n + nphi..])),
        x_end,
        dphi_dt,
    })
}

/// The state right after a Dirac impulse of weight `alpha`:
/// `x0 + α·∂f/∂u(x0, 0, λ)`.
pub fn impulse_jump<M: Model + ?Sized>(model: &M, x0: &[f64], alpha: f64, lambda: &[f64]) -> Result<DVector<f64>> {
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("impulse amplitude must be finite, got {alpha}")));
    }
    let b = model.jac_u(x0, 0.0, lambda);
    Ok(DVector::from_column_slice(x0) + b * alpha)
}

/// Applies a Dirac impulse at `x0` and flows for `t` with zero input.
pub fn impulse_flow<M: Model + ?Sized>(
    model: &M,
    x0: &[f64],
    alpha: f64,
    lambda: &[f64],
    t: f64,
    tol: &Tolerances,
) -> Result<DVector<f64>> {
    let x = impulse_jump(model, x0, alpha, lambda)?;
    Ok(flow(model, t, x.as_slice(), &Input::Zero, lambda, tol, Blocks::STATE)?.x_end)
}
