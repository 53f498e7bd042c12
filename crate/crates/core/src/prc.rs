//! Infinitesimal phase response curves by the adjoint method, finite phase
//! response curves by direct simulation, and the two reduced phase models.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::integrate::{flow, flow_observed, impulse_jump, integrate_with_input, Blocks, Input, Tolerances};
use crate::interp::{PeriodicSpline, TrigInterpolant};
use crate::metrics::PhaseSignal;
use crate::models::Model;
use crate::orbit::{factor, newton_orbit, segment_flows, CirclePartition, NewtonOptions, PeriodicOrbit, Scheme};
use crate::{Error, Result};

/// Nodal values `p_i ≈ ∇Θ(x^γ(θ_i))` of the asymptotic phase gradient.
#[derive(Debug, Clone)]
pub struct GradientCurve {
    partition: CirclePartition,
    p: Vec<DVector<f64>>,
    omega: f64,
    xi: f64,
}

impl GradientCurve {
    pub fn partition(&self) -> &CirclePartition {
        &self.partition
    }
    pub fn points(&self) -> &[DVector<f64>] {
        &self.p
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    /// Border unknown of the bordered solve; zero for an exact kernel.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// `max_i |⟨p_i, f(x_i, 0, λ)⟩ − ω|` over all nodes.
    pub fn normalization_error<M: Model + ?Sized>(&self, model: &M, orbit: &PeriodicOrbit) -> f64 {
        orbit.tangents(model).iter().zip(&self.p).map(|(f, p)| (f.dot(p) - self.omega).abs()).fold(0.0, f64::max)
    }
}

/// The factored bordered adjoint matrix with the pieces reused by the
/// sensitivity solves.
pub(crate) struct AdjointSystem {
    pub lu: LU<f64, Dyn, Dyn>,
    /// `∂f/∂x` at every node.
    pub jac: Vec<DMatrix<f64>>,
    pub weights: Vec<f64>,
}

pub(crate) fn adjoint_system<M: Model + ?Sized>(model: &M, orbit: &PeriodicOrbit) -> Result<AdjointSystem> {
    let n = orbit.dim();
    if model.dim() != n || model.n_params() != orbit.lambda().len() {
        return Err(Error::InvalidArgument("orbit does not belong to this model".into()));
    }
    let segs = orbit.segments();
    let lambda = orbit.lambda();
    let omega = orbit.omega();
    let size = (segs + 1) * n + 1;
    let tangents = orbit.tangents(model);
    let jac: Vec<DMatrix<f64>> = orbit.points().iter().map(|x| model.jac_x(x.as_slice(), 0.0, lambda)).collect();
    let weights = orbit.partition().node_weights(orbit.scheme());
    let mut m = DMatrix::zeros(size, size);
    let eye = DMatrix::<f64>::identity(n, n);
    match orbit.scheme() {
        Scheme::MultipleShooting => {
            let fl = segment_flows(
                model,
                orbit.partition(),
                orbit.points(),
                omega,
                lambda,
                orbit.integrator(),
                Blocks::FUNDAMENTAL,
            )?;
            for (i, f) in fl.iter().enumerate() {
                m.view_mut((i * n, i * n), (n, n)).copy_from(&eye);
                m.view_mut((i * n, (i + 1) * n), (n, n)).copy_from(&(-f.phi.as_ref().unwrap().transpose()));
            }
        }
        Scheme::Trapezoidal => {
            for i in 0..segs {
                let c = 0.5 * orbit.partition().step(i) / omega;
                m.view_mut((i * n, i * n), (n, n)).copy_from(&(-&eye + jac[i].transpose() * c));
                m.view_mut((i * n, (i + 1) * n), (n, n)).copy_from(&(&eye + jac[i + 1].transpose() * c));
            }
        }
    }
    for k in 0..n {
        m[(segs * n + k, k)] = -1.0;
        m[(segs * n + k, segs * n + k)] = 1.0;
    }
    for (i, f) in tangents.iter().enumerate() {
        for k in 0..n {
            m[(i * n + k, size - 1)] = f[k];
            m[(size - 1, i * n + k)] = weights[i] * f[k];
        }
    }
    m[(size - 1, size - 1)] = 1.0;
    let lu = factor(m, "adjoint system")?;
    Ok(AdjointSystem { lu, jac, weights })
}

/// Splits a stacked `[p_0, …, p_N, ξ]` vector.
pub(crate) fn unstack(z: &DVector<f64>, n: usize) -> (Vec<DVector<f64>>, f64) {
    let nodes = (z.len() - 1) / n;
    ((0..nodes).map(|i| z.rows(i * n, n).into_owned()).collect(), z[z.len() - 1])
}

/// `q_i = ⟨p_i, ∂f/∂u(x_i, 0, λ)⟩` for `i = 0..N`.
pub(crate) fn contract_input<M: Model + ?Sized>(model: &M, orbit: &PeriodicOrbit, p: &[DVector<f64>]) -> Vec<f64> {
    (0..orbit.segments()).map(|i| p[i].dot(&model.jac_u(orbit.point(i).as_slice(), 0.0, orbit.lambda()))).collect()
}

/// Adjoint solution and the infinitesimal PRC on the orbit grid.
pub fn adjoint_prc<M: Model + ?Sized>(model: &M, orbit: &PeriodicOrbit) -> Result<(GradientCurve, PhaseSignal)> {
    if !orbit.partition().is_uniform() {
        return Err(Error::GridMismatch("the infinitesimal PRC needs an orbit on a uniform grid".into()));
    }
    let sys = adjoint_system(model, orbit)?;
    let n = orbit.dim();
    let size = (orbit.segments() + 1) * n + 1;
    let mut rhs = DVector::zeros(size);
    rhs[size - 1] = orbit.omega();
    let z = sys.lu.solve(&rhs).ok_or_else(|| Error::Singular("adjoint system".into()))?;
    let (p, xi) = unstack(&z, n);
    let q = PhaseSignal::new(contract_input(model, orbit, &p))?;
    Ok((GradientCurve { partition: orbit.partition().clone(), p, omega: orbit.omega(), xi }, q))
}

/// What is applied to the oscillator for a finite PRC: a Dirac impulse of
/// weight `amplitude`, or an input signal starting at the stimulated phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Stimulus {
    Impulse { amplitude: f64 },
    Signal { input: Input },
}

impl Stimulus {
    fn validate(&self) -> Result<()> {
        match self {
            Stimulus::Impulse { amplitude } if !amplitude.is_finite() => {
                Err(Error::InvalidArgument(format!("impulse amplitude must be finite, got {amplitude}")))
            }
            Stimulus::Impulse { .. } => Ok(()),
            Stimulus::Signal { input } => {
                input.validate()?;
                if input.support_end().is_none() {
                    return Err(Error::InvalidArgument("stimulus signal must switch off after a finite time".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DirectOptions {
    /// Convergence radius around the orbit; `1e-6·diameter` when unset.
    pub epsilon: Option<f64>,
    /// Horizon, in periods after the stimulus ends.
    pub max_periods: f64,
    /// Extra periods integrated after convergence before reading off the
    /// phase.
    pub post_convergence_periods: f64,
    /// Samples of the reference orbit used for the phase estimate.
    pub reference_samples: usize,
    pub integrator: Tolerances,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self {
            epsilon: None,
            max_periods: 50.0,
            post_convergence_periods: 0.0,
            reference_samples: 1024,
            integrator: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePrc {
    pub phases: Vec<f64>,
    /// Asymptotic phase shifts in `[−π, π)`.
    pub shifts: Vec<f64>,
    pub stimulus: Stimulus,
    pub epsilon: f64,
}

/// `x ↦ x` wrapped to `[−π, π)`.
pub fn wrap_phase(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// The orbit resampled finely through the flow, for distance and phase
/// queries.
struct Reference {
    nodes: Vec<DVector<f64>>,
    interp: TrigInterpolant,
    spacing: f64,
}

impl Reference {
    fn build<M: Model + ?Sized>(model: &M, orbit: &PeriodicOrbit, samples: usize, tol: &Tolerances) -> Result<Self> {
        let segs = orbit.segments();
        let sub = samples.div_ceil(segs).max(1);
        let total = sub * segs;
        let dt = orbit.period() / total as f64;
        let chunks: Vec<Vec<DVector<f64>>> = (0..segs)
            .into_par_iter()
            .map(|i| {
                let mut x = orbit.point(i).clone();
                let mut out = Vec::with_capacity(sub);
                out.push(x.clone());
                for _ in 1..sub {
                    x = flow(model, dt, x.as_slice(), &Input::Zero, orbit.lambda(), tol, Blocks::STATE)?.x_end;
                    out.push(x.clone());
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let nodes: Vec<DVector<f64>> = chunks.into_iter().flatten().collect();
        let n = orbit.dim();
        let interp = TrigInterpolant::new(&DMatrix::from_fn(n, total, |d, j| nodes[j][d]));
        let spacing = (0..total).map(|j| (&nodes[(j + 1) % total] - &nodes[j]).norm()).fold(0.0, f64::max);
        Ok(Self { nodes, interp, spacing })
    }

    /// Closest orbit phase to `x` and the distance to it.
    fn project(&self, x: &DVector<f64>) -> (f64, f64) {
        let (j, dmin) = self
            .nodes
            .iter()
            .enumerate()
            .map(|(j, y)| (j, (x - y).norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let m = self.nodes.len();
        let h = 2.0 * PI / m as f64;
        let mut theta = j as f64 * h;
        let mut best = (theta, dmin);
        for _ in 0..4 {
            let (v, d1, d2) = self.interp.eval_with_derivatives(theta);
            let e = x - &v;
            let g1 = -e.dot(&d1);
            let g2 = d1.norm_squared() - e.dot(&d2);
            if !(g2 > 0.0) {
                break;
            }
            let step = (-g1 / g2).clamp(-h, h);
            theta += step;
            let d = (x - self.interp.eval(theta)).norm();
            if d < best.1 {
                best = (theta, d);
            }
            if step.abs() < 1e-14 {
                break;
            }
        }
        (best.0.rem_euclid(2.0 * PI), best.1)
    }
}

/// Finite PRC by direct simulation from each of `phases`.
///
/// A trapezoidal orbit is first refined by multiple shooting, since the
/// perturbed trajectories converge to the exact cycle and not to its
/// discretization.
pub fn direct_prc<M: Model + ?Sized>(
    model: &M,
    orbit: &PeriodicOrbit,
    stimulus: &Stimulus,
    phases: &[f64],
    opts: &DirectOptions,
) -> Result<FinitePrc> {
    stimulus.validate()?;
    if let Some(&bad) = phases.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(format!("stimulus phase {bad} is not finite")));
    }
    if !(opts.max_periods > 0.0) || !(opts.post_convergence_periods >= 0.0) || opts.reference_samples < 2 {
        return Err(Error::InvalidArgument("direct PRC options out of range".into()));
    }
    let refined;
    let orbit = match orbit.scheme() {
        Scheme::MultipleShooting => orbit,
        Scheme::Trapezoidal => {
            let newton = NewtonOptions { integrator: opts.integrator, ..NewtonOptions::default() };
            refined = newton_orbit(
                model,
                orbit.lambda(),
                &orbit.as_guess(),
                Scheme::MultipleShooting,
                orbit.phase_condition(),
                &newton,
            )?;
            &refined
        }
    };
    let tol = &opts.integrator;
    let reference = Reference::build(model, orbit, opts.reference_samples, tol)?;
    let diameter = orbit.diameter();
    let eps = opts.epsilon.unwrap_or(1e-6 * diameter);
    let floor = 10.0 * (tol.atol + tol.rtol * diameter);
    if !(eps > floor) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {eps:e} is below the integrator accuracy floor {floor:e}"
        )));
    }
    let omega = orbit.omega();
    let period = orbit.period();
    let lambda = orbit.lambda();
    let start = |theta: f64| reference.interp.eval(theta);
    let shifts = phases
        .par_iter()
        .map(|&theta| {
            let x0 = start(theta);
            let (x1, t_on) = match stimulus {
                Stimulus::Impulse { amplitude } => (impulse_jump(model, x0.as_slice(), *amplitude, lambda)?, 0.0),
                Stimulus::Signal { input } => {
                    let end = input.support_end().unwrap_or(0.0);
                    let x = flow_observed(model, 0.0, end, x0.as_slice(), input, lambda, tol, |_, _| true)?;
                    (x, end)
                }
            };
            let horizon = t_on + opts.max_periods * period;
            let mut hit: Option<f64> = None;
            let mut t_last = t_on;
            let mut x = if reference.project(&x1).1 < eps {
                hit = Some(t_on);
                x1.clone()
            } else {
                flow_observed(model, t_on, horizon, x1.as_slice(), &Input::Zero, lambda, tol, |t, y| {
                    t_last = t;
                    let y = DVector::from_column_slice(y);
                    // Cheap node distance first; the refined distance can
                    // only be smaller by about one node spacing.
                    let coarse = reference.nodes.iter().map(|r| (&y - r).norm()).fold(f64::INFINITY, f64::min);
                    if coarse > eps + reference.spacing {
                        return true;
                    }
                    if reference.project(&y).1 < eps {
                        hit = Some(t);
                        return false;
                    }
                    true
                })?
            };
            let mut t_star = hit.ok_or_else(|| {
                Error::NotConverged(format!(
                    "stimulus at phase {theta:.6} not back within {eps:e} of the orbit after {} periods (last t = {t_last:.3})",
                    opts.max_periods
                ))
            })?;
            if opts.post_convergence_periods > 0.0 {
                let extra = opts.post_convergence_periods * period;
                x = flow(model, extra, x.as_slice(), &Input::Zero, lambda, tol, Blocks::STATE)?.x_end;
                t_star += extra;
            }
            let (theta_star, _) = reference.project(&x);
            Ok(wrap_phase(theta_star - (omega * t_star + theta)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(FinitePrc { phases: phases.to_vec(), shifts, stimulus: stimulus.clone(), epsilon: eps })
}

/// Phase transition samples `θ⁺_i = θ_i + Δθ_i mod 2π`.
pub fn ptc_from_prc(prc: &FinitePrc) -> Vec<f64> {
    prc.phases.iter().zip(&prc.shifts).map(|(t, d)| (t + d).rem_euclid(2.0 * PI)).collect()
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Fourier moments `U_k = ∫ e^{ikωs} u(s) ds` for `k = 0..=kmax` by
/// composite Gauss–Legendre quadrature on the smooth pieces of `u`.
fn input_moments(input: &Input, omega: f64, kmax: usize) -> Result<Vec<Complex<f64>>> {
    input.validate()?;
    let end = input
        .support_end()
        .ok_or_else(|| Error::InvalidArgument("convolution needs an input with finite support".into()))?;
    let mut pts = vec![0.0];
    pts.extend(input.breakpoints().into_iter().filter(|&b| b > 0.0 && b < end));
    pts.push(end);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut acc = vec![Complex::new(0.0, 0.0); kmax + 1];
    // Panels no longer than a quarter of the shortest resolved period.
    let hmax = if kmax == 0 { f64::INFINITY } else { PI / (2.0 * omega * kmax as f64) };
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let panels = ((b - a) / hmax).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for &(x, wt) in &GAUSS5 {
                let s = mid + 0.5 * h * x;
                let u = input.value(s.clamp(a + 1e-12 * (b - a), b - 1e-12 * (b - a)));
                if u == 0.0 {
                    continue;
                }
                let base = Complex::from_polar(1.0, omega * s);
                let mut e = Complex::new(1.0, 0.0);
                let scale = 0.5 * h * wt * u;
                for a_k in acc.iter_mut() {
                    *a_k += e * scale;
                    e *= base;
                }
            }
        }
    }
    Ok(acc)
}

/// First-order estimate `∫ q(ωs + θ) u(s) ds` of the phase shift caused by
/// `stimulus` applied at phase `θ`, for every phase in `thetas`.
pub fn convolution_prc_curve(q: &PhaseSignal, omega: f64, stimulus: &Stimulus, thetas: &[f64]) -> Result<Vec<f64>> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("angular frequency must be positive, got {omega}")));
    }
    let ti = q.interpolant();
    match stimulus {
        Stimulus::Impulse { amplitude } => Ok(thetas.iter().map(|&t| amplitude * ti.eval_scalar(t)).collect()),
        Stimulus::Signal { input } => {
            let (a, b) = ti.coefficients();
            let kmax = a.ncols() - 1;
            let moments = input_moments(input, omega, kmax)?;
            Ok(thetas
                .iter()
                .map(|&t| {
                    let mut s = a[(0, 0)] * moments[0].re;
                    for k in 1..=kmax {
                        let z = Complex::from_polar(1.0, k as f64 * t) * moments[k];
                        s += a[(0, k)] * z.re + b[(0, k)] * z.im;
                    }
                    s
                })
                .collect())
        }
    }
}

pub fn convolution_prc(q: &PhaseSignal, omega: f64, stimulus: &Stimulus, theta: f64) -> Result<f64> {
    Ok(convolution_prc_curve(q, omega, stimulus, &[theta])?[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub t: Vec<f64>,
    /// `θ(t)` without wrapping.
    pub unwrapped: Vec<f64>,
    /// `θ(t) mod 2π`.
    pub theta: Vec<f64>,
    /// `h̃(θ(t))`.
    pub y: Vec<f64>,
}

/// Integrates `θ̇ = ω + q(θ) u(t)` and reads the output through `h̃`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_phase_model(
    omega: f64,
    q: &PhaseSignal,
    output: &PhaseSignal,
    input: &Input,
    theta0: f64,
    t_end: f64,
    tol: &Tolerances,
) -> Result<PhaseTrajectory> {
    if !(t_end > 0.0) || !omega.is_finite() || !theta0.is_finite() {
        return Err(Error::InvalidArgument("phase model needs t_end > 0 and finite ω, θ0".into()));
    }
    input.validate()?;
    let qi = q.interpolant();
    let hi = output.interpolant();
    let mut t = vec![0.0];
    let mut unwrapped = vec![theta0];
    let mut y = [theta0];
    integrate_with_input(
        |_, y, u, out| out[0] = omega + qi.eval_scalar(y[0]) * u,
        0.0,
        t_end,
        &mut y,
        input,
        tol,
        |s, y| {
            t.push(s);
            unwrapped.push(y[0]);
            true
        },
    )?;
    let theta: Vec<f64> = unwrapped.iter().map(|v| v.rem_euclid(2.0 * PI)).collect();
    let y = theta.iter().map(|&v| hi.eval_scalar(v)).collect();
    Ok(PhaseTrajectory { t, unwrapped, theta, y })
}

/// Phase resetting rule of the hybrid phase model.
#[derive(Debug, Clone)]
pub enum PhaseReset {
    Finite(FinitePrc),
    /// `θ⁺ = θ + α q(θ)`.
    Infinitesimal {
        alpha: f64,
        q: PhaseSignal,
    },
}

enum ResetMap {
    Trig { offset: f64, interp: TrigInterpolant },
    Spline { offset: f64, spline: PeriodicSpline },
    Constant(f64),
}

impl ResetMap {
    fn new(reset: &PhaseReset) -> Result<Self> {
        match reset {
            PhaseReset::Infinitesimal { alpha, q } => {
                Ok(ResetMap::Trig { offset: 0.0, interp: q.scale(*alpha).interpolant() })
            }
            PhaseReset::Finite(prc) => {
                if prc.phases.len() != prc.shifts.len() || prc.phases.is_empty() {
                    return Err(Error::InvalidArgument("finite PRC phases and shifts differ in length".into()));
                }
                let m = prc.phases.len();
                let mut pairs: Vec<(f64, f64)> =
                    prc.phases.iter().map(|t| t.rem_euclid(2.0 * PI)).zip(prc.shifts.iter().copied()).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                if m < 3 {
                    return Ok(ResetMap::Constant(pairs.iter().map(|p| p.1).sum::<f64>() / m as f64));
                }
                let h = 2.0 * PI / m as f64;
                let offset = pairs[0].0;
                if pairs.iter().enumerate().all(|(j, p)| (p.0 - offset - j as f64 * h).abs() <= 1e-9) {
                    let vals: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                    return Ok(ResetMap::Trig { offset, interp: TrigInterpolant::from_signal(&vals) });
                }
                let mut knots: Vec<f64> = pairs.iter().map(|p| p.0 - offset).collect();
                if knots.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidArgument("finite PRC phases must be distinct modulo 2π".into()));
                }
                knots.push(2.0 * PI);
                let vals = DMatrix::from_fn(1, m, |_, j| pairs[j].1);
                Ok(ResetMap::Spline { offset, spline: PeriodicSpline::new(&knots, &vals) })
            }
        }
    }

    fn shift(&self, theta: f64) -> f64 {
        match self {
            ResetMap::Trig { offset, interp } => interp.eval_scalar(theta - offset),
            ResetMap::Spline { offset, spline } => spline.eval(theta - offset)[0],
            ResetMap::Constant(c) => *c,
        }
    }
}

/// A phase jump of the hybrid phase model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseJump {
    pub t: f64,
    /// Unwrapped phase just before and after the impulse.
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridTrajectory {
    pub omega: f64,
    pub theta0: f64,
    pub t_end: f64,
    pub jumps: Vec<PhaseJump>,
}

impl HybridTrajectory {
    /// Unwrapped phase at `t`, right-continuous at the impulse times.
    pub fn unwrapped_at(&self, t: f64) -> f64 {
        match self.jumps.iter().rev().find(|j| j.t <= t) {
            Some(j) => j.after + self.omega * (t - j.t),
            None => self.theta0 + self.omega * t,
        }
    }

    pub fn phase_at(&self, t: f64) -> f64 {
        self.unwrapped_at(t).rem_euclid(2.0 * PI)
    }

    pub fn final_phase(&self) -> f64 {
        self.phase_at(self.t_end)
    }
}

/// Free rotation `θ̇ = ω` with jumps `θ⁺ = θ + PRC(θ)` at the impulse times
/// in `[0, t_end]`.
pub fn simulate_hybrid_phase_model(
    omega: f64,
    reset: &PhaseReset,
    impulse_times: &[f64],
    theta0: f64,
    t_end: f64,
) -> Result<HybridTrajectory> {
    if !(t_end >= 0.0) || !omega.is_finite() || !theta0.is_finite() {
        return Err(Error::InvalidArgument("hybrid phase model needs t_end ≥ 0 and finite ω, θ0".into()));
    }
    if impulse_times.windows(2).any(|w| !(w[1] > w[0])) || impulse_times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("impulse times must be finite and strictly increasing".into()));
    }
    let map = ResetMap::new(reset)?;
    let mut traj = HybridTrajectory { omega, theta0, t_end, jumps: Vec::new() };
    for &t in impulse_times.iter().filter(|&&t| (0.0..=t_end).contains(&t)) {
        let before = traj.unwrapped_at(t);
        let after = before + map.shift(before.rem_euclid(2.0 * PI));
        traj.jumps.push(PhaseJump { t, before, after });
    }
    Ok(traj)
}
