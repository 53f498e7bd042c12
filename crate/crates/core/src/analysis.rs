//! Robustness ranking, identification by gradient descent in a PRC space,
//! and classification against the two canonical PRC shapes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::metrics::{
    distance, distance_detailed, horizontal_project, inner, metric, norm, norm_in_space, PhaseSignal, PrcSpace,
};
use crate::models::Model;
use crate::orbit::{continue_orbit, find_orbit, OrbitOptions, PeriodicOrbit};
use crate::prc::adjoint_prc;
use crate::sensitivity::{sensitivity_bundle, Scaling, SensitivityBundle};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<String>>,
    pub space: PrcSpace,
    pub scaling: Scaling,
    pub r_omega: Vec<f64>,
    pub r_q: Vec<f64>,
    pub rho_omega: Vec<f64>,
    pub rho_q: Vec<f64>,
    /// Set for a measure whose sensitivities all vanish; its ρ is then left
    /// unnormalized.
    pub omega_degenerate: bool,
    pub q_degenerate: bool,
}

impl RobustnessReport {
    /// Parameter indices by decreasing `ρ^q`, ties by index.
    pub fn ranking_q(&self) -> Vec<usize> {
        rank(&self.rho_q)
    }

    pub fn ranking_omega(&self) -> Vec<usize> {
        rank(&self.rho_omega)
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self> {
        if groups.len() != self.labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} groups for {} parameters",
                groups.len(),
                self.labels.len()
            )));
        }
        self.groups = Some(groups);
        Ok(self)
    }
}

fn rank(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

fn normalize(r: &[f64]) -> (Vec<f64>, bool) {
    let m = r.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        (r.to_vec(), true)
    } else {
        (r.iter().map(|v| v / m).collect(), false)
    }
}

/// `R^ω_j = |S^ω_j|` and `R^q_j = ‖P^h S^q_j‖_q`, normalized by their
/// largest entries.
pub fn robustness(bundle: &SensitivityBundle, space: PrcSpace, scaling: Scaling) -> Result<RobustnessReport> {
    let b = match scaling {
        Scaling::Absolute if bundle.scaling == Scaling::Relative => {
            return Err(Error::InvalidArgument("bundle already holds relative sensitivities".into()))
        }
        Scaling::Absolute => bundle.clone(),
        Scaling::Relative => bundle.relative(),
    };
    let r_omega: Vec<f64> = b.s_omega().iter().map(|s| s.abs()).collect();
    let r_q = b
        .s_q()
        .into_iter()
        .map(|s| norm_in_space(space, &b.q, &horizontal_project(space, &b.q, s)?))
        .collect::<Result<Vec<f64>>>()?;
    let (rho_omega, omega_degenerate) = normalize(&r_omega);
    let (rho_q, q_degenerate) = normalize(&r_q);
    Ok(RobustnessReport {
        labels: b.param_names.clone(),
        groups: None,
        space,
        scaling,
        r_omega,
        r_q,
        rho_omega,
        rho_q,
        omega_degenerate,
        q_degenerate,
    })
}

/// `Ṽ = ½ dist(q, q_ref)²`.
pub fn cost(space: PrcSpace, q: &PhaseSignal, q_ref: &PhaseSignal) -> Result<f64> {
    let d = distance(space, q, q_ref)?;
    Ok(0.5 * d * d)
}

/// `d / sin d`, with its series near zero.
fn d_over_sin(d: f64) -> f64 {
    if d < 1e-4 {
        1.0 + d * d / 6.0
    } else {
        d / d.sin()
    }
}

/// Euclidean gradient of `Ṽ` with respect to the samples of `q`, scaled so
/// that `⟨e, η⟩` is the derivative of `Ṽ` along `η`.
fn cost_gradient(space: PrcSpace, q: &PhaseSignal, q_ref: &PhaseSignal) -> Result<PhaseSignal> {
    let dist = distance_detailed(space, q, q_ref)?;
    // The reference aligned to q; the optimal shift is held fixed.
    let r = match &dist.shift {
        Some(s) => q_ref.shifted(s.sigma),
        None => q_ref.clone(),
    };
    match space {
        PrcSpace::A | PrcSpace::C => q.axpy(-1.0, &r),
        PrcSpace::B | PrcSpace::D => {
            let d = dist.value;
            if PI - d < 1e-12 {
                return Err(Error::Undefined("cost gradient at antipodal PRCs".into()));
            }
            let (nq, nr) = (norm(q), norm(&r));
            let c = inner(q, &r)? / (nq * nr);
            // ∇c = r/(‖q‖‖r‖) − c·q/‖q‖²
            let grad_c = r.scale(1.0 / (nq * nr)).axpy(-c / (nq * nq), q)?;
            Ok(grad_c.scale(-d_over_sin(d)))
        }
    }
}

/// `∇_λ Ṽ` from the sensitivities `S^q_j`, as `g_q(grad V, P^h S^q_j)`.
pub fn grad_cost(space: PrcSpace, q: &PhaseSignal, q_ref: &PhaseSignal, s_q: &[&PhaseSignal]) -> Result<Vec<f64>> {
    let e = cost_gradient(space, q, q_ref)?;
    // Riemannian gradient: the Euclidean one raised by the metric weight.
    let grad = if space.scale_invariant() { e.scale(inner(q, q)?) } else { e };
    let grad = horizontal_project(space, q, &grad)?;
    s_q.iter().map(|s| metric(space, q, &grad, &horizontal_project(space, q, s)?)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentifyOptions {
    pub max_iter: usize,
    /// Stop when `‖∇Ṽ‖` falls to this value.
    pub grad_tol: f64,
    /// Stop when an accepted step lowers the cost by at most this much.
    pub cost_tol: f64,
    /// Length of the first trial step in parameter space; `5%` of `‖λ0‖`
    /// when unset. Later trial steps follow the Barzilai–Borwein estimate.
    pub initial_step: Option<f64>,
    pub armijo: f64,
    pub max_backtracks: usize,
    pub orbit: OrbitOptions,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-10,
            cost_tol: 1e-16,
            initial_step: None,
            armijo: 1e-4,
            max_backtracks: 40,
            orbit: OrbitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Gradient,
    CostChange,
    MaxIterations,
    /// The line search found no admissible point, usually because every
    /// trial left the oscillatory region.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub lambda: Vec<f64>,
    pub cost: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyState {
    pub lambda: Vec<f64>,
    pub cost: f64,
    pub gradient: Vec<f64>,
    pub step: f64,
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
    pub stop: StopReason,
}

struct Evaluation {
    orbit: PeriodicOrbit,
    q: PhaseSignal,
    cost: f64,
}

fn evaluate<M: Model + ?Sized>(
    model: &M,
    lambda: &[f64],
    from: Option<&PeriodicOrbit>,
    space: PrcSpace,
    q_ref: &PhaseSignal,
    opts: &OrbitOptions,
) -> Result<Evaluation> {
    let orbit = match from {
        Some(o) => continue_orbit(model, o, lambda, &opts.newton).or_else(|_| find_orbit(model, lambda, opts))?,
        None => find_orbit(model, lambda, opts)?,
    };
    let (_, q) = adjoint_prc(model, &orbit)?;
    let q = q.resample(q_ref.len());
    let cost = cost(space, &q, q_ref)?;
    Ok(Evaluation { orbit, q, cost })
}

fn gradient_at<M: Model + ?Sized>(
    model: &M,
    ev: &Evaluation,
    space: PrcSpace,
    q_ref: &PhaseSignal,
) -> Result<Vec<f64>> {
    let bundle = sensitivity_bundle(model, &ev.orbit)?;
    let s_q: Vec<PhaseSignal> = bundle.s_q().into_iter().map(|s| s.resample(q_ref.len())).collect();
    grad_cost(space, &ev.q, q_ref, &s_q.iter().collect::<Vec<_>>())
}

/// Steepest descent on `Ṽ(λ) = ½ dist(q(λ), q_ref)²` with an Armijo
/// backtracking line search.
///
/// Trial points whose orbit cannot be computed, or where a parameter
/// changes sign, are rejected like points that fail the Armijo test.
pub fn identify<M: Model + ?Sized>(
    model: &M,
    q_ref: &PhaseSignal,
    lambda0: &[f64],
    space: PrcSpace,
    opts: &IdentifyOptions,
) -> Result<IdentifyState> {
    if lambda0.len() != model.n_params() {
        return Err(Error::InvalidArgument(format!(
            "model has {} parameters, got {}",
            model.n_params(),
            lambda0.len()
        )));
    }
    if norm(q_ref) == 0.0 {
        return Err(Error::ZeroSignal("reference PRC is zero".into()));
    }
    let lnorm = lambda0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let max_step = opts.initial_step.unwrap_or(0.05 * lnorm.max(1e-3));
    if !(max_step > 0.0) {
        return Err(Error::InvalidArgument("initial step must be positive".into()));
    }
    let mut lambda = lambda0.to_vec();
    let mut ev = evaluate(model, &lambda, None, space, q_ref, &opts.orbit)?;
    let mut grad = gradient_at(model, &ev, space, q_ref)?;
    let mut step = max_step;
    let step_cap = lnorm.max(1e-3);
    let mut trace = Vec::new();
    let gnorm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut iterations = 0;
    let stop = loop {
        let gn = gnorm(&grad);
        trace.push(TracePoint { lambda: lambda.clone(), cost: ev.cost, grad_norm: gn, step });
        if gn <= opts.grad_tol {
            break StopReason::Gradient;
        }
        if iterations >= opts.max_iter {
            break StopReason::MaxIterations;
        }
        let mut s = step;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = lambda.iter().zip(&grad).map(|(l, g)| l - s * g / gn).collect();
            let same_sign = trial.iter().zip(&lambda).all(|(t, l)| *l == 0.0 || t.signum() == l.signum());
            if same_sign {
                if let Ok(next) = evaluate(model, &trial, Some(&ev.orbit), space, q_ref, &opts.orbit) {
                    if next.cost <= ev.cost - opts.armijo * s * gn {
                        accepted = Some((trial, next));
                        break;
                    }
                }
            }
            s *= 0.5;
        }
        let Some((trial, next)) = accepted else {
            break StopReason::Boundary;
        };
        iterations += 1;
        let decrease = ev.cost - next.cost;
        let new_grad = gradient_at(model, &next, space, q_ref)?;
        // Barzilai–Borwein estimate of the next trial step length.
        let dl: Vec<f64> = trial.iter().zip(&lambda).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let ll: f64 = dl.iter().map(|v| v * v).sum();
        let lg: f64 = dl.iter().zip(&dg).map(|(a, b)| a * b).sum();
        let gn_new = gnorm(&new_grad);
        step = if lg > 0.0 { (ll / lg * gn_new).min(step_cap) } else { (2.0 * s).min(max_step) };
        lambda = trial;
        ev = next;
        grad = new_grad;
        if decrease <= opts.cost_tol {
            let gn = gnorm(&grad);
            trace.push(TracePoint { lambda: lambda.clone(), cost: ev.cost, grad_norm: gn, step });
            break StopReason::CostChange;
        }
    };
    Ok(IdentifyState { lambda, cost: ev.cost, gradient: grad, step, iterations, trace, stop })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    #[serde(rename = "class-q_I")]
    ClassOne,
    #[serde(rename = "class-q_II")]
    ClassTwo,
    Tie,
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassLabel::ClassOne => "class-q_I",
            ClassLabel::ClassTwo => "class-q_II",
            ClassLabel::Tie => "tie",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: ClassLabel,
    pub d_one: f64,
    pub d_two: f64,
}

pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// `1 − cos θ` on an `n`-point grid.
pub fn canonical_one(n: usize) -> PhaseSignal {
    PhaseSignal::from_fn(n, |t| 1.0 - t.cos())
}

/// `sin(θ + π)` on an `n`-point grid.
pub fn canonical_two(n: usize) -> PhaseSignal {
    PhaseSignal::from_fn(n, |t| (t + PI).sin())
}

/// Labels `q` by its nearer canonical PRC.
pub fn classify(q: &PhaseSignal, space: PrcSpace, tie_tol: f64) -> Result<Classification> {
    if norm(q) == 0.0 {
        return Err(Error::ZeroSignal("cannot classify a zero PRC".into()));
    }
    let n = q.len();
    let d_one = distance(space, q, &canonical_one(n))?;
    let d_two = distance(space, q, &canonical_two(n))?;
    let label = if (d_one - d_two).abs() <= tie_tol {
        ClassLabel::Tie
    } else if d_one < d_two {
        ClassLabel::ClassOne
    } else {
        ClassLabel::ClassTwo
    };
    Ok(Classification { label, d_one, d_two })
}
