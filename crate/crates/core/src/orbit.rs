//! Periodic orbits as closed discrete curves on a partition of the circle,
//! computed by Newton's method on the multiple-shooting or trapezoidal
//! discretization of the periodic boundary-value problem.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::integrate::{flow, flow_observed, Blocks, FlowResult, Input, Tolerances};
use crate::interp::{is_uniform, Periodic};
use crate::models::Model;
use crate::{Error, Result};

/// `0 = θ_0 < θ_1 < … < θ_N = 2π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CirclePartition {
    theta: Vec<f64>,
}

impl CirclePartition {
    pub fn uniform(segments: usize) -> Result<Self> {
        if segments < 2 {
            return Err(Error::InvalidArgument(format!("partition needs at least 2 segments, got {segments}")));
        }
        let mut theta: Vec<f64> = (0..=segments).map(|i| 2.0 * PI * i as f64 / segments as f64).collect();
        theta[segments] = 2.0 * PI;
        Ok(Self { theta })
    }

    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.len() < 3 {
            return Err(Error::InvalidArgument("partition needs at least 2 segments".into()));
        }
        if theta[0] != 0.0 || (theta[theta.len() - 1] - 2.0 * PI).abs() > 1e-12 {
            return Err(Error::InvalidArgument("partition must start at 0 and end at 2π".into()));
        }
        if theta.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("partition must be strictly increasing".into()));
        }
        let mut theta = theta;
        let n = theta.len() - 1;
        theta[n] = 2.0 * PI;
        Ok(Self { theta })
    }

    /// Number of segments `N`.
    pub fn segments(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn phases(&self) -> &[f64] {
        &self.theta
    }

    pub fn step(&self, i: usize) -> f64 {
        self.theta[i + 1] - self.theta[i]
    }

    pub fn max_step(&self) -> f64 {
        (0..self.segments()).map(|i| self.step(i)).fold(0.0, f64::max)
    }

    pub fn is_uniform(&self) -> bool {
        is_uniform(&self.theta)
    }

    /// Diagonal of the weight matrix `P` of the normalization `vᵀ P p = ω`
    /// (one weight per node, shared by the `n` components).
    pub fn node_weights(&self, scheme: Scheme) -> Vec<f64> {
        let n = self.segments();
        match scheme {
            Scheme::MultipleShooting => vec![1.0 / (n + 1) as f64; n + 1],
            Scheme::Trapezoidal => {
                let mut w = vec![0.0; n + 1];
                for i in 0..n {
                    let h = self.step(i) / (4.0 * PI);
                    w[i] += h;
                    w[i + 1] += h;
                }
                w
            }
        }
    }
}

impl TryFrom<Vec<f64>> for CirclePartition {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CirclePartition> for Vec<f64> {
    fn from(p: CirclePartition) -> Self {
        p.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    MultipleShooting,
    Trapezoidal,
}

/// Scalar condition `Ψ(x_0) = 0` fixing the phase origin of the orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseCondition {
    /// `x_0[component] − level`.
    Anchor { component: usize, level: f64 },
    /// `⟨x_0 − reference, tangent⟩`.
    Orthogonality { reference: Vec<f64>, tangent: Vec<f64> },
}

impl PhaseCondition {
    pub fn residual(&self, x0: &[f64]) -> f64 {
        match self {
            PhaseCondition::Anchor { component, level } => x0[*component] - level,
            PhaseCondition::Orthogonality { reference, tangent } => {
                x0.iter().zip(reference).zip(tangent).map(|((x, r), t)| (x - r) * t).sum()
            }
        }
    }

    /// `∂Ψ/∂x_0`.
    pub fn gradient(&self, n: usize) -> DVector<f64> {
        match self {
            PhaseCondition::Anchor { component, .. } => {
                let mut g = DVector::zeros(n);
                g[*component] = 1.0;
                g
            }
            PhaseCondition::Orthogonality { tangent, .. } => DVector::from_column_slice(tangent),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            PhaseCondition::Anchor { component, level } => {
                if *component >= n || !level.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "anchor component {component} invalid for dimension {n}"
                    )));
                }
            }
            PhaseCondition::Orthogonality { reference, tangent } => {
                if reference.len() != n || tangent.len() != n || tangent.iter().all(|t| *t == 0.0) {
                    return Err(Error::InvalidArgument("orthogonality condition needs nonzero n-vectors".into()));
                }
            }
        }
        Ok(())
    }
}

/// Starting point for [`newton_orbit`].
#[derive(Debug, Clone)]
pub struct OrbitGuess {
    pub partition: CirclePartition,
    /// `N + 1` points; the last repeats the first.
    pub points: Vec<DVector<f64>>,
    pub omega: f64,
    /// Phase condition satisfied by the guess.
    pub phase: PhaseCondition,
}

#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    partition: CirclePartition,
    points: Vec<DVector<f64>>,
    omega: f64,
    scheme: Scheme,
    residual_norm: f64,
    lambda: Vec<f64>,
    phase: PhaseCondition,
    integrator: Tolerances,
    iterations: usize,
}

impl PeriodicOrbit {
    pub fn partition(&self) -> &CirclePartition {
        &self.partition
    }
    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }
    pub fn point(&self, i: usize) -> &DVector<f64> {
        &self.points[i]
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
    pub fn phase_condition(&self) -> &PhaseCondition {
        &self.phase
    }
    pub fn integrator(&self) -> &Tolerances {
        &self.integrator
    }
    /// Newton iterations taken from the guess.
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
    pub fn segments(&self) -> usize {
        self.partition.segments()
    }

    /// `f(x_i, 0, λ)` at every node.
    pub fn tangents<M: Model + ?Sized>(&self, model: &M) -> Vec<DVector<f64>> {
        self.points.iter().map(|x| model.eval(x.as_slice(), 0.0, &self.lambda)).collect()
    }

    /// Largest Euclidean distance between two nodes.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.points {
            for b in &self.points {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Periodic interpolant of the discrete curve.
    pub fn interpolant(&self) -> Periodic {
        let n = self.segments();
        let vals = DMatrix::from_fn(self.dim(), n, |d, j| self.points[j][d]);
        Periodic::new(self.partition.phases(), &vals)
    }

    pub fn as_guess(&self) -> OrbitGuess {
        OrbitGuess {
            partition: self.partition.clone(),
            points: self.points.clone(),
            omega: self.omega,
            phase: self.phase.clone(),
        }
    }

    /// Unknown vector `[x_0, …, x_N, ω]`.
    pub(crate) fn unknowns(&self) -> DVector<f64> {
        pack(&self.points, self.omega)
    }
}

fn pack(points: &[DVector<f64>], omega: f64) -> DVector<f64> {
    let n = points[0].len();
    let mut z = DVector::zeros(points.len() * n + 1);
    for (i, x) in points.iter().enumerate() {
        z.rows_mut(i * n, n).copy_from(x);
    }
    z[points.len() * n] = omega;
    z
}

fn unpack(z: &DVector<f64>, n: usize) -> (Vec<DVector<f64>>, f64) {
    let nodes = (z.len() - 1) / n;
    let pts = (0..nodes).map(|i| z.rows(i * n, n).into_owned()).collect();
    (pts, z[z.len() - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonOptions {
    /// Tolerance on the max-norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    pub integrator: Tolerances,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, integrator: Tolerances::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuessOptions {
    /// Zero-input simulation time discarded as transient.
    pub settle_time: f64,
    /// Simulation time searched for repeated maxima of the output.
    pub search_time: f64,
    /// Total simulated time after which the search gives up.
    pub max_time: f64,
    pub integrator: Tolerances,
}

impl Default for GuessOptions {
    fn default() -> Self {
        Self { settle_time: 500.0, search_time: 200.0, max_time: 50_000.0, integrator: Tolerances::default() }
    }
}

/// Factors a bordered matrix, rejecting it when the ratio of the extreme
/// pivots of the LU factorization exceeds `1e12`.
pub(crate) fn factor(m: DMatrix<f64>, what: &str) -> Result<LU<f64, Dyn, Dyn>> {
    let lu = m.lu();
    let u = lu.u();
    let d = u.diagonal();
    let max = d.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let min = d.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if !(min > 0.0) || max / min > 1e12 || !max.is_finite() {
        return Err(Error::Singular(format!("{what}: pivot ratio {:.3e}", max / min)));
    }
    Ok(lu)
}

/// Zero-input flows over every shooting segment of `points` at frequency
/// `omega`.
pub(crate) fn segment_flows<M: Model + ?Sized>(
    model: &M,
    partition: &CirclePartition,
    points: &[DVector<f64>],
    omega: f64,
    lambda: &[f64],
    tol: &Tolerances,
    blocks: Blocks,
) -> Result<Vec<FlowResult>> {
    (0..partition.segments())
        .into_par_iter()
        .map(|i| flow(model, partition.step(i) / omega, points[i].as_slice(), &Input::Zero, lambda, tol, blocks))
        .collect()
}

struct Problem<'a, M: ?Sized> {
    model: &'a M,
    lambda: &'a [f64],
    partition: &'a CirclePartition,
    scheme: Scheme,
    phase: &'a PhaseCondition,
    tol: &'a Tolerances,
}

impl<M: Model + ?Sized> Problem<'_, M> {
    fn n(&self) -> usize {
        self.model.dim()
    }

    fn size(&self) -> usize {
        (self.partition.segments() + 1) * self.n() + 1
    }

    /// Residual `[r_0, …, r_{N−1}, r_N, r_Ψ]` and, on request, its Jacobian.
    fn evaluate(&self, z: &DVector<f64>, want_jac: bool) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let n = self.n();
        let segs = self.partition.segments();
        let (pts, omega) = unpack(z, n);
        if !(omega > 0.0) {
            return Err(Error::InvalidArgument(format!("non-positive angular frequency {omega}")));
        }
        let size = self.size();
        let mut r = DVector::zeros(size);
        let mut jac = want_jac.then(|| DMatrix::zeros(size, size));
        let wcol = size - 1;
        match self.scheme {
            Scheme::MultipleShooting => {
                let blocks = if want_jac { Blocks::FUNDAMENTAL } else { Blocks::STATE };
                let flows = segment_flows(self.model, self.partition, &pts, omega, self.lambda, self.tol, blocks)?;
                for (i, fl) in flows.iter().enumerate() {
                    r.rows_mut(i * n, n).copy_from(&(&fl.x_end - &pts[i + 1]));
                    if let Some(j) = jac.as_mut() {
                        let h = self.partition.step(i);
                        j.view_mut((i * n, i * n), (n, n)).copy_from(fl.phi.as_ref().unwrap());
                        for k in 0..n {
                            j[(i * n + k, (i + 1) * n + k)] = -1.0;
                        }
                        j.view_mut((i * n, wcol), (n, 1)).copy_from(&(&fl.dphi_dt * (-h / (omega * omega))));
                    }
                }
            }
            Scheme::Trapezoidal => {
                let f: Vec<DVector<f64>> =
                    pts.iter().map(|x| self.model.eval(x.as_slice(), 0.0, self.lambda)).collect();
                let a: Option<Vec<DMatrix<f64>>> =
                    want_jac.then(|| pts.iter().map(|x| self.model.jac_x(x.as_slice(), 0.0, self.lambda)).collect());
                for i in 0..segs {
                    let c = 0.5 * self.partition.step(i) / omega;
                    let fs = &f[i] + &f[i + 1];
                    r.rows_mut(i * n, n).copy_from(&(&pts[i + 1] - &pts[i] - &fs * c));
                    if let (Some(j), Some(a)) = (jac.as_mut(), a.as_ref()) {
                        let eye = DMatrix::<f64>::identity(n, n);
                        j.view_mut((i * n, i * n), (n, n)).copy_from(&(-&eye - &a[i] * c));
                        j.view_mut((i * n, (i + 1) * n), (n, n)).copy_from(&(&eye - &a[i + 1] * c));
                        j.view_mut((i * n, wcol), (n, 1)).copy_from(&(&fs * (c / omega)));
                    }
                }
            }
        }
        r.rows_mut(segs * n, n).copy_from(&(&pts[segs] - &pts[0]));
        r[size - 1] = self.phase.residual(pts[0].as_slice());
        if let Some(j) = jac.as_mut() {
            for k in 0..n {
                j[(segs * n + k, k)] = -1.0;
                j[(segs * n + k, segs * n + k)] = 1.0;
            }
            let g = self.phase.gradient(n);
            for k in 0..n {
                j[(size - 1, k)] = g[k];
            }
        }
        Ok((r, jac))
    }
}

/// Bordered Jacobian `[[A, b], [cᵀ, d]]` of the orbit equations at a
/// converged orbit.
pub fn bordered_jacobian<M: Model + ?Sized>(model: &M, orbit: &PeriodicOrbit) -> Result<DMatrix<f64>> {
    let prob = Problem {
        model,
        lambda: &orbit.lambda,
        partition: &orbit.partition,
        scheme: orbit.scheme,
        phase: &orbit.phase,
        tol: &orbit.integrator,
    };
    Ok(prob.evaluate(&orbit.unknowns(), true)?.1.unwrap())
}

/// Residual `r(x_Π, ω)` of the orbit equations at the stored solution.
pub fn orbit_residual<M: Model + ?Sized>(model: &M, orbit: &PeriodicOrbit) -> Result<DVector<f64>> {
    let prob = Problem {
        model,
        lambda: &orbit.lambda,
        partition: &orbit.partition,
        scheme: orbit.scheme,
        phase: &orbit.phase,
        tol: &orbit.integrator,
    };
    Ok(prob.evaluate(&orbit.unknowns(), false)?.0)
}

/// Damped Newton iteration on the discretized periodic boundary-value
/// problem.
pub fn newton_orbit<M: Model + ?Sized>(
    model: &M,
    lambda: &[f64],
    guess: &OrbitGuess,
    scheme: Scheme,
    phase: &PhaseCondition,
    opts: &NewtonOptions,
) -> Result<PeriodicOrbit> {
    let n = model.dim();
    if lambda.len() != model.n_params() {
        return Err(Error::InvalidArgument(format!("model has {} parameters, got {}", model.n_params(), lambda.len())));
    }
    if guess.points.len() != guess.partition.segments() + 1 || guess.points.iter().any(|x| x.len() != n) {
        return Err(Error::InvalidArgument("guess does not match the partition and model dimension".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("Newton tolerance must be positive, got {}", opts.tol)));
    }
    phase.validate(n)?;
    let prob = Problem { model, lambda, partition: &guess.partition, scheme, phase, tol: &opts.integrator };
    let mut z = pack(&guess.points, guess.omega);
    let (mut r, _) = prob.evaluate(&z, false)?;
    let mut norm = r.amax();
    let mut iterations = 0;
    while !(norm <= opts.tol) {
        if iterations >= opts.max_iter {
            return Err(Error::NewtonFailed { iterations, residual: norm });
        }
        let (_, jac) = prob.evaluate(&z, true)?;
        let lu = factor(jac.unwrap(), "orbit Jacobian")?;
        let dz = lu.solve(&(-&r)).ok_or_else(|| Error::Singular("orbit Jacobian".into()))?;
        let mut step = 1.0;
        loop {
            let trial = &z + &dz * step;
            match prob.evaluate(&trial, false) {
                Ok((rt, _)) if rt.amax() < norm => {
                    z = trial;
                    r = rt;
                    norm = r.amax();
                    break;
                }
                _ => {
                    step *= 0.5;
                    if step < 2f64.powi(-20) {
                        return Err(Error::NewtonFailed { iterations, residual: norm });
                    }
                }
            }
        }
        iterations += 1;
    }
    let (mut points, omega) = unpack(&z, n);
    // The closure row holds to the Newton tolerance; make it exact.
    let segs = guess.partition.segments();
    points[segs] = points[0].clone();
    Ok(PeriodicOrbit {
        partition: guess.partition.clone(),
        points,
        omega,
        scheme,
        residual_norm: norm,
        lambda: lambda.to_vec(),
        phase: phase.clone(),
        integrator: opts.integrator,
        iterations,
    })
}

/// Output maxima in the upper half of the range and the period between the
/// last two, when the last two cycles agree to 1% in period and amplitude.
fn detect_cycle(ts: &[f64], hs: &[f64]) -> Result<(Vec<(usize, f64)>, f64)> {
    let (hmin, hmax) = hs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &h| (a.min(h), b.max(h)));
    let span = hmax - hmin;
    if !(span > 1e-8 * (1.0 + hmax.abs())) {
        return Err(Error::NoCycle("output is constant after the transient".into()));
    }
    // Local maxima refined by a parabola through the neighbouring steps.
    let mut peaks: Vec<(usize, f64)> = vec![];
    for j in 1..hs.len() - 1 {
        if hs[j] > hs[j - 1] && hs[j] >= hs[j + 1] && hs[j] > hmin + 0.5 * span {
            let (t0, t1, t2) = (ts[j - 1], ts[j], ts[j + 1]);
            let (h0, h1, h2) = (hs[j - 1], hs[j], hs[j + 1]);
            let d01 = (h1 - h0) / (t1 - t0);
            let d12 = (h2 - h1) / (t2 - t1);
            let curv = (d12 - d01) / (t2 - t0);
            let tp = if curv < 0.0 { 0.5 * (t0 + t1) - d01 / (2.0 * curv) } else { t1 };
            peaks.push((j, tp.clamp(t0, t2)));
        }
    }
    if peaks.len() < 4 {
        return Err(Error::NoCycle(format!("only {} output maxima within the search window", peaks.len())));
    }
    let k = peaks.len();
    let periods: Vec<f64> = peaks.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let (ta, tb) = (periods[k - 3], periods[k - 2]);
    let amp = |a: usize, b: usize| {
        let seg = &hs[peaks[a].0..=peaks[b].0];
        seg.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - seg.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let (aa, ab) = (amp(k - 3, k - 2), amp(k - 2, k - 1));
    if (ta - tb).abs() > 1e-2 * tb || (aa - ab).abs() > 1e-2 * ab {
        return Err(Error::NoCycle(format!(
            "successive cycles differ (periods {ta:.6}, {tb:.6}; amplitudes {aa:.3e}, {ab:.3e})"
        )));
    }
    Ok((peaks, tb))
}

/// Simulates from `seed` until transients decay, detects one cycle between
/// consecutive maxima of the output, and samples it on a uniform partition
/// with `segments` segments.
pub fn initial_guess<M: Model + ?Sized>(
    model: &M,
    lambda: &[f64],
    seed: &[f64],
    segments: usize,
    opts: &GuessOptions,
) -> Result<OrbitGuess> {
    let partition = CirclePartition::uniform(segments)?;
    let n = model.dim();
    if seed.len() != n {
        return Err(Error::InvalidArgument(format!("seed has length {}, model dimension is {n}", seed.len())));
    }
    let tol = &opts.integrator;
    let mut x = flow(model, opts.settle_time, seed, &Input::Zero, lambda, tol, Blocks::STATE)?.x_end;
    let mut spent = opts.settle_time;
    let mut window = opts.search_time;
    // Slow oscillations need a longer window; each retry treats the previous
    // window as transient and doubles the next one.
    let (ts, xs, peaks, period) = loop {
        let mut ts = vec![0.0];
        let mut xs = vec![x.clone()];
        flow_observed(model, 0.0, window, x.as_slice(), &Input::Zero, lambda, tol, |t, y| {
            ts.push(t);
            xs.push(DVector::from_column_slice(y));
            true
        })?;
        let hs: Vec<f64> = xs.iter().map(|y| model.output(y.as_slice(), lambda)).collect();
        match detect_cycle(&ts, &hs) {
            Ok((peaks, period)) => break (ts, xs, peaks, period),
            Err(e) => {
                spent += window;
                if matches!(e, Error::NoCycle(ref m) if m.starts_with("output is constant"))
                    || spent + 2.0 * window > opts.max_time
                {
                    return Err(e);
                }
                x = xs.pop().unwrap();
                window *= 2.0;
            }
        }
    };
    let k = peaks.len();
    // State at the section crossing that starts the last full cycle.
    let (j, tp) = peaks[k - 2];
    let (jstart, dt) = if tp >= ts[j] { (j, tp - ts[j]) } else { (j - 1, tp - ts[j - 1]) };
    let x0 = flow(model, dt, xs[jstart].as_slice(), &Input::Zero, lambda, tol, Blocks::STATE)?.x_end;
    let omega = 2.0 * PI / period;
    let mut points = vec![x0.clone()];
    for i in 0..segments {
        let next =
            flow(model, partition.step(i) / omega, points[i].as_slice(), &Input::Zero, lambda, tol, Blocks::STATE)?;
        points.push(next.x_end);
    }
    points[segments] = x0.clone();

    // Anchor the component crossing the section most transversally relative
    // to its own oscillation amplitude.
    let cycle = &xs[peaks[k - 2].0..=peaks[k - 1].0];
    let f0 = model.eval(x0.as_slice(), 0.0, lambda);
    let mut best = (0, -1.0);
    for c in 0..n {
        let lo = cycle.iter().map(|x| x[c]).fold(f64::INFINITY, f64::min);
        let hi = cycle.iter().map(|x| x[c]).fold(f64::NEG_INFINITY, f64::max);
        let a = hi - lo;
        if a > 0.0 {
            let score = f0[c].abs() / a;
            if score > best.1 {
                best = (c, score);
            }
        }
    }
    let phase = PhaseCondition::Anchor { component: best.0, level: x0[best.0] };
    Ok(OrbitGuess { partition, points, omega, phase })
}

/// Periodic interpolation of an orbit onto a uniform partition with
/// `segments` segments. The result is a guess for a new Newton solve.
pub fn resample_orbit(orbit: &PeriodicOrbit, segments: usize) -> Result<OrbitGuess> {
    if segments < 4 {
        return Err(Error::InvalidArgument(format!("resampling needs at least 4 segments, got {segments}")));
    }
    let partition = CirclePartition::uniform(segments)?;
    let interp = orbit.interpolant();
    let mut points: Vec<DVector<f64>> = partition.phases()[..segments].iter().map(|&t| interp.eval(t)).collect();
    points.push(points[0].clone());
    Ok(OrbitGuess { partition, points, omega: orbit.omega, phase: orbit.phase.clone() })
}

/// Options for [`find_orbit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitOptions {
    pub segments: usize,
    pub scheme: Scheme,
    pub newton: NewtonOptions,
    pub guess: GuessOptions,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            segments: 256,
            scheme: Scheme::Trapezoidal,
            newton: NewtonOptions::default(),
            guess: GuessOptions::default(),
        }
    }
}

/// Simulation-based guess followed by Newton's method.
pub fn find_orbit<M: Model + ?Sized>(model: &M, lambda: &[f64], opts: &OrbitOptions) -> Result<PeriodicOrbit> {
    let guess = initial_guess(model, lambda, &model.seed_state(), opts.segments, &opts.guess)?;
    newton_orbit(model, lambda, &guess, opts.scheme, &guess.phase, &opts.newton)
}

/// Solves the orbit at new parameters starting from a known orbit, keeping
/// its partition, scheme and phase condition.
pub fn continue_orbit<M: Model + ?Sized>(
    model: &M,
    orbit: &PeriodicOrbit,
    lambda: &[f64],
    opts: &NewtonOptions,
) -> Result<PeriodicOrbit> {
    newton_orbit(model, lambda, &orbit.as_guess(), orbit.scheme, &orbit.phase, opts)
}
