//! Parametric sensitivities of the angular frequency, the orbit, the phase
//! gradient and the infinitesimal PRC, by solving the already factored
//! bordered orbit and adjoint matrices against parameter right-hand sides.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::integrate::{flow, Blocks, Input, Tolerances};
use crate::metrics::{norm, PhaseSignal};
use crate::models::Model;
use crate::orbit::{bordered_jacobian, factor, segment_flows, PeriodicOrbit, Scheme};
use crate::prc::{adjoint_system, contract_input, unstack, AdjointSystem, GradientCurve};
use crate::{Error, Result};

/// Relative step of the finite difference of the segment fundamental
/// matrices, and the integrator tolerances used for it.
const FD_STEP: f64 = 1e-6;
const FD_TOL: Tolerances = Tolerances { rtol: 1e-13, atol: 1e-15, max_steps: 5_000_000 };

#[derive(Debug, Clone)]
pub struct OrbitSensitivity {
    pub s_omega: f64,
    /// `∂x_i/∂λ_j` at the nodes `i = 0..=N`.
    pub s_x: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct PrcSensitivity {
    /// `∂p_i/∂λ_j` at the nodes `i = 0..=N`.
    pub s_p: Vec<DVector<f64>>,
    pub s_xi: f64,
    pub s_q: PhaseSignal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    #[default]
    Absolute,
    /// Multiplied by `λ_j`, i.e. derivatives with respect to `ln λ_j`.
    Relative,
}

/// Sensitivities of one orbit for every parameter.
#[derive(Debug, Clone)]
pub struct SensitivityBundle {
    pub param_names: Vec<String>,
    pub lambda: Vec<f64>,
    pub omega: f64,
    pub q: PhaseSignal,
    pub gradient: GradientCurve,
    pub orbit: Vec<OrbitSensitivity>,
    pub prc: Vec<PrcSensitivity>,
    pub scaling: Scaling,
}

impl SensitivityBundle {
    pub fn n_params(&self) -> usize {
        self.lambda.len()
    }

    pub fn s_omega(&self) -> Vec<f64> {
        self.orbit.iter().map(|o| o.s_omega).collect()
    }

    pub fn s_period(&self) -> Vec<f64> {
        let t = 2.0 * std::f64::consts::PI / self.omega;
        self.orbit.iter().map(|o| period_sensitivity(o.s_omega, self.omega, t)).collect()
    }

    pub fn s_q(&self) -> Vec<&PhaseSignal> {
        self.prc.iter().map(|p| &p.s_q).collect()
    }

    /// The same sensitivities with respect to `ln λ_j`.
    pub fn relative(&self) -> Self {
        if self.scaling == Scaling::Relative {
            return self.clone();
        }
        let mut out = self.clone();
        for (j, &l) in self.lambda.iter().enumerate() {
            let o = &mut out.orbit[j];
            o.s_omega *= l;
            o.s_x.iter_mut().for_each(|v| *v *= l);
            let p = &mut out.prc[j];
            p.s_p.iter_mut().for_each(|v| *v *= l);
            p.s_xi *= l;
            p.s_q = p.s_q.scale(l);
        }
        out.scaling = Scaling::Relative;
        out
    }
}

/// The factored orbit Jacobian with the parameter right-hand sides.
struct OrbitSystem {
    lu: LU<f64, Dyn, Dyn>,
    /// `−∂r/∂λ`, one column per parameter.
    rhs: DMatrix<f64>,
}

fn orbit_system<M: Model + ?Sized>(model: &M, orbit: &PeriodicOrbit) -> Result<OrbitSystem> {
    let n = orbit.dim();
    let l = orbit.lambda().len();
    if model.dim() != n || model.n_params() != l {
        return Err(Error::InvalidArgument("orbit does not belong to this model".into()));
    }
    let segs = orbit.segments();
    let size = (segs + 1) * n + 1;
    let lu = factor(bordered_jacobian(model, orbit)?, "orbit sensitivity system")?;
    let mut rhs = DMatrix::zeros(size, l);
    let lambda = orbit.lambda();
    match orbit.scheme() {
        Scheme::MultipleShooting => {
            let flows = segment_flows(
                model,
                orbit.partition(),
                orbit.points(),
                orbit.omega(),
                lambda,
                orbit.integrator(),
                Blocks::ALL,
            )?;
            for (i, f) in flows.iter().enumerate() {
                rhs.view_mut((i * n, 0), (n, l)).copy_from(&-f.dphi_dlambda.as_ref().unwrap());
            }
        }
        Scheme::Trapezoidal => {
            let fp: Vec<DMatrix<f64>> = orbit.points().iter().map(|x| model.jac_p(x.as_slice(), 0.0, lambda)).collect();
            for i in 0..segs {
                let c = 0.5 * orbit.partition().step(i) / orbit.omega();
                rhs.view_mut((i * n, 0), (n, l)).copy_from(&((&fp[i] + &fp[i + 1]) * c));
            }
        }
    }
    Ok(OrbitSystem { lu, rhs })
}

fn solve_orbit(sys: &OrbitSystem, n: usize, j: usize) -> Result<OrbitSensitivity> {
    let z = sys.lu.solve(&sys.rhs.column(j).into_owned()).ok_or_else(|| Error::Singular("orbit sensitivity".into()))?;
    let (s_x, s_omega) = unstack(&z, n);
    Ok(OrbitSensitivity { s_omega, s_x })
}

/// `S^ω_j` and `S^x_j` for parameter `j`.
pub fn orbit_sensitivity<M: Model + ?Sized>(model: &M, orbit: &PeriodicOrbit, j: usize) -> Result<OrbitSensitivity> {
    check_index(orbit, j)?;
    solve_orbit(&orbit_system(model, orbit)?, orbit.dim(), j)
}

fn check_index(orbit: &PeriodicOrbit, j: usize) -> Result<()> {
    if j >= orbit.lambda().len() {
        return Err(Error::InvalidArgument(format!(
            "parameter index {j} out of range ({} parameters)",
            orbit.lambda().len()
        )));
    }
    Ok(())
}

/// Total derivative of the segment fundamental matrices along
/// `(x_i + δS^x_i, ω + δS^ω, λ + δe_j)`, by central differences.
fn fundamental_derivatives<M: Model + ?Sized>(
    model: &M,
    orbit: &PeriodicOrbit,
    sens: &OrbitSensitivity,
    j: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let lambda = orbit.lambda();
    let delta = FD_STEP * lambda[j].abs().max(1.0);
    let at = |sign: f64, i: usize| -> Result<DMatrix<f64>> {
        let x: DVector<f64> = orbit.point(i) + &sens.s_x[i] * (sign * delta);
        let omega = orbit.omega() + sign * delta * sens.s_omega;
        let mut lam = lambda.to_vec();
        lam[j] += sign * delta;
        let t = orbit.partition().step(i) / omega;
        Ok(flow(model, t, x.as_slice(), &Input::Zero, &lam, &FD_TOL, Blocks::FUNDAMENTAL)?.phi.unwrap())
    };
    (0..orbit.segments()).into_par_iter().map(|i| Ok((at(1.0, i)? - at(-1.0, i)?) / (2.0 * delta))).collect()
}

fn prc_rhs<M: Model + ?Sized>(
    model: &M,
    orbit: &PeriodicOrbit,
    adj: &AdjointSystem,
    p: &[DVector<f64>],
    xi: f64,
    sens: &OrbitSensitivity,
    j: usize,
) -> Result<DVector<f64>> {
    let n = orbit.dim();
    let segs = orbit.segments();
    let size = (segs + 1) * n + 1;
    let lambda = orbit.lambda();
    let omega = orbit.omega();
    let mut rhs = DVector::zeros(size);
    // Derivative of the border column and row, f at the nodes.
    let s_v: Vec<DVector<f64>> = (0..=segs)
        .map(|i| &adj.jac[i] * &sens.s_x[i] + model.jac_p(orbit.point(i).as_slice(), 0.0, lambda).column(j))
        .collect();
    match orbit.scheme() {
        Scheme::MultipleShooting => {
            let d_phi = fundamental_derivatives(model, orbit, sens, j)?;
            for i in 0..segs {
                rhs.rows_mut(i * n, n).copy_from(&(d_phi[i].transpose() * &p[i + 1]));
            }
        }
        Scheme::Trapezoidal => {
            let d_a: Vec<DMatrix<f64>> = (0..=segs)
                .map(|i| {
                    let x = orbit.point(i).as_slice();
                    model.hess_xx(x, 0.0, lambda, sens.s_x[i].as_slice()) + model.hess_xp(x, 0.0, lambda, j)
                })
                .collect();
            for i in 0..segs {
                let h = orbit.partition().step(i);
                let c = 0.5 * h / omega;
                let dc = -c * sens.s_omega / omega;
                let r = -(adj.jac[i].transpose() * &p[i] + adj.jac[i + 1].transpose() * &p[i + 1]) * dc
                    - (d_a[i].transpose() * &p[i] + d_a[i + 1].transpose() * &p[i + 1]) * c;
                rhs.rows_mut(i * n, n).copy_from(&r);
            }
        }
    }
    for (i, sv) in s_v.iter().enumerate() {
        let mut rows = rhs.rows_mut(i * n, n);
        rows -= sv * xi;
    }
    let weighted: f64 = s_v.iter().zip(p).zip(&adj.weights).map(|((sv, pi), w)| w * sv.dot(pi)).sum();
    rhs[size - 1] = sens.s_omega - weighted;
    Ok(rhs)
}

fn contract_sensitivity<M: Model + ?Sized>(
    model: &M,
    orbit: &PeriodicOrbit,
    p: &[DVector<f64>],
    s_p: &[DVector<f64>],
    sens: &OrbitSensitivity,
    j: usize,
) -> Result<PhaseSignal> {
    let lambda = orbit.lambda();
    let first = contract_input(model, orbit, s_p);
    let vals = (0..orbit.segments())
        .map(|i| {
            let x = orbit.point(i).as_slice();
            let db = model.hess_xu(x, 0.0, lambda) * &sens.s_x[i] + model.hess_pu(x, 0.0, lambda).column(j);
            first[i] + p[i].dot(&db)
        })
        .collect();
    PhaseSignal::new(vals)
}

fn solve_prc<M: Model + ?Sized>(
    model: &M,
    orbit: &PeriodicOrbit,
    adj: &AdjointSystem,
    gradient: &GradientCurve,
    sens: &OrbitSensitivity,
    j: usize,
) -> Result<PrcSensitivity> {
    let p = gradient.points();
    let rhs = prc_rhs(model, orbit, adj, p, gradient.xi(), sens, j)?;
    let z = adj.lu.solve(&rhs).ok_or_else(|| Error::Singular("PRC sensitivity".into()))?;
    let (s_p, s_xi) = unstack(&z, orbit.dim());
    let s_q = contract_sensitivity(model, orbit, p, &s_p, sens, j)?;
    Ok(PrcSensitivity { s_p, s_xi, s_q })
}

/// `S^p_j` and `S^q_j` for parameter `j`, given the adjoint solution and the
/// orbit sensitivity for the same parameter.
pub fn prc_sensitivity<M: Model + ?Sized>(
    model: &M,
    orbit: &PeriodicOrbit,
    gradient: &GradientCurve,
    orbit_sens: &OrbitSensitivity,
    j: usize,
) -> Result<PrcSensitivity> {
    check_index(orbit, j)?;
    if !orbit.partition().is_uniform() {
        return Err(Error::GridMismatch("PRC sensitivities need an orbit on a uniform grid".into()));
    }
    if gradient.points().len() != orbit.segments() + 1 || orbit_sens.s_x.len() != orbit.segments() + 1 {
        return Err(Error::GridMismatch("gradient curve or orbit sensitivity on a different grid".into()));
    }
    let adj = adjoint_system(model, orbit)?;
    solve_prc(model, orbit, &adj, gradient, orbit_sens, j)
}

/// `S^T = −T·S^ω/ω`.
pub fn period_sensitivity(s_omega: f64, omega: f64, period: f64) -> f64 {
    -period * s_omega / omega
}

/// `λ_j·S^c/|c|` for a scalar characteristic.
pub fn relative_sensitivity(value: f64, sensitivity: f64, lambda_j: f64) -> Result<f64> {
    if value == 0.0 || !value.is_finite() {
        return Err(Error::ZeroSignal(format!("characteristic value {value} cannot be normalized")));
    }
    Ok(lambda_j * sensitivity / value.abs())
}

/// `λ_j·S^q/‖q‖₂` for a signal characteristic.
pub fn relative_signal_sensitivity(q: &PhaseSignal, s_q: &PhaseSignal, lambda_j: f64) -> Result<PhaseSignal> {
    let nq = norm(q);
    if nq == 0.0 {
        return Err(Error::ZeroSignal("PRC has zero norm".into()));
    }
    if q.len() != s_q.len() {
        return Err(Error::GridMismatch(format!("{} vs {} samples", q.len(), s_q.len())));
    }
    Ok(s_q.scale(lambda_j / nq))
}

/// Every sensitivity of `orbit`, from one factorization of each bordered
/// matrix.
pub fn sensitivity_bundle<M: Model + ?Sized>(model: &M, orbit: &PeriodicOrbit) -> Result<SensitivityBundle> {
    if !orbit.partition().is_uniform() {
        return Err(Error::GridMismatch("PRC sensitivities need an orbit on a uniform grid".into()));
    }
    let n = orbit.dim();
    let l = orbit.lambda().len();
    let osys = orbit_system(model, orbit)?;
    let orbit_sens: Vec<OrbitSensitivity> =
        (0..l).into_par_iter().map(|j| solve_orbit(&osys, n, j)).collect::<Result<_>>()?;
    let (gradient, q) = crate::prc::adjoint_prc(model, orbit)?;
    let adj = adjoint_system(model, orbit)?;
    let prc_sens: Vec<PrcSensitivity> = (0..l)
        .into_par_iter()
        .map(|j| solve_prc(model, orbit, &adj, &gradient, &orbit_sens[j], j))
        .collect::<Result<_>>()?;
    Ok(SensitivityBundle {
        param_names: model.param_names(),
        lambda: orbit.lambda().to_vec(),
        omega: orbit.omega(),
        q,
        gradient,
        orbit: orbit_sens,
        prc: prc_sens,
        scaling: Scaling::Absolute,
    })
}
