use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Model;
use crate::{Error, Result};

/// Dimensionless Goodwin oscillator with `K_e = K_p = τ_m = κ = 1` and equal
/// time constants `τ_e = τ_p = τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodwinParams {
    #[serde(rename = "K")]
    pub k: f64,
    pub tau: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
}

fn default_nu() -> f64 {
    20.0
}

impl Default for GoodwinParams {
    fn default() -> Self {
        Self { k: 2.0, tau: 1.0, nu: 20.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Goodwin {
    nu: f64,
    lambda: [f64; 2],
}

pub fn goodwin_model(params: GoodwinParams) -> Result<Goodwin> {
    let GoodwinParams { k, tau, nu } = params;
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("Goodwin K must be positive, got {k}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("Goodwin tau must be positive, got {tau}")));
    }
    if !(nu >= 1.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("Goodwin nu must be at least 1, got {nu}")));
    }
    Ok(Goodwin { nu, lambda: [k, tau] })
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Hill repression `H(s) = 1/(1+s^ν)` and its first two derivatives.
///
/// Written through `w = s^ν/(1+s^ν)`, evaluated as a logistic of `ν ln s`,
/// so that no power of `s` is ever formed.
fn hill(s: f64, nu: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    let ls = s.ln();
    let z = nu * ls;
    let w = logistic(z);
    let one_minus_w = logistic(-z);
    // ln(w·(1−w)), kept in the log domain so that the division by powers of
    // s cannot overflow at either end.
    let lww = -softplus(-z) - softplus(z);
    let d1 = -nu * (lww - ls).exp();
    let d2 = nu * (lww - 2.0 * ls).exp() * (-(nu - 1.0) + 2.0 * nu * w);
    (one_minus_w, d1, d2)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl Goodwin {
    pub fn nu(&self) -> f64 {
        self.nu
    }
}

impl Model for Goodwin {
    fn name(&self) -> &str {
        "goodwin"
    }

    fn dim(&self) -> usize {
        3
    }

    fn param_names(&self) -> Vec<String> {
        vec!["K".into(), "tau".into()]
    }

    fn params(&self) -> Vec<f64> {
        self.lambda.to_vec()
    }

    fn rhs(&self, x: &[f64], u: f64, p: &[f64], out: &mut [f64]) {
        let (k, tau) = (p[0], p[1]);
        let (h, _, _) = hill(x[2] + u, self.nu);
        out[0] = -x[0] + k * h;
        out[1] = (x[0] - x[1]) / tau;
        out[2] = (x[1] - x[2]) / tau;
    }

    fn output(&self, x: &[f64], _p: &[f64]) -> f64 {
        x[0]
    }

    fn jac_x(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        let (k, tau) = (p[0], p[1]);
        let (_, h1, _) = hill(x[2] + u, self.nu);
        let r = 1.0 / tau;
        DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, k * h1, r, -r, 0.0, 0.0, r, -r])
    }

    fn jac_u(&self, x: &[f64], u: f64, p: &[f64]) -> DVector<f64> {
        let (_, h1, _) = hill(x[2] + u, self.nu);
        DVector::from_vec(vec![p[0] * h1, 0.0, 0.0])
    }

    fn jac_p(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        let tau = p[1];
        let (h, _, _) = hill(x[2] + u, self.nu);
        let t2 = tau * tau;
        DMatrix::from_row_slice(3, 2, &[h, 0.0, 0.0, -(x[0] - x[1]) / t2, 0.0, -(x[1] - x[2]) / t2])
    }

    fn hess_xx(&self, x: &[f64], u: f64, p: &[f64], v: &[f64]) -> DMatrix<f64> {
        let (_, _, h2) = hill(x[2] + u, self.nu);
        let mut out = DMatrix::zeros(3, 3);
        out[(0, 2)] = p[0] * h2 * v[2];
        out
    }

    fn hess_xu(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        let (_, _, h2) = hill(x[2] + u, self.nu);
        let mut out = DMatrix::zeros(3, 3);
        out[(0, 2)] = p[0] * h2;
        out
    }

    fn hess_pu(&self, x: &[f64], u: f64, _p: &[f64]) -> DMatrix<f64> {
        let (_, h1, _) = hill(x[2] + u, self.nu);
        let mut out = DMatrix::zeros(3, 2);
        out[(0, 0)] = h1;
        out
    }

    fn hess_xp(&self, x: &[f64], u: f64, p: &[f64], j: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(3, 3);
        match j {
            0 => {
                let (_, h1, _) = hill(x[2] + u, self.nu);
                out[(0, 2)] = h1;
            }
            1 => {
                let r2 = 1.0 / (p[1] * p[1]);
                out[(1, 0)] = -r2;
                out[(1, 1)] = r2;
                out[(2, 1)] = -r2;
                out[(2, 2)] = r2;
            }
            _ => panic!("Goodwin has 2 parameters, index {j} out of range"),
        }
        out
    }

    fn state_box(&self) -> Vec<(f64, f64)> {
        vec![(0.05, 2.5); 3]
    }

    fn seed_state(&self) -> Vec<f64> {
        vec![0.5, 1.0, 1.5]
    }
}
