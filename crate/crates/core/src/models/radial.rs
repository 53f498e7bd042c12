use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Model;
use crate::{Error, Result};

/// Planar clock whose isochrons are radial lines.
///
/// The parameter vector is `[speed, kappa, gain]`: the angular frequency is
/// `speed·ω0` and the input enters `ẋ` as `gain·u`. Nominal speed and gain
/// are 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialClockParams {
    pub omega0: f64,
    pub kappa: f64,
    #[serde(default = "one")]
    pub gain: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for RadialClockParams {
    fn default() -> Self {
        Self { omega0: 2.0 * std::f64::consts::PI, kappa: 1.0, gain: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct RadialClock {
    omega0: f64,
    lambda: [f64; 3],
}

pub fn radial_clock_model(params: RadialClockParams) -> Result<RadialClock> {
    let RadialClockParams { omega0, kappa, gain } = params;
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega0 must be positive, got {omega0}")));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    if !gain.is_finite() {
        return Err(Error::InvalidParameter(format!("gain must be finite, got {gain}")));
    }
    Ok(RadialClock { omega0, lambda: [1.0, kappa, gain] })
}

impl RadialClock {
    pub fn omega0(&self) -> f64 {
        self.omega0
    }
}

impl Model for RadialClock {
    fn name(&self) -> &str {
        "radial_clock"
    }

    fn dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> Vec<String> {
        vec!["speed".into(), "kappa".into(), "gain".into()]
    }

    fn params(&self) -> Vec<f64> {
        self.lambda.to_vec()
    }

    fn rhs(&self, x: &[f64], u: f64, p: &[f64], out: &mut [f64]) {
        let w = p[0] * self.omega0;
        let a = p[1] * (1.0 - x[0] * x[0] - x[1] * x[1]);
        out[0] = a * x[0] - w * x[1] + p[2] * u;
        out[1] = a * x[1] + w * x[0];
    }

    fn output(&self, x: &[f64], _p: &[f64]) -> f64 {
        x[0]
    }

    fn jac_x(&self, x: &[f64], _u: f64, p: &[f64]) -> DMatrix<f64> {
        let (k, w) = (p[1], p[0] * self.omega0);
        let (a, b) = (x[0], x[1]);
        let g = 1.0 - a * a - b * b;
        DMatrix::from_row_slice(
            2,
            2,
            &[k * (g - 2.0 * a * a), -2.0 * k * a * b - w, -2.0 * k * a * b + w, k * (g - 2.0 * b * b)],
        )
    }

    fn jac_u(&self, _x: &[f64], _u: f64, p: &[f64]) -> DVector<f64> {
        DVector::from_vec(vec![p[2], 0.0])
    }

    fn jac_p(&self, x: &[f64], u: f64, _p: &[f64]) -> DMatrix<f64> {
        let g = 1.0 - x[0] * x[0] - x[1] * x[1];
        let w0 = self.omega0;
        DMatrix::from_row_slice(2, 3, &[-w0 * x[1], g * x[0], u, w0 * x[0], g * x[1], 0.0])
    }

    fn hess_xx(&self, x: &[f64], _u: f64, p: &[f64], v: &[f64]) -> DMatrix<f64> {
        let k = p[1];
        let (a, b) = (x[0], x[1]);
        // Second derivatives of k·x_i·(1 − a² − b²).
        let f0 = [[-6.0 * a, -2.0 * b], [-2.0 * b, -2.0 * a]];
        let f1 = [[-2.0 * b, -2.0 * a], [-2.0 * a, -6.0 * b]];
        let mut out = DMatrix::zeros(2, 2);
        for j in 0..2 {
            out[(0, j)] = k * (f0[j][0] * v[0] + f0[j][1] * v[1]);
            out[(1, j)] = k * (f1[j][0] * v[0] + f1[j][1] * v[1]);
        }
        out
    }

    fn hess_xu(&self, _x: &[f64], _u: f64, _p: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(2, 2)
    }

    fn hess_pu(&self, _x: &[f64], _u: f64, _p: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    }

    fn hess_xp(&self, x: &[f64], _u: f64, _p: &[f64], j: usize) -> DMatrix<f64> {
        let (a, b) = (x[0], x[1]);
        let w0 = self.omega0;
        match j {
            0 => DMatrix::from_row_slice(2, 2, &[0.0, -w0, w0, 0.0]),
            1 => {
                let g = 1.0 - a * a - b * b;
                DMatrix::from_row_slice(2, 2, &[g - 2.0 * a * a, -2.0 * a * b, -2.0 * a * b, g - 2.0 * b * b])
            }
            2 => DMatrix::zeros(2, 2),
            _ => panic!("radial clock has 3 parameters, index {j} out of range"),
        }
    }

    fn state_box(&self) -> Vec<(f64, f64)> {
        vec![(-1.5, 1.5); 2]
    }

    fn seed_state(&self) -> Vec<f64> {
        vec![0.5, 0.0]
    }
}
