use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Model;
use crate::{Error, Result};

/// Constants of the Morris–Lecar neuron. Defaults are the class-I set with
/// `ḡ_Ca = 4` and `I_app = 40`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MorrisLecarParams {
    pub c: f64,
    pub g_ca: f64,
    pub g_k: f64,
    pub g_l: f64,
    pub v_ca: f64,
    pub v_k: f64,
    pub v_l: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    pub phi: f64,
    pub i_app: f64,
}

impl Default for MorrisLecarParams {
    fn default() -> Self {
        Self {
            c: 20.0,
            g_ca: 4.0,
            g_k: 8.0,
            g_l: 2.0,
            v_ca: 120.0,
            v_k: -80.0,
            v_l: -60.0,
            v1: -1.2,
            v2: 18.0,
            v3: 12.0,
            v4: 17.4,
            phi: 1.0 / 15.0,
            i_app: 40.0,
        }
    }
}

/// Constants that can be exposed as free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlParam {
    IApp,
    GCa,
    GK,
    GL,
    Phi,
    C,
}

impl MlParam {
    pub fn label(self) -> &'static str {
        match self {
            MlParam::IApp => "i_app",
            MlParam::GCa => "g_ca",
            MlParam::GK => "g_k",
            MlParam::GL => "g_l",
            MlParam::Phi => "phi",
            MlParam::C => "c",
        }
    }

    fn get(self, p: &MorrisLecarParams) -> f64 {
        match self {
            MlParam::IApp => p.i_app,
            MlParam::GCa => p.g_ca,
            MlParam::GK => p.g_k,
            MlParam::GL => p.g_l,
            MlParam::Phi => p.phi,
            MlParam::C => p.c,
        }
    }

    fn set(self, p: &mut MorrisLecarParams, v: f64) {
        match self {
            MlParam::IApp => p.i_app = v,
            MlParam::GCa => p.g_ca = v,
            MlParam::GK => p.g_k = v,
            MlParam::GL => p.g_l = v,
            MlParam::Phi => p.phi = v,
            MlParam::C => p.c = v,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MorrisLecar {
    base: MorrisLecarParams,
    free: Vec<MlParam>,
}

/// Builds the model with `(I_app, ḡ_Ca)` as the free parameters.
pub fn morris_lecar_model(params: MorrisLecarParams) -> Result<MorrisLecar> {
    MorrisLecar::with_free(params, vec![MlParam::IApp, MlParam::GCa])
}

/// Values of the three voltage-dependent terms and their first two
/// derivatives in `V`.
struct Gates {
    m: [f64; 3],
    w: [f64; 3],
    c: [f64; 3],
}

fn gates(p: &MorrisLecarParams, v: f64) -> Gates {
    let t1 = ((v - p.v1) / p.v2).tanh();
    let s1 = 1.0 - t1 * t1;
    let t3 = ((v - p.v3) / p.v4).tanh();
    let s3 = 1.0 - t3 * t3;
    let a = (v - p.v3) / (2.0 * p.v4);
    Gates {
        m: [0.5 * (1.0 + t1), s1 / (2.0 * p.v2), -t1 * s1 / (p.v2 * p.v2)],
        w: [0.5 * (1.0 + t3), s3 / (2.0 * p.v4), -t3 * s3 / (p.v4 * p.v4)],
        c: [a.cosh(), a.sinh() / (2.0 * p.v4), a.cosh() / (4.0 * p.v4 * p.v4)],
    }
}

impl MorrisLecar {
    pub fn with_free(params: MorrisLecarParams, free: Vec<MlParam>) -> Result<Self> {
        let p = &params;
        let all = [p.c, p.g_ca, p.g_k, p.g_l, p.v_ca, p.v_k, p.v_l, p.v1, p.v2, p.v3, p.v4, p.phi, p.i_app];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("Morris-Lecar constants must be finite".into()));
        }
        if p.c <= 0.0 {
            return Err(Error::InvalidParameter(format!("capacitance must be positive, got {}", p.c)));
        }
        if p.g_ca < 0.0 || p.g_k < 0.0 || p.g_l < 0.0 {
            return Err(Error::InvalidParameter("conductances must be non-negative".into()));
        }
        if p.v2 == 0.0 || p.v4 == 0.0 {
            return Err(Error::InvalidParameter("V2 and V4 must be nonzero".into()));
        }
        if p.phi <= 0.0 {
            return Err(Error::InvalidParameter(format!("phi must be positive, got {}", p.phi)));
        }
        for (i, a) in free.iter().enumerate() {
            if free[..i].contains(a) {
                return Err(Error::InvalidParameter(format!("parameter {} listed twice", a.label())));
            }
        }
        Ok(Self { base: params, free })
    }

    pub fn constants(&self) -> &MorrisLecarParams {
        &self.base
    }

    pub fn free(&self) -> &[MlParam] {
        &self.free
    }

    fn resolve(&self, lambda: &[f64]) -> MorrisLecarParams {
        let mut p = self.base;
        for (a, &v) in self.free.iter().zip(lambda) {
            a.set(&mut p, v);
        }
        p
    }

    /// Membrane current sum `J` with `C·V̇ = J`.
    fn current(p: &MorrisLecarParams, g: &Gates, x: &[f64], u: f64) -> f64 {
        let (v, w) = (x[0], x[1]);
        p.i_app + u - p.g_ca * g.m[0] * (v - p.v_ca) - p.g_k * w * (v - p.v_k) - p.g_l * (v - p.v_l)
    }

    /// Partial derivatives of the `w` equation divided by `φ`:
    /// `(g, g_V, g_w)` with `ẇ = φ·g`.
    fn recovery(g: &Gates, w: f64) -> (f64, f64, f64) {
        let d = g.w[0] - w;
        (d * g.c[0], g.w[1] * g.c[0] + d * g.c[1], -g.c[0])
    }

    fn jac_x_resolved(p: &MorrisLecarParams, x: &[f64]) -> DMatrix<f64> {
        let (v, w) = (x[0], x[1]);
        let g = gates(p, v);
        let j_v = -p.g_ca * (g.m[1] * (v - p.v_ca) + g.m[0]) - p.g_k * w - p.g_l;
        let j_w = -p.g_k * (v - p.v_k);
        let (_, r_v, r_w) = Self::recovery(&g, w);
        DMatrix::from_row_slice(2, 2, &[j_v / p.c, j_w / p.c, p.phi * r_v, p.phi * r_w])
    }
}

impl Model for MorrisLecar {
    fn name(&self) -> &str {
        "morris_lecar"
    }

    fn dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> Vec<String> {
        self.free.iter().map(|a| a.label().to_string()).collect()
    }

    fn params(&self) -> Vec<f64> {
        self.free.iter().map(|a| a.get(&self.base)).collect()
    }

    fn rhs(&self, x: &[f64], u: f64, lambda: &[f64], out: &mut [f64]) {
        let p = self.resolve(lambda);
        let g = gates(&p, x[0]);
        out[0] = Self::current(&p, &g, x, u) / p.c;
        out[1] = p.phi * Self::recovery(&g, x[1]).0;
    }

    fn output(&self, x: &[f64], _p: &[f64]) -> f64 {
        x[0]
    }

    fn jac_x(&self, x: &[f64], _u: f64, lambda: &[f64]) -> DMatrix<f64> {
        Self::jac_x_resolved(&self.resolve(lambda), x)
    }

    fn jac_u(&self, _x: &[f64], _u: f64, lambda: &[f64]) -> DVector<f64> {
        let p = self.resolve(lambda);
        DVector::from_vec(vec![1.0 / p.c, 0.0])
    }

    fn jac_p(&self, x: &[f64], u: f64, lambda: &[f64]) -> DMatrix<f64> {
        let p = self.resolve(lambda);
        let (v, w) = (x[0], x[1]);
        let g = gates(&p, v);
        let mut out = DMatrix::zeros(2, self.free.len());
        for (j, a) in self.free.iter().enumerate() {
            match a {
                MlParam::IApp => out[(0, j)] = 1.0 / p.c,
                MlParam::GCa => out[(0, j)] = -g.m[0] * (v - p.v_ca) / p.c,
                MlParam::GK => out[(0, j)] = -w * (v - p.v_k) / p.c,
                MlParam::GL => out[(0, j)] = -(v - p.v_l) / p.c,
                MlParam::Phi => out[(1, j)] = Self::recovery(&g, w).0,
                MlParam::C => out[(0, j)] = -Self::current(&p, &g, x, u) / (p.c * p.c),
            }
        }
        out
    }

    fn hess_xx(&self, x: &[f64], _u: f64, lambda: &[f64], dir: &[f64]) -> DMatrix<f64> {
        let p = self.resolve(lambda);
        let (v, w) = (x[0], x[1]);
        let g = gates(&p, v);
        let j_vv = -p.g_ca * (g.m[2] * (v - p.v_ca) + 2.0 * g.m[1]);
        let j_vw = -p.g_k;
        let d = g.w[0] - w;
        let r_vv = g.w[2] * g.c[0] + 2.0 * g.w[1] * g.c[1] + d * g.c[2];
        let r_vw = -g.c[1];
        DMatrix::from_row_slice(
            2,
            2,
            &[
                (j_vv * dir[0] + j_vw * dir[1]) / p.c,
                j_vw * dir[0] / p.c,
                p.phi * (r_vv * dir[0] + r_vw * dir[1]),
                p.phi * r_vw * dir[0],
            ],
        )
    }

    fn hess_xu(&self, _x: &[f64], _u: f64, _p: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(2, 2)
    }

    fn hess_pu(&self, _x: &[f64], _u: f64, lambda: &[f64]) -> DMatrix<f64> {
        let p = self.resolve(lambda);
        let mut out = DMatrix::zeros(2, self.free.len());
        for (j, a) in self.free.iter().enumerate() {
            if *a == MlParam::C {
                out[(0, j)] = -1.0 / (p.c * p.c);
            }
        }
        out
    }

    fn hess_xp(&self, x: &[f64], _u: f64, lambda: &[f64], j: usize) -> DMatrix<f64> {
        let p = self.resolve(lambda);
        let (v, w) = (x[0], x[1]);
        let mut out = DMatrix::zeros(2, 2);
        match self.free[j] {
            MlParam::IApp => {}
            MlParam::GCa => {
                let g = gates(&p, v);
                out[(0, 0)] = -(g.m[1] * (v - p.v_ca) + g.m[0]) / p.c;
            }
            MlParam::GK => {
                out[(0, 0)] = -w / p.c;
                out[(0, 1)] = -(v - p.v_k) / p.c;
            }
            MlParam::GL => out[(0, 0)] = -1.0 / p.c,
            MlParam::Phi => {
                let g = gates(&p, v);
                let (_, r_v, r_w) = Self::recovery(&g, w);
                out[(1, 0)] = r_v;
                out[(1, 1)] = r_w;
            }
            MlParam::C => {
                let jx = Self::jac_x_resolved(&p, x);
                out[(0, 0)] = -jx[(0, 0)] / p.c;
                out[(0, 1)] = -jx[(0, 1)] / p.c;
            }
        }
        out
    }

    fn state_box(&self) -> Vec<(f64, f64)> {
        vec![(-60.0, 40.0), (0.0, 0.6)]
    }

    fn seed_state(&self) -> Vec<f64> {
        vec![-20.0, 0.1]
    }
}
