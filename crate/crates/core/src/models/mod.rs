//! Oscillator models `ẋ = f(x, u, λ)`, `y = h(x, λ)` with first and second
//! partial derivatives.
//!
//! Built-in models carry analytic derivatives. Models without them can be
//! wrapped in [`FiniteDifference`], which rebuilds every derivative callback
//! from central differences of the vector field.

mod goodwin;
mod morris_lecar;
mod radial;

pub use goodwin::{goodwin_model, Goodwin, GoodwinParams};
pub use morris_lecar::{morris_lecar_model, MlParam, MorrisLecar, MorrisLecarParams};
pub use radial::{radial_clock_model, RadialClock, RadialClockParams};

use nalgebra::{DMatrix, DVector};

/// A single-input single-output oscillator model.
///
/// All callbacks are pure functions of their arguments, so a model can be
/// shared between worker threads.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    /// State dimension `n`.
    fn dim(&self) -> usize;

    /// Labels of the parameter vector; its length is `l`.
    fn param_names(&self) -> Vec<String>;

    /// Nominal parameter vector.
    fn params(&self) -> Vec<f64>;

    fn n_params(&self) -> usize {
        self.param_names().len()
    }

    /// Vector field, written into `out`.
    fn rhs(&self, x: &[f64], u: f64, p: &[f64], out: &mut [f64]);

    /// Scalar output map.
    fn output(&self, x: &[f64], p: &[f64]) -> f64;

    /// `∂f/∂x`, n×n.
    fn jac_x(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64>;

    /// `∂f/∂u`, the input direction.
    fn jac_u(&self, x: &[f64], u: f64, p: &[f64]) -> DVector<f64>;

    /// `∂f/∂λ`, n×l.
    fn jac_p(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64>;

    /// `Σ_k ∂²f_i/∂x_j∂x_k v_k`, n×n.
    fn hess_xx(&self, x: &[f64], u: f64, p: &[f64], v: &[f64]) -> DMatrix<f64>;

    /// `∂²f_i/∂x_j∂u`, n×n. Equals the x-Jacobian of [`Model::jac_u`].
    fn hess_xu(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64>;

    /// `∂²f_i/∂λ_j∂u`, n×l.
    fn hess_pu(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64>;

    /// `∂²f_i/∂x_k∂λ_j` for one parameter `j`, n×n.
    fn hess_xp(&self, x: &[f64], u: f64, p: &[f64], j: usize) -> DMatrix<f64>;

    /// Box in state space where the model is meant to be evaluated; used by
    /// derivative consistency checks and random sampling.
    fn state_box(&self) -> Vec<(f64, f64)>;

    /// A state from which zero-input simulation reaches the limit cycle.
    fn seed_state(&self) -> Vec<f64>;

    /// Convenience wrapper around [`Model::rhs`].
    fn eval(&self, x: &[f64], u: f64, p: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.rhs(x, u, p, out.as_mut_slice());
        out
    }
}

impl<M: Model + ?Sized> Model for &M {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn param_names(&self) -> Vec<String> {
        (**self).param_names()
    }
    fn params(&self) -> Vec<f64> {
        (**self).params()
    }
    fn rhs(&self, x: &[f64], u: f64, p: &[f64], out: &mut [f64]) {
        (**self).rhs(x, u, p, out)
    }
    fn output(&self, x: &[f64], p: &[f64]) -> f64 {
        (**self).output(x, p)
    }
    fn jac_x(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        (**self).jac_x(x, u, p)
    }
    fn jac_u(&self, x: &[f64], u: f64, p: &[f64]) -> DVector<f64> {
        (**self).jac_u(x, u, p)
    }
    fn jac_p(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        (**self).jac_p(x, u, p)
    }
    fn hess_xx(&self, x: &[f64], u: f64, p: &[f64], v: &[f64]) -> DMatrix<f64> {
        (**self).hess_xx(x, u, p, v)
    }
    fn hess_xu(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        (**self).hess_xu(x, u, p)
    }
    fn hess_pu(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        (**self).hess_pu(x, u, p)
    }
    fn hess_xp(&self, x: &[f64], u: f64, p: &[f64], j: usize) -> DMatrix<f64> {
        (**self).hess_xp(x, u, p, j)
    }
    fn state_box(&self) -> Vec<(f64, f64)> {
        (**self).state_box()
    }
    fn seed_state(&self) -> Vec<f64> {
        (**self).seed_state()
    }
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn param_names(&self) -> Vec<String> {
        (**self).param_names()
    }
    fn params(&self) -> Vec<f64> {
        (**self).params()
    }
    fn rhs(&self, x: &[f64], u: f64, p: &[f64], out: &mut [f64]) {
        (**self).rhs(x, u, p, out)
    }
    fn output(&self, x: &[f64], p: &[f64]) -> f64 {
        (**self).output(x, p)
    }
    fn jac_x(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        (**self).jac_x(x, u, p)
    }
    fn jac_u(&self, x: &[f64], u: f64, p: &[f64]) -> DVector<f64> {
        (**self).jac_u(x, u, p)
    }
    fn jac_p(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        (**self).jac_p(x, u, p)
    }
    fn hess_xx(&self, x: &[f64], u: f64, p: &[f64], v: &[f64]) -> DMatrix<f64> {
        (**self).hess_xx(x, u, p, v)
    }
    fn hess_xu(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        (**self).hess_xu(x, u, p)
    }
    fn hess_pu(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        (**self).hess_pu(x, u, p)
    }
    fn hess_xp(&self, x: &[f64], u: f64, p: &[f64], j: usize) -> DMatrix<f64> {
        (**self).hess_xp(x, u, p, j)
    }
    fn state_box(&self) -> Vec<(f64, f64)> {
        (**self).state_box()
    }
    fn seed_state(&self) -> Vec<f64> {
        (**self).seed_state()
    }
}

/// Wraps a model and replaces every derivative callback by central
/// differences of the wrapped vector field.
///
/// Only `rhs` and `output` of the inner model are ever called, so wrapping
/// twice yields the same values as wrapping once.
#[derive(Debug, Clone)]
pub struct FiniteDifference<M> {
    inner: M,
    step: f64,
}

/// Returns `model` with finite-difference derivatives of relative step `step`.
pub fn finite_difference_derivatives<M: Model>(model: M, step: f64) -> crate::Result<FiniteDifference<M>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(crate::Error::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    Ok(FiniteDifference { inner: model, step })
}

impl<M: Model> FiniteDifference<M> {
    pub fn inner(&self) -> &M {
        &self.inner
    }

    fn h(&self, v: f64) -> f64 {
        self.step * v.abs().max(1.0)
    }

    // Second derivatives difference a first derivative; the step balancing
    // truncation against roundoff is larger.
    fn h2(&self, v: f64) -> f64 {
        self.step.sqrt().max(self.step) * 1e-1 * v.abs().max(1.0)
    }

    fn fd_jac_x(&self, x: &[f64], u: f64, p: &[f64], outer: bool) -> DMatrix<f64> {
        let n = self.inner.dim();
        let mut jac = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for k in 0..n {
            let h = if outer { self.h2(x[k]) } else { self.h(x[k]) };
            xp[k] = x[k] + h;
            self.inner.rhs(&xp, u, p, &mut fp);
            xp[k] = x[k] - h;
            self.inner.rhs(&xp, u, p, &mut fm);
            xp[k] = x[k];
            for i in 0..n {
                jac[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }

    fn fd_jac_u(&self, x: &[f64], u: f64, p: &[f64], outer: bool) -> DVector<f64> {
        let n = self.inner.dim();
        let h = if outer { self.h2(u) } else { self.h(u) };
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        self.inner.rhs(x, u + h, p, &mut fp);
        self.inner.rhs(x, u - h, p, &mut fm);
        DVector::from_fn(n, |i, _| (fp[i] - fm[i]) / (2.0 * h))
    }

    fn fd_jac_p(&self, x: &[f64], u: f64, p: &[f64], outer: bool) -> DMatrix<f64> {
        let n = self.inner.dim();
        let l = p.len();
        let mut jac = DMatrix::zeros(n, l);
        let mut pp = p.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for j in 0..l {
            let h = if outer { self.h2(p[j]) } else { self.h(p[j]) };
            pp[j] = p[j] + h;
            self.inner.rhs(x, u, &pp, &mut fp);
            pp[j] = p[j] - h;
            self.inner.rhs(x, u, &pp, &mut fm);
            pp[j] = p[j];
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }
}

impl<M: Model> Model for FiniteDifference<M> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn param_names(&self) -> Vec<String> {
        self.inner.param_names()
    }
    fn params(&self) -> Vec<f64> {
        self.inner.params()
    }
    fn rhs(&self, x: &[f64], u: f64, p: &[f64], out: &mut [f64]) {
        self.inner.rhs(x, u, p, out)
    }
    fn output(&self, x: &[f64], p: &[f64]) -> f64 {
        self.inner.output(x, p)
    }
    fn jac_x(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        self.fd_jac_x(x, u, p, false)
    }
    fn jac_u(&self, x: &[f64], u: f64, p: &[f64]) -> DVector<f64> {
        self.fd_jac_u(x, u, p, false)
    }
    fn jac_p(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        self.fd_jac_p(x, u, p, false)
    }

    fn hess_xx(&self, x: &[f64], u: f64, p: &[f64], v: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let scale = v.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        if scale == 0.0 {
            return DMatrix::zeros(n, n);
        }
        let xnorm = x.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        let h = self.h2(xnorm) / scale;
        let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
        (self.fd_jac_x(&xp, u, p, false) - self.fd_jac_x(&xm, u, p, false)) / (2.0 * h)
    }

    fn hess_xu(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        for k in 0..n {
            let h = self.h2(x[k]);
            xp[k] = x[k] + h;
            let jp = self.fd_jac_u(&xp, u, p, true);
            xp[k] = x[k] - h;
            let jm = self.fd_jac_u(&xp, u, p, true);
            xp[k] = x[k];
            out.set_column(k, &((jp - jm) / (2.0 * h)));
        }
        out
    }

    fn hess_pu(&self, x: &[f64], u: f64, p: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let l = p.len();
        let mut out = DMatrix::zeros(n, l);
        let mut pp = p.to_vec();
        for j in 0..l {
            let h = self.h2(p[j]);
            pp[j] = p[j] + h;
            let jp = self.fd_jac_u(x, u, &pp, true);
            pp[j] = p[j] - h;
            let jm = self.fd_jac_u(x, u, &pp, true);
            pp[j] = p[j];
            out.set_column(j, &((jp - jm) / (2.0 * h)));
        }
        out
    }

    fn hess_xp(&self, x: &[f64], u: f64, p: &[f64], j: usize) -> DMatrix<f64> {
        let mut pp = p.to_vec();
        let h = self.h2(p[j]);
        pp[j] = p[j] + h;
        let jp = self.fd_jac_x(x, u, &pp, true);
        pp[j] = p[j] - h;
        let jm = self.fd_jac_x(x, u, &pp, true);
        (jp - jm) / (2.0 * h)
    }

    fn state_box(&self) -> Vec<(f64, f64)> {
        self.inner.state_box()
    }
    fn seed_state(&self) -> Vec<f64> {
        self.inner.seed_state()
    }
}

/// Central-difference Jacobian of `rhs` with step `step·max(1,|x_k|)`.
///
/// Standalone helper used by derivative consistency checks.
pub fn central_jac_x<M: Model + ?Sized>(model: &M, x: &[f64], u: f64, p: &[f64], step: f64) -> DMatrix<f64> {
    let n = model.dim();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for k in 0..n {
        let h = step * x[k].abs().max(1.0);
        xp[k] = x[k] + h;
        model.rhs(&xp, u, p, &mut fp);
        xp[k] = x[k] - h;
        model.rhs(&xp, u, p, &mut fm);
        xp[k] = x[k];
        for i in 0..n {
            jac[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}


#[cfg(test)]
mod tests {
    use super::*;

    struct Zero;

    impl Model for Zero {
        fn name(&self) -> &str {
            "zero"
        }
        fn dim(&self) -> usize {
            2
        }
        fn param_names(&self) -> Vec<String> {
            vec!["a".into()]
        }
        fn params(&self) -> Vec<f64> {
            vec![1.0]
        }
        fn rhs(&self, _x: &[f64], _u: f64, _p: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn output(&self, x: &[f64], _p: &[f64]) -> f64 {
            x[0]
        }
        fn jac_x(&self, _x: &[f64], _u: f64, _p: &[f64]) -> DMatrix<f64> {
            unreachable!()
        }
        fn jac_u(&self, _x: &[f64], _u: f64, _p: &[f64]) -> DVector<f64> {
            unreachable!()
        }
        fn jac_p(&self, _x: &[f64], _u: f64, _p: &[f64]) -> DMatrix<f64> {
            unreachable!()
        }
        fn hess_xx(&self, _x: &[f64], _u: f64, _p: &[f64], _v: &[f64]) -> DMatrix<f64> {
            unreachable!()
        }
        fn hess_xu(&self, _x: &[f64], _u: f64, _p: &[f64]) -> DMatrix<f64> {
            unreachable!()
        }
        fn hess_pu(&self, _x: &[f64], _u: f64, _p: &[f64]) -> DMatrix<f64> {
            unreachable!()
        }
        fn hess_xp(&self, _x: &[f64], _u: f64, _p: &[f64], _j: usize) -> DMatrix<f64> {
            unreachable!()
        }
        fn state_box(&self) -> Vec<(f64, f64)> {
            vec![(-1.0, 1.0); 2]
        }
        fn seed_state(&self) -> Vec<f64> {
            vec![0.0, 0.0]
        }
    }

    #[test]
    fn zero_field_has_zero_derivatives() {
        let m = finite_difference_derivatives(Zero, 1e-6).unwrap();
        let x = [0.3, -0.2];
        let p = [1.0];
        assert_eq!(m.jac_x(&x, 0.0, &p).amax(), 0.0);
        assert_eq!(m.jac_u(&x, 0.0, &p).amax(), 0.0);
        assert_eq!(m.jac_p(&x, 0.0, &p).amax(), 0.0);
        assert_eq!(m.hess_xx(&x, 0.0, &p, &[1.0, 2.0]).amax(), 0.0);
        assert_eq!(m.hess_xu(&x, 0.0, &p).amax(), 0.0);
        assert_eq!(m.hess_pu(&x, 0.0, &p).amax(), 0.0);
        assert_eq!(m.hess_xp(&x, 0.0, &p, 0).amax(), 0.0);
    }

    #[test]
    fn rejects_nonpositive_step() {
        assert!(finite_difference_derivatives(Zero, 0.0).is_err());
        assert!(finite_difference_derivatives(Zero, -1e-3).is_err());
    }

    #[test]
    fn wrapping_twice_is_idempotent() {
        let g = goodwin_model(GoodwinParams::default()).unwrap();
        let once = finite_difference_derivatives(g.clone(), 1e-6).unwrap();
        let twice = finite_difference_derivatives(finite_difference_derivatives(g, 1e-6).unwrap(), 1e-6).unwrap();
        let p = once.params();
        let x = [1.1, 0.9, 1.02];
        let v = [0.3, -0.1, 0.7];
        assert!((once.jac_x(&x, 0.0, &p) - twice.jac_x(&x, 0.0, &p)).amax() <= 1e-12);
        assert!((once.jac_p(&x, 0.0, &p) - twice.jac_p(&x, 0.0, &p)).amax() <= 1e-12);
        assert!((once.hess_xx(&x, 0.0, &p, &v) - twice.hess_xx(&x, 0.0, &p, &v)).amax() <= 1e-12);
        assert!((once.hess_xu(&x, 0.0, &p) - twice.hess_xu(&x, 0.0, &p)).amax() <= 1e-12);
    }

    #[test]
    fn finite_differences_match_goodwin_analytic() {
        use rand::{Rng, SeedableRng};
        let g = goodwin_model(GoodwinParams::default()).unwrap();
        let fd = finite_difference_derivatives(g.clone(), 1e-6).unwrap();
        let p = g.params();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x: Vec<f64> = g.state_box().iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect();
            let a = g.jac_x(&x, 0.0, &p);
            let b = fd.jac_x(&x, 0.0, &p);
            let err = (&a - &b).amax() / a.amax();
            assert!(err < 1e-6, "relative error {err:e}");
        }
    }
}
