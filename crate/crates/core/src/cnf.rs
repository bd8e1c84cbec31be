//! Continuous normalizing flow `x = z_T`, `dz/dt = f_θ(z, t)`, with constant-memory
//! gradient estimators.
//!
//! * [`Cnf::sample_forward`] integrates `[z, ℓ]` with `dℓ/dt = tr(∂f/∂z)`.
//! * [`Cnf::forward_aug`] additionally carries `α_t = ∂ln q_θ(z_t)/∂z_t`, evolved by
//!   `dα/dt = −αᵀ ∂f/∂z − ∂_z tr(∂f/∂z)` from `α_0 = ∂ln q_Z(z_0)/∂z_0`.
//! * [`Cnf::adjoint_backward`] integrates `[z, a, p]` from `T` to `0`, recomputing
//!   `z` in reverse, with `da/dt = −aᵀ∂f/∂z − a_l ∂_z tr` and
//!   `dp/dt = −(aᵀ∂f/∂θ + a_l ∂_θ tr)`.
//!
//! Estimators for the per-sample loss `ln q_θ(x) + E(x)`:
//!
//! | estimator | forward        | terminal `a`  | `a_l` |
//! |-----------|----------------|---------------|-------|
//! | total     | `[z, ℓ]`       | `∇E(x)`       | `−1`  |
//! | path      | `[z, ℓ, α]`    | `α_T + ∇E(x)` | `0`   |
//! | score     | `[z, ℓ, α]`    | `−α_T`        | `−1`  |
//!
//! The adjoint is linear in `(a, a_l)`, so total = path + score holds to roundoff.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Mlp, ParamVector};
use crate::error::{check_dim, Result};
use crate::numerics::Vector;
use crate::odeint::{Rk4, TimeGrid};
use crate::scalar::Scalar;
use crate::targets::{base_grad_log_prob, base_log_prob, TargetDensity};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Path,
    Total,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Path => "path",
            Estimator::Total => "total",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "path" => Ok(Estimator::Path),
            "total" => Ok(Estimator::Total),
            other => Err(format!("unknown estimator `{other}` (expected `path` or `total`)")),
        }
    }
}

/// A flow draw `x = g_θ(z0)` and its log-density.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSample<S> {
    pub x: Vector<S>,
    pub log_q: S,
    /// `∂ln q_θ(x)/∂x`, present when produced by [`Cnf::forward_aug`].
    pub dlogq_dx: Option<Vector<S>>,
    pub z0: Vector<S>,
}

/// A per-sample gradient together with the loss it differentiates.
#[derive(Clone, Debug)]
pub struct GradientSample<S> {
    pub grad: ParamVector<S>,
    pub log_q: S,
    pub energy: S,
}

impl<S: Scalar> GradientSample<S> {
    /// `ln q_θ(x) + E(x)`
    pub fn loss(&self) -> S {
        self.log_q + self.energy
    }
}

#[derive(Clone, Debug)]
pub struct Cnf<S> {
    mlp: Mlp<S>,
    grid: TimeGrid<S>,
}

impl<S: Scalar> Cnf<S> {
    pub fn new(mlp: Mlp<S>, grid: TimeGrid<S>) -> Self {
        Cnf { mlp, grid }
    }

    pub fn mlp(&self) -> &Mlp<S> {
        &self.mlp
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.mlp.state_dim()
    }

    pub fn n_params(&self) -> usize {
        self.mlp.n_params()
    }

    pub fn params(&self) -> ParamVector<S> {
        self.mlp.params()
    }

    /// Same architecture and grid with different parameters.
    pub fn with_params(&self, params: &[S]) -> Result<Self> {
        Ok(Cnf { mlp: Mlp::from_params(self.mlp.config().clone(), params)?, grid: self.grid })
    }

    /// Integrates `[z, ℓ]` over `grid`. Returns the final `(z, ℓ)`.
    fn integrate_with_logdet(&self, z: &[S], grid: &TimeGrid<S>) -> Result<(Vector<S>, S)> {
        let d = self.dim();
        let mut state = Vec::with_capacity(d + 1);
        state.extend_from_slice(z);
        state.push(S::zero());
        let mut ws = self.mlp.workspace();
        let mlp = &self.mlp;
        let mut rhs = |t: S, s: &[S], ds: &mut [S]| {
            let (dz, dl) = ds.split_at_mut(d);
            dl[0] = mlp.eval_field_trace(&mut ws, &s[..d], t, dz);
        };
        Rk4::new(d + 1).integrate(&mut rhs, &mut state, grid)?;
        let logdet = state[d];
        state.truncate(d);
        Ok((Vector::from_vec(state), logdet))
    }

    /// `x = z_T` and `ln q_θ(x) = ln q_Z(z0) − ∫ tr dt`.
    pub fn sample_forward(&self, z0: &[S]) -> Result<FlowSample<S>> {
        check_dim("flow base sample", self.dim(), z0.len())?;
        let (x, logdet) = self.integrate_with_logdet(z0, &self.grid)?;
        Ok(FlowSample { x, log_q: base_log_prob(z0) - logdet, dlogq_dx: None, z0: z0.to_vec().into() })
    }

    /// Single forward sweep over `[z, ℓ, α]` returning `x`, `ln q_θ(x)` and `∂ln q_θ(x)/∂x`.
    pub fn forward_aug(&self, z0: &[S]) -> Result<FlowSample<S>> {
        check_dim("flow base sample", self.dim(), z0.len())?;
        let d = self.dim();
        let mut state = Vec::with_capacity(2 * d + 1);
        state.extend_from_slice(z0);
        state.push(S::zero());
        state.extend_from_slice(&base_grad_log_prob(z0));
        let mut ws = self.mlp.workspace();
        let mlp = &self.mlp;
        let mut rhs = |t: S, s: &[S], ds: &mut [S]| {
            let (dz, rest) = ds.split_at_mut(d);
            let (dl, da) = rest.split_at_mut(1);
            dl[0] = mlp.eval_score_dynamics(&mut ws, &s[..d], t, &s[d + 1..], dz, da);
        };
        Rk4::new(2 * d + 1).integrate(&mut rhs, &mut state, &self.grid)?;
        let alpha = Vector::from_vec(state[d + 1..].to_vec());
        let log_q = base_log_prob(z0) - state[d];
        state.truncate(d);
        Ok(FlowSample { x: Vector::from_vec(state), log_q, dlogq_dx: Some(alpha), z0: z0.to_vec().into() })
    }

    /// Integrates the dynamics backward from `(x, T)` to time 0.
    pub fn inverse(&self, x: &[S]) -> Result<Vector<S>> {
        check_dim("flow sample", self.dim(), x.len())?;
        Ok(self.integrate_with_logdet(x, &self.grid.reversed())?.0)
    }

    /// Preimage of `x` under the discrete forward map, found by correcting the
    /// reverse-time inverse until the forward solve reproduces `x` to `tol`.
    pub fn inverse_exact(&self, x: &[S], tol: S, max_iter: usize) -> Result<Vector<S>> {
        let back_x = self.inverse(x)?;
        let mut z = back_x.clone();
        let scale = S::one() + Vector::from_vec(x.to_vec()).max_abs();
        for _ in 0..max_iter {
            let fx = self.integrate_with_logdet(&z, &self.grid)?.0;
            let resid = fx.sub(x)?.max_abs();
            if resid <= tol * scale {
                break;
            }
            let back_fx = self.inverse(&fx)?;
            for i in 0..z.len() {
                z[i] += back_x[i] - back_fx[i];
            }
        }
        Ok(z)
    }

    /// `ln q_θ(x)` by reverse integration: `ln q_Z(z_0) − ∫ tr dt`.
    pub fn log_density(&self, x: &[S]) -> Result<S> {
        check_dim("flow sample", self.dim(), x.len())?;
        let (z0, neg_logdet) = self.integrate_with_logdet(x, &self.grid.reversed())?;
        Ok(base_log_prob(&z0) + neg_logdet)
    }

    /// Reverse adjoint pass from `(x, T)` with terminal state cotangent
    /// `terminal_a` and log-det cotangent `a_l`. Returns `(dL/dθ, dL/dz_0)`.
    pub fn adjoint_backward(&self, x: &[S], terminal_a: &[S], a_l: S) -> Result<(ParamVector<S>, Vector<S>)> {
        let d = self.dim();
        check_dim("flow sample", d, x.len())?;
        check_dim("terminal adjoint", d, terminal_a.len())?;
        let np = self.n_params();
        let mut state = vec![S::zero(); 2 * d + np];
        state[..d].copy_from_slice(x);
        state[d..2 * d].copy_from_slice(terminal_a);
        let mut ws = self.mlp.workspace();
        let mlp = &self.mlp;
        let mut rhs = |t: S, s: &[S], ds: &mut [S]| {
            let (dz, rest) = ds.split_at_mut(d);
            let (da, dp) = rest.split_at_mut(d);
            mlp.eval_adjoint(&mut ws, &s[..d], t, &s[d..2 * d], a_l, dz, da, dp);
        };
        Rk4::new(2 * d + np).integrate(&mut rhs, &mut state, &self.grid.reversed())?;
        let a0 = Vector::from_vec(state[d..2 * d].to_vec());
        let pgrad = Vector::from_vec(state.split_off(2 * d));
        Ok((pgrad, a0))
    }

    /// `d/dθ [ln q_Z(z0) − ℓ_T + E(z_T)]` via the adjoint with `a_l = −1`.
    pub fn total_gradient<T: TargetDensity<S> + ?Sized>(&self, z0: &[S], target: &T) -> Result<GradientSample<S>> {
        let sample = self.sample_forward(z0)?;
        let grad_e = target.grad_energy(&sample.x)?;
        let energy = target.energy(&sample.x)?;
        let (grad, _) = self.adjoint_backward(&sample.x, &grad_e, -S::one())?;
        Ok(GradientSample { grad, log_q: sample.log_q, energy })
    }

    /// `▽_θ [ln q_θ(x) + E(x)] = (α_T + ∇E(x))ᵀ ∂x/∂θ`.
    pub fn path_gradient<T: TargetDensity<S> + ?Sized>(&self, z0: &[S], target: &T) -> Result<GradientSample<S>> {
        let sample = self.forward_aug(z0)?;
        let mut terminal = target.grad_energy(&sample.x)?;
        let energy = target.energy(&sample.x)?;
        terminal.axpy(S::one(), sample.dlogq_dx.as_ref().expect("forward_aug sets dlogq_dx"));
        let (grad, _) = self.adjoint_backward(&sample.x, &terminal, S::zero())?;
        Ok(GradientSample { grad, log_q: sample.log_q, energy })
    }

    /// `∂_θ ln q_θ(x)` at fixed `x = g_θ(z0)`.
    pub fn score_gradient(&self, z0: &[S]) -> Result<ParamVector<S>> {
        let sample = self.forward_aug(z0)?;
        let alpha = sample.dlogq_dx.expect("forward_aug sets dlogq_dx");
        Ok(self.adjoint_backward(&sample.x, &alpha.scaled(-S::one()), -S::one())?.0)
    }

    pub fn gradient<T: TargetDensity<S> + ?Sized>(
        &self,
        estimator: Estimator,
        z0: &[S],
        target: &T,
    ) -> Result<GradientSample<S>> {
        match estimator {
            Estimator::Path => self.path_gradient(z0, target),
            Estimator::Total => self.total_gradient(z0, target),
        }
    }
}

/// Target whose energy is `−ln q` of a frozen flow, so the flow with the same
/// parameters is a perfect fit.
///
/// Evaluations go through [`Cnf::inverse_exact`], so the returned gradient
/// reproduces the flow's own `∂ln q/∂x` to roundoff at every forward sample.
#[derive(Clone, Debug)]
pub struct FlowTarget<S> {
    flow: Cnf<S>,
}

impl<S: Scalar> FlowTarget<S> {
    pub fn new(flow: Cnf<S>) -> Self {
        FlowTarget { flow }
    }

    fn preimage(&self, x: &[S]) -> Result<Vector<S>> {
        self.flow.inverse_exact(x, S::epsilon() * S::lit(4.0), 8)
    }
}

impl<S: Scalar> TargetDensity<S> for FlowTarget<S> {
    fn dim(&self) -> usize {
        self.flow.dim()
    }

    fn energy(&self, x: &[S]) -> Result<S> {
        let z0 = self.preimage(x)?;
        Ok(-self.flow.sample_forward(&z0)?.log_q)
    }

    fn grad_energy(&self, x: &[S]) -> Result<Vector<S>> {
        let z0 = self.preimage(x)?;
        let s = self.flow.forward_aug(&z0)?;
        Ok(s.dlogq_dx.expect("forward_aug sets dlogq_dx").scaled(-S::one()))
    }

    fn exact_log_norm(&self) -> Option<f64> {
        Some(0.0)
    }
}
