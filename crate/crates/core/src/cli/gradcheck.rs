//! Oracle suite behind `pathflow gradcheck`.

use crate::cli::config::RunConfig;
use crate::cnf::{Cnf, FlowTarget};
use crate::dynamics::{DynamicsConfig, Fault, Mlp, TimeMode};
use crate::error::{Error, Result};
use crate::numerics::{finite_diff_grad, max_rel_err, seeded_stream, Vector};
use crate::odeint::TimeGrid;
use crate::targets::base_log_prob;

const FD_TOL: f64 = 1e-5;
const FD_FLOOR: f64 = 1e-8;
const DECOMPOSITION_TOL: f64 = 1e-8;
const PERFECT_FIT_TOL: f64 = 1e-8;
const CLOSED_FORM_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_err: f64,
    pub tol: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_err < self.tol
    }
}

pub fn parse_fault(name: &str) -> Result<Fault> {
    match name {
        "grad_state_jacobian_trace" => Ok(Fault::StateTraceGradient),
        other => Err(Error::Config(format!(
            "unknown gradcheck.inject_fault `{other}` (expected \"grad_state_jacobian_trace\")"
        ))),
    }
}

#[derive(Default)]
struct Acc(Vec<CheckResult>);

impl Acc {
    fn record(&mut self, name: &'static str, err: f64, tol: f64) {
        let err = if err.is_nan() { f64::INFINITY } else { err };
        match self.0.iter_mut().find(|c| c.name == name) {
            Some(c) => c.max_err = c.max_err.max(err),
            None => self.0.push(CheckResult { name, max_err: err, tol }),
        }
    }
}

fn lossy<F: FnMut(&[f64]) -> Result<f64>>(mut f: F) -> impl FnMut(&[f64]) -> f64 {
    move |x| f(x).unwrap_or(f64::NAN)
}


pub fn run_suite(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let gc = &cfg.gradcheck;
    let fault = gc.inject_fault.as_deref().map(parse_fault).transpose()?;
    let model = cfg.model();
    let dyn_cfg = model.dynamics()?;
    let grid = model.grid()?;
    let target = model.target(cfg.train.seed)?;
    let d = dyn_cfg.state_dim;
    let mut acc = Acc::default();

    for inst in 0..gc.instances.max(1) {
        let mut rng = seeded_stream(gc.seed, inst as u64);
        let mlp = Mlp::random(dyn_cfg.clone(), &mut rng, gc.init_scale)?.with_fault(fault);
        let theta = mlp.params();
        let with = |p: &[f64]| Mlp::from_params(dyn_cfg.clone(), p).map(|m| m.with_fault(fault));
        let z: Vector<f64> = rng.std_normal(d);
        let a: Vector<f64> = rng.std_normal(d);
        let t = 0.37;

        let af = |m: &Mlp<f64>, zz: &[f64]| m.forward(zz, t).map(|f| f.dot(&a));
        let fd = finite_diff_grad(lossy(|zz| af(&mlp, zz)), &z)?;
        acc.record("vjp_state", max_rel_err(&mlp.vjp_state(&z, t, &a)?, &fd, FD_FLOOR), FD_TOL);
        let fd = finite_diff_grad(lossy(|p| af(&with(p)?, &z)), &theta)?;
        acc.record("vjp_params", max_rel_err(&mlp.vjp_params(&z, t, &a)?, &fd, FD_FLOOR), FD_TOL);

        let tr = mlp.jacobian_trace(&z, t)?;
        let dense = mlp.jacobian(&z, t)?.trace();
        acc.record("jacobian_trace", max_rel_err(&[tr], &[dense], FD_FLOOR), FD_TOL);
        let fd = finite_diff_grad(lossy(|zz| mlp.jacobian_trace(zz, t)), &z)?;
        acc.record(
            "grad_state_jacobian_trace",
            max_rel_err(&mlp.grad_state_jacobian_trace(&z, t)?, &fd, FD_FLOOR),
            FD_TOL,
        );
        let fd = finite_diff_grad(lossy(|p| with(p)?.jacobian_trace(&z, t)), &theta)?;
        acc.record(
            "grad_params_jacobian_trace",
            max_rel_err(&mlp.grad_params_jacobian_trace(&z, t)?, &fd, FD_FLOOR),
            FD_TOL,
        );

        let flow = Cnf::new(mlp.clone(), grid);
        let z0: Vector<f64> = rng.std_normal(d);
        let s = flow.forward_aug(&z0)?;
        let alpha = s.dlogq_dx.clone().expect("forward_aug sets dlogq_dx");
        let fd = finite_diff_grad(lossy(|x| flow.log_density(x)), &s.x)?;
        acc.record("alpha_terminal", max_rel_err(&alpha, &fd, FD_FLOOR), FD_TOL);

        let total = flow.total_gradient(&z0, target.as_ref())?.grad;
        let path = flow.path_gradient(&z0, target.as_ref())?.grad;
        let score = flow.score_gradient(&z0)?;
        acc.record("decomposition", max_rel_err(&total, &path.add(&score)?, FD_FLOOR), DECOMPOSITION_TOL);

        let fit = FlowTarget::new(flow.clone());
        let g = flow.path_gradient(&z0, &fit)?.grad;
        acc.record("perfect_fit_path", g.norm() / (1.0 + theta.norm()), PERFECT_FIT_TOL);
    }

    linear_closed_form(&mut acc)?;
    Ok(acc.0)
}

/// `f = a·z` in one dimension: `x = z0·e^{aT}`, `ln q = ln q_Z(z0) − aT`,
/// `α_T = −x·e^{−2aT}`.
fn linear_closed_form(acc: &mut Acc) -> Result<()> {
    let (a, t1): (f64, f64) = (0.7, 1.0);
    let cfg = DynamicsConfig::new(1, vec![], TimeMode::None)?;
    let flow = Cnf::new(Mlp::from_params(cfg, &[a, 0.0])?, TimeGrid::new(0.0, t1, 50)?);
    let mut worst: f64 = 0.0;
    for z0 in [-1.3, 0.4, 2.1] {
        let s = flow.forward_aug(&[z0])?;
        let x = z0 * (a * t1).exp();
        let log_q = base_log_prob(&[z0]) - a * t1;
        let alpha = -x * (-2.0 * a * t1).exp();
        worst = worst
            .max(max_rel_err(&s.x, &[x], 0.0))
            .max(max_rel_err(&[s.log_q], &[log_q], 0.0))
            .max(max_rel_err(s.dlogq_dx.as_ref().expect("set"), &[alpha], 0.0));
    }
    acc.record("linear_closed_form", worst, CLOSED_FORM_TOL);
    Ok(())
}

pub fn render_table(results: &[CheckResult]) -> String {
    let mut out = format!("{:<28} {:>12} {:>10}  status\n", "check", "max_err", "tol");
    for r in results {
        out.push_str(&format!(
            "{:<28} {:>12.3e} {:>10.0e}  {}\n",
            r.name,
            r.max_err,
            r.tol,
            if r.passed() { "ok" } else { "FAIL" }
        ));
    }
    out
}

