//! Adam training loop over the path or total gradient estimator, paired
//! comparison runs, and the binary checkpoint container.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cnf::{Cnf, Estimator, FlowTarget};
use crate::dynamics::{DynamicsConfig, Mlp, ParamVector, TimeMode};
use crate::error::{check_dim, Error, Result};
use crate::estimators::{self, grad_norm};
use crate::numerics::{seeded_stream, Vector};
use crate::odeint::{TimeGrid, DEFAULT_STEPS};
use crate::targets::{GaussianMixture, GaussianTarget, Phi4Lattice, Target, TargetDensity};

/// Stream id used for parameter initialization.
const INIT_STREAM: u64 = 1 << 63;
/// Base stream id of the evaluation family, disjoint from training batches.
const EVAL_STREAM_BASE: u64 = 1 << 62;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TargetSpec {
    Gaussian { dim: usize, sigma: f64 },
    Mixture { means: Vec<Vec<f64>>, weights: Vec<f64>, sigmas: Vec<f64> },
    Phi4 { side: usize, m2: f64, lambda: f64 },
    /// The initial flow itself, frozen: a perfect-fit target.
    #[serde(rename = "self")]
    SelfFit { dim: usize },
}

impl TargetSpec {
    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::Gaussian { dim, .. } | TargetSpec::SelfFit { dim } => *dim,
            TargetSpec::Mixture { means, .. } => means.first().map_or(0, Vec::len),
            TargetSpec::Phi4 { side, .. } => side * side,
        }
    }
}

/// Everything that determines the model density: architecture, grid, target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hidden: Vec<usize>,
    pub time_mode: TimeMode,
    /// `None`: zero output layer. `Some(s)`: every layer uniform in `±s/√fan_in`.
    pub init_scale: Option<f64>,
    pub t1: f64,
    pub n_steps: usize,
    pub target: TargetSpec,
}

impl ModelSpec {
    pub fn dynamics(&self) -> Result<DynamicsConfig> {
        DynamicsConfig::new(self.target.dim(), self.hidden.clone(), self.time_mode)
    }

    pub fn grid(&self) -> Result<TimeGrid<f64>> {
        TimeGrid::new(0.0, self.t1, self.n_steps)
    }

    pub fn initial_flow(&self, seed: u64) -> Result<Cnf<f64>> {
        let cfg = self.dynamics()?;
        let mut rng = seeded_stream(seed, INIT_STREAM);
        let mlp = match self.init_scale {
            None => Mlp::init(cfg, &mut rng)?,
            Some(s) => Mlp::random(cfg, &mut rng, s)?,
        };
        Ok(Cnf::new(mlp, self.grid()?))
    }

    /// Builds the target. The perfect-fit target freezes the initial flow for `seed`.
    pub fn target(&self, seed: u64) -> Result<Box<dyn TargetDensity<f64>>> {
        Ok(match &self.target {
            TargetSpec::Gaussian { dim, sigma } => {
                if !(*sigma > 0.0) || *dim == 0 {
                    return Err(Error::Config("target.sigma must be > 0 and target.dim >= 1".into()));
                }
                Box::new(Target::Gaussian(GaussianTarget { dim: *dim, sigma: *sigma }))
            }
            TargetSpec::Mixture { means, weights, sigmas } => Box::new(Target::Mixture(GaussianMixture::new(
                means.clone(),
                weights.clone(),
                sigmas.clone(),
            )?)),
            TargetSpec::Phi4 { side, m2, lambda } => Box::new(Target::Phi4(Phi4Lattice::new(*side, *m2, *lambda)?)),
            TargetSpec::SelfFit { .. } => Box::new(FlowTarget::new(self.initial_flow(seed)?)),
        })
    }

    /// Stable 64-bit digest of the model definition. The seed only enters for
    /// the perfect-fit target, whose density depends on it.
    pub fn hash(&self, seed: u64) -> u64 {
        let mut canon = serde_json::to_string(self).expect("model spec serializes");
        if matches!(self.target, TargetSpec::SelfFit { .. }) {
            canon.push_str(&format!("|seed={seed}"));
        }
        let digest = Sha256::digest(canon.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 5e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("train.learning_rate must be > 0".into()));
        }
        for (name, b) in [("train.beta1", self.beta1), ("train.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.eps >= 0.0) {
            return Err(Error::Config("train.eps must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub estimator: Estimator,
    pub batch_size: usize,
    pub iterations: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub eval_every: usize,
    pub eval_samples: usize,
    pub model: ModelSpec,
}

impl TrainConfig {
    /// Desk-scale defaults around a model definition.
    pub fn with_model(model: ModelSpec, estimator: Estimator) -> Self {
        TrainConfig {
            estimator,
            batch_size: 256,
            iterations: 2000,
            adam: AdamConfig::default(),
            seed: 0,
            eval_every: 100,
            eval_samples: 1024,
            model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be >= 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("train.eval_every must be >= 1".into()));
        }
        if self.eval_samples < 2 {
            return Err(Error::Config("train.eval_samples must be >= 2".into()));
        }
        self.adam.validate()?;
        self.model.dynamics()?;
        self.model.grid()?;
        Ok(())
    }
}

pub fn default_phi4_model(side: usize) -> ModelSpec {
    ModelSpec {
        hidden: vec![16],
        time_mode: TimeMode::Concat,
        init_scale: None,
        t1: 1.0,
        n_steps: DEFAULT_STEPS,
        target: TargetSpec::Phi4 { side, m2: Phi4Lattice::DEFAULT_M2, lambda: Phi4Lattice::DEFAULT_LAMBDA },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: ParamVector<f64>,
    pub v: ParamVector<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: Vector::zeros(n), v: Vector::zeros(n), step: 0 }
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients without
/// touching the state.
pub fn adam_step(
    state: &AdamState,
    params: &[f64],
    grad: &[f64],
    cfg: &AdamConfig,
) -> Result<(AdamState, ParamVector<f64>)> {
    let mut next = state.clone();
    let mut p = Vector::from_vec(params.to_vec());
    adam_step_in_place(&mut next, &mut p, grad, cfg)?;
    Ok((next, p))
}

pub fn adam_step_in_place(state: &mut AdamState, params: &mut [f64], grad: &[f64], cfg: &AdamConfig) -> Result<()> {
    check_dim("adam params", state.m.len(), params.len())?;
    check_dim("adam grad", state.m.len(), grad.len())?;
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { step: state.step + 1, index });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// One row of the metrics files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iter: usize,
    pub loss: f64,
    pub ess: f64,
    pub rev_kl: f64,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

impl MetricsRecord {
    pub const CSV_HEADER: &'static str = "iter,loss,ess,rev_kl,grad_norm,wall_ms";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.iter, self.loss, self.ess, self.rev_kl, self.grad_norm, self.wall_ms)
    }

    /// Same record with the timing field cleared, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        MetricsRecord { wall_ms: 0.0, ..self.clone() }
    }
}

/// Loss, gradient norm and gradient wall time for every iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterStat {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<MetricsRecord>,
    pub iters: Vec<IterStat>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub params: ParamVector<f64>,
    pub adam: AdamState,
    pub history: History,
    /// Step-level failure that ended the run early; the history up to it is kept.
    pub error: Option<Error>,
}

/// Mean per-sample gradient and mean loss over one batch, reduced in sample order.
pub fn batch_gradient(
    flow: &Cnf<f64>,
    target: &dyn TargetDensity<f64>,
    estimator: Estimator,
    seed: u64,
    first_stream: u64,
    batch: usize,
) -> Result<(ParamVector<f64>, f64)> {
    let dim = flow.dim();
    let per_sample: Vec<Result<_>> = (0..batch)
        .into_par_iter()
        .map(|i| {
            let z0: Vector<f64> = seeded_stream(seed, first_stream + i as u64).std_normal(dim);
            flow.gradient(estimator, &z0, target)
        })
        .collect();
    let mut grad = Vector::zeros(flow.n_params());
    let mut loss = 0.0;
    for s in per_sample {
        let s = s?;
        grad.axpy(1.0, &s.grad);
        loss += s.loss();
    }
    let inv = 1.0 / batch as f64;
    Ok((grad.scaled(inv), loss * inv))
}

fn eval_point(flow: &Cnf<f64>, target: &dyn TargetDensity<f64>, cfg: &TrainConfig, k: usize) -> (f64, f64) {
    let base = EVAL_STREAM_BASE + (k * cfg.eval_samples) as u64;
    match estimators::evaluate_flow(flow, target, cfg.eval_samples, cfg.seed, base) {
        Ok(batch) => (
            estimators::ess(batch.log_w()).unwrap_or(f64::NAN),
            estimators::reverse_kl(&batch).unwrap_or(f64::NAN),
        ),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(cfg, |_| {})
}

/// Runs training, calling `on_record` after each metrics record is appended.
pub fn train_with<F: FnMut(&MetricsRecord)>(cfg: &TrainConfig, mut on_record: F) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut flow = cfg.model.initial_flow(cfg.seed)?;
    let target = cfg.model.target(cfg.seed)?;
    let mut params = flow.params();
    let mut adam = AdamState::new(params.len());
    let mut history = History::default();

    for i in 0..cfg.iterations {
        let started = Instant::now();
        let first = (i as u64) * cfg.batch_size as u64;
        let step = batch_gradient(&flow, target.as_ref(), cfg.estimator, cfg.seed, first, cfg.batch_size)
            .and_then(|(g, loss)| {
                if !loss.is_finite() {
                    return Err(Error::NonFiniteGradient { step: adam.step + 1, index: usize::MAX });
                }
                adam_step_in_place(&mut adam, &mut params, &g, &cfg.adam)?;
                Ok((g, loss))
            })
            .and_then(|(g, loss)| {
                flow = flow.with_params(&params)?;
                Ok((g, loss))
            });
        let (g, loss) = match step {
            Ok(v) => v,
            Err(e) => {
                return Ok(TrainOutcome { params, adam, history, error: Some(e) });
            }
        };
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        let gn = grad_norm(&g);
        history.iters.push(IterStat { iter: i + 1, loss, grad_norm: gn, wall_ms });

        if (i + 1) % cfg.eval_every == 0 || i + 1 == cfg.iterations {
            let (ess, rev_kl) = eval_point(&flow, target.as_ref(), cfg, history.records.len());
            let rec = MetricsRecord { iter: i + 1, loss, ess, rev_kl, grad_norm: gn, wall_ms };
            on_record(&rec);
            history.records.push(rec);
        }
    }
    Ok(TrainOutcome { params, adam, history, error: None })
}

#[derive(Debug)]
pub struct RunResult {
    pub estimator: Estimator,
    pub seed: u64,
    pub outcome: Result<TrainOutcome>,
}

impl RunResult {
    pub fn history(&self) -> Option<&History> {
        self.outcome.as_ref().ok().map(|o| &o.history)
    }

    /// Run finished all iterations with finite final metrics.
    pub fn completed(&self) -> bool {
        matches!(&self.outcome, Ok(o) if o.error.is_none())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub runs: usize,
    pub failed_runs: usize,
    pub final_ess_mean: f64,
    /// `None` for fewer than two runs.
    pub final_ess_sd: Option<f64>,
    pub ms_per_iter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub path: EstimatorSummary,
    pub total: EstimatorSummary,
    /// Path over total mean wall-clock per iteration.
    pub time_ratio: f64,
}

#[derive(Debug)]
pub struct Comparison {
    pub runs: Vec<RunResult>,
    pub summary: ComparisonSummary,
}

/// Trains both estimators on every seed. Runs are interleaved per seed so that
/// slow drift in machine load affects both estimators alike.
pub fn compare_estimators(base: &TrainConfig, seeds: &[u64]) -> Result<Comparison> {
    base.validate()?;
    let mut runs = Vec::with_capacity(2 * seeds.len());
    for &seed in seeds {
        for estimator in [Estimator::Path, Estimator::Total] {
            let cfg = TrainConfig { estimator, seed, ..base.clone() };
            runs.push(RunResult { estimator, seed, outcome: train(&cfg) });
        }
    }
    let summary = ComparisonSummary {
        path: summarize_runs(&runs, Estimator::Path),
        total: summarize_runs(&runs, Estimator::Total),
        time_ratio: f64::NAN,
    };
    let time_ratio = summary.path.ms_per_iter / summary.total.ms_per_iter;
    Ok(Comparison { runs, summary: ComparisonSummary { time_ratio, ..summary } })
}

fn summarize_runs(runs: &[RunResult], estimator: Estimator) -> EstimatorSummary {
    let mine: Vec<&RunResult> = runs.iter().filter(|r| r.estimator == estimator).collect();
    let finals: Vec<f64> = mine
        .iter()
        .filter_map(|r| r.history())
        .filter_map(|h| h.records.last().map(|rec| rec.ess))
        .collect();
    let times: Vec<f64> = mine
        .iter()
        .filter_map(|r| r.history())
        .flat_map(|h| h.iters.iter().map(|s| s.wall_ms))
        .collect();
    let n = finals.len();
    let mean = if n == 0 { f64::NAN } else { finals.iter().sum::<f64>() / n as f64 };
    let sd = (n >= 2).then(|| (finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    EstimatorSummary {
        estimator,
        runs: mine.len(),
        failed_runs: mine.iter().filter(|r| !r.completed()).count(),
        final_ess_mean: mean,
        final_ess_sd: sd,
        ms_per_iter: if times.is_empty() { f64::NAN } else { times.iter().sum::<f64>() / times.len() as f64 },
    }
}

// ---- checkpoint container ----
//
// little-endian:
//   magic   [u8; 8] = "PFLOWCKP"
//   version u8      = 1
//   hash    u64     model spec digest
//   n       u64     parameter count
//   params  [f64; n]
//   step    u64     Adam step
//   m       [f64; n]
//   v       [f64; n]

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"PFLOWCKP";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub params: ParamVector<f64>,
    pub adam: AdamState,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let n = self.params.len();
        let mut out = Vec::with_capacity(8 + 1 + 8 + 8 + 8 * (3 * n + 1));
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        out.extend_from_slice(&self.config_hash.to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        let put = |out: &mut Vec<u8>, v: &[f64]| v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        put(&mut out, &self.params);
        out.extend_from_slice(&self.adam.step.to_le_bytes());
        put(&mut out, &self.adam.m);
        put(&mut out, &self.adam.v);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor(bytes);
        if cur.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic header".into()));
        }
        let version = cur.take(1)?[0];
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let config_hash = cur.u64()?;
        let n = cur.u64()? as usize;
        if n > bytes.len() / 8 {
            return Err(Error::Checkpoint("parameter count exceeds file size".into()));
        }
        let params = cur.floats(n)?;
        let step = cur.u64()?;
        let m = cur.floats(n)?;
        let v = cur.floats(n)?;
        if !cur.0.is_empty() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint { config_hash, params: params.into(), adam: AdamState { m: m.into(), v: v.into(), step } })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::decode(&buf)
    }
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.0.len() < k {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let (head, tail) = self.0.split_at(k);
        self.0 = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self.take(8 * n)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}
