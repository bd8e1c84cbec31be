//! Free energy, importance weights, ESS, log-partition and reverse-KL estimates.
//!
//! All weight arithmetic is done in log space after subtracting the maximum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnf::Cnf;
use crate::error::{Error, Result};
use crate::numerics::{seeded_stream, Vector};
use crate::scalar::Scalar;
use crate::targets::TargetDensity;

/// Per-sample `ln q`, energy and log-weight `−E − ln q`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchEval {
    log_q: Vec<f64>,
    energy: Vec<f64>,
    log_w: Vec<f64>,
}

impl BatchEval {
    pub fn new(log_q: Vec<f64>, energy: Vec<f64>) -> Result<Self> {
        if log_q.is_empty() || log_q.len() != energy.len() {
            return Err(Error::DimensionMismatch { what: "batch eval", expected: log_q.len(), got: energy.len() });
        }
        let log_w = log_q.iter().zip(&energy).map(|(&q, &e)| -e - q).collect();
        Ok(BatchEval { log_q, energy, log_w })
    }

    pub fn len(&self) -> usize {
        self.log_q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_q.is_empty()
    }

    pub fn log_q(&self) -> &[f64] {
        &self.log_q
    }

    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    pub fn log_w(&self) -> &[f64] {
        &self.log_w
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_err(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

/// Weights `exp(log_w − max)`; errors when no weight is finite and positive.
fn shifted_weights(log_w: &[f64]) -> Result<(f64, Vec<f64>)> {
    if log_w.is_empty() {
        return Err(Error::DegenerateWeights("empty batch"));
    }
    if log_w.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(Error::DegenerateWeights("NaN or +inf log-weight"));
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights("all log-weights are -inf"));
    }
    Ok((max, log_w.iter().map(|&w| (w - max).exp()).collect()))
}

/// `mean(ln q + E)`
pub fn free_energy(batch: &BatchEval) -> f64 {
    mean(&batch.log_q.iter().zip(&batch.energy).map(|(q, e)| q + e).collect::<Vec<_>>())
}

/// Normalized effective sample size `(mean w)² / mean w²` in `(0, 1]`.
pub fn ess(log_w: &[f64]) -> Result<f64> {
    let (_, w) = shifted_weights(log_w)?;
    let n = w.len() as f64;
    let s1: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    Ok((s1 * s1 / (n * s2)).min(1.0))
}

/// `ln Ẑ = ln mean exp(log_w)`
pub fn log_partition(log_w: &[f64]) -> Result<f64> {
    let (max, w) = shifted_weights(log_w)?;
    Ok(max + mean(&w).ln())
}

/// `KL(q, p) ≈ F̂ + ln Ẑ`
pub fn reverse_kl(batch: &BatchEval) -> Result<f64> {
    if batch.len() < 2 {
        return Err(Error::DegenerateWeights("reverse KL needs at least two samples"));
    }
    Ok(free_energy(batch) + log_partition(&batch.log_w)?)
}

pub fn grad_norm(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Point estimates with delta-method Monte-Carlo standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n_samples: usize,
    pub ess: f64,
    pub ess_se: f64,
    pub free_energy: f64,
    pub free_energy_se: f64,
    pub log_z: f64,
    pub log_z_se: f64,
    pub rev_kl: f64,
    pub rev_kl_se: f64,
}

pub fn summarize(batch: &BatchEval) -> Result<EvalSummary> {
    let (_, w) = shifted_weights(&batch.log_w)?;
    let w_mean = mean(&w);
    let w2_mean = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
    let ess_v = ess(&batch.log_w)?;
    let nw: Vec<f64> = w.iter().map(|x| x / w_mean).collect();

    let f: Vec<f64> = batch.log_q.iter().zip(&batch.energy).map(|(q, e)| q + e).collect();
    let ess_infl: Vec<f64> = w.iter().map(|x| 2.0 * x / w_mean - x * x / w2_mean).collect();
    let kl_infl: Vec<f64> = f.iter().zip(&nw).map(|(fi, wi)| fi + wi).collect();

    let log_z = log_partition(&batch.log_w)?;
    Ok(EvalSummary {
        n_samples: batch.len(),
        ess: ess_v,
        ess_se: ess_v * std_err(&ess_infl),
        free_energy: mean(&f),
        free_energy_se: std_err(&f),
        log_z,
        log_z_se: std_err(&nw),
        rev_kl: if batch.len() >= 2 { reverse_kl(batch)? } else { f64::NAN },
        rev_kl_se: std_err(&kl_infl),
    })
}

/// Draws `n` flow samples on streams `(seed, stream_base + i)` and evaluates them.
pub fn evaluate_flow<S, T>(flow: &Cnf<S>, target: &T, n: usize, seed: u64, stream_base: u64) -> Result<BatchEval>
where
    S: Scalar,
    T: TargetDensity<S> + ?Sized,
{
    let rows: Vec<Result<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let z0: Vector<S> = seeded_stream(seed, stream_base + i as u64).std_normal(flow.dim());
            let s = flow.sample_forward(&z0)?;
            Ok((s.log_q.to_f64_lossy(), target.energy(&s.x)?.to_f64_lossy()))
        })
        .collect();
    let mut log_q = Vec::with_capacity(n);
    let mut energy = Vec::with_capacity(n);
    for r in rows {
        let (q, e) = r?;
        log_q.push(q);
        energy.push(e);
    }
    BatchEval::new(log_q, energy)
}

/// Mean and per-entry standard error of the score gradient over `n_samples` draws.
pub fn score_mean_diagnostic<S: Scalar>(flow: &Cnf<S>, n_samples: usize, seed: u64) -> Result<(Vector<f64>, Vector<f64>)> {
    if n_samples < 100 {
        return Err(Error::Config(format!("score diagnostic needs >= 100 samples, got {n_samples}")));
    }
    let scores: Vec<Result<Vector<S>>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let z0: Vector<S> = seeded_stream(seed, i as u64).std_normal(flow.dim());
            flow.score_gradient(&z0)
        })
        .collect();
    let np = flow.n_params();
    let mut sum = vec![0.0; np];
    let mut sum_sq = vec![0.0; np];
    for s in scores {
        let s = s?;
        for (j, v) in s.iter().enumerate() {
            let v = v.to_f64_lossy();
            sum[j] += v;
            sum_sq[j] += v * v;
        }
    }
    let n = n_samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let se: Vec<f64> = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| ((sq / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    Ok((mean.into(), se.into()))
}
