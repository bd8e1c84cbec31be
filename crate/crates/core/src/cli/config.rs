//! TOML run configuration.
//!
//! ```toml
//! [train]
//! estimator = "path"        # path | total; required by `train`
//! batch_size = 256
//! iterations = 2000
//! learning_rate = 5e-4
//! beta1 = 0.9
//! beta2 = 0.999
//! eps = 1e-8
//! seed = 0
//! eval_every = 100
//! eval_samples = 1024
//!
//! [flow]
//! hidden = [16]             # at most two hidden layers
//! time_mode = "concat"      # concat | none
//! t1 = 1.0
//! n_steps = 50
//! # init_scale = 0.5        # omit for a zero output layer (identity flow)
//!
//! [target]
//! kind = "phi4"             # gaussian | mixture | phi4 | self
//! side = 4
//! m2 = -4.0
//! lambda = 6.975
//!
//! [compare]
//! seeds = [0, 1, 2]
//!
//! [gradcheck]
//! instances = 3
//! seed = 0
//! # inject_fault = "grad_state_jacobian_trace"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cnf::Estimator;
use crate::dynamics::TimeMode;
use crate::error::{Error, Result};
use crate::odeint::DEFAULT_STEPS;
use crate::trainer::{AdamConfig, ModelSpec, TargetSpec, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub train: TrainSection,
    pub flow: FlowSection,
    pub target: TargetSpec,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub gradcheck: GradcheckSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub estimator: Option<Estimator>,
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub eval_every: usize,
    pub eval_samples: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainSection {
            estimator: None,
            batch_size: 256,
            iterations: 2000,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            seed: 0,
            eval_every: 100,
            eval_samples: 1024,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub hidden: Vec<usize>,
    #[serde(default = "default_time_mode")]
    pub time_mode: TimeMode,
    #[serde(default = "default_t1")]
    pub t1: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default)]
    pub init_scale: Option<f64>,
}

fn default_time_mode() -> TimeMode {
    TimeMode::Concat
}

fn default_t1() -> f64 {
    1.0
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Defaults to `[train.seed]`.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckSection {
    pub instances: usize,
    pub seed: u64,
    /// Weight scale of the random instances.
    pub init_scale: f64,
    /// Test hook: name of a derivative to corrupt.
    pub inject_fault: Option<String>,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        GradcheckSection { instances: 3, seed: 0, init_scale: 0.8, inject_fault: None }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn model(&self) -> ModelSpec {
        ModelSpec {
            hidden: self.flow.hidden.clone(),
            time_mode: self.flow.time_mode,
            init_scale: self.flow.init_scale,
            t1: self.flow.t1,
            n_steps: self.flow.n_steps,
            target: self.target.clone(),
        }
    }

    /// Trainer configuration; fails if `train.estimator` is absent.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let estimator = self
            .train
            .estimator
            .ok_or_else(|| Error::Config("missing field `estimator` in section [train]".into()))?;
        Ok(self.train_config_with(estimator))
    }

    pub fn train_config_with(&self, estimator: Estimator) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            estimator,
            batch_size: t.batch_size,
            iterations: t.iterations,
            adam: AdamConfig { learning_rate: t.learning_rate, beta1: t.beta1, beta2: t.beta2, eps: t.eps },
            seed: t.seed,
            eval_every: t.eval_every,
            eval_samples: t.eval_samples,
            model: self.model(),
        }
    }

    pub fn compare_seeds(&self) -> Vec<u64> {
        if self.compare.seeds.is_empty() {
            vec![self.train.seed]
        } else {
            self.compare.seeds.clone()
        }
    }
}
