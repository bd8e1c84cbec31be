//! Variational inference with continuous normalizing flows.
//!
//! The flow math ([`numerics`], [`dynamics`], [`odeint`], [`targets`], [`cnf`])
//! is generic over [`Scalar`]; the `*F64` aliases below are the concrete types
//! the trainer and CLI use.

pub mod cli;
pub mod cnf;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod numerics;
pub mod odeint;
pub mod scalar;
pub mod targets;
pub mod trainer;

pub use cnf::{Cnf, Estimator, FlowSample, FlowTarget, GradientSample};
pub use dynamics::{DynamicsConfig, Fault, Mlp, ParamVector, TimeMode};
pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream, Vector};
pub use odeint::TimeGrid;
pub use scalar::Scalar;
pub use targets::{BaseDensity, GaussianMixture, GaussianTarget, Phi4Lattice, Target, TargetDensity};

pub type VectorF64 = Vector<f64>;
pub type MatrixF64 = Matrix<f64>;
pub type MlpF64 = Mlp<f64>;
pub type CnfF64 = Cnf<f64>;
pub type TimeGridF64 = TimeGrid<f64>;
pub type FlowSampleF64 = FlowSample<f64>;

pub type VectorF32 = Vector<f32>;
pub type MlpF32 = Mlp<f32>;
pub type CnfF32 = Cnf<f32>;
pub type TimeGridF32 = TimeGrid<f32>;
