//! Unnormalized target densities `p̂(x) = exp(−E(x))` with exact energy gradients.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numerics::Vector;
use crate::scalar::Scalar;

/// An energy `E(x) = −ln p̂(x)` and its gradient.
pub trait TargetDensity<S: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn energy(&self, x: &[S]) -> Result<S>;

    fn grad_energy(&self, x: &[S]) -> Result<Vector<S>>;

    /// `ln Z = ln ∫ p̂`, when known in closed form.
    fn exact_log_norm(&self) -> Option<f64> {
        None
    }
}

/// Standard normal base density `N(0, I_d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BaseDensity {
    pub dim: usize,
}

impl BaseDensity {
    pub fn new(dim: usize) -> Self {
        BaseDensity { dim }
    }

    pub fn log_prob<S: Scalar>(&self, z: &[S]) -> Result<S> {
        check_dim("base density", self.dim, z.len())?;
        Ok(base_log_prob(z))
    }

    pub fn grad_log_prob<S: Scalar>(&self, z: &[S]) -> Result<Vector<S>> {
        check_dim("base density", self.dim, z.len())?;
        Ok(base_grad_log_prob(z))
    }
}

/// `−d/2 · ln(2π) − ‖z‖²/2`
pub fn base_log_prob<S: Scalar>(z: &[S]) -> S {
    let d = S::lit(z.len() as f64);
    let sq: S = z.iter().map(|&v| v * v).sum();
    -S::lit(0.5) * (d * (S::TAU()).ln() + sq)
}

pub fn base_grad_log_prob<S: Scalar>(z: &[S]) -> Vector<S> {
    z.iter().map(|&v| -v).collect()
}

/// Isotropic Gaussian with unnormalized energy `‖x‖² / (2σ²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianTarget {
    pub dim: usize,
    pub sigma: f64,
}

impl<S: Scalar> TargetDensity<S> for GaussianTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn energy(&self, x: &[S]) -> Result<S> {
        check_dim("gaussian target", self.dim, x.len())?;
        let inv = S::lit(0.5 / (self.sigma * self.sigma));
        Ok(inv * x.iter().map(|&v| v * v).sum::<S>())
    }

    fn grad_energy(&self, x: &[S]) -> Result<Vector<S>> {
        check_dim("gaussian target", self.dim, x.len())?;
        let inv = S::lit(1.0 / (self.sigma * self.sigma));
        Ok(x.iter().map(|&v| inv * v).collect())
    }

    fn exact_log_norm(&self) -> Option<f64> {
        let d = self.dim as f64;
        Some(0.5 * d * (std::f64::consts::TAU * self.sigma * self.sigma).ln())
    }
}

/// Normalized mixture `Σ_k w_k N(x; μ_k, σ_k² I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    means: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
    sigmas: Vec<f64>,
    dim: usize,
}

impl GaussianMixture {
    pub fn new(means: Vec<Vec<f64>>, weights: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let k = means.len();
        if k == 0 || weights.len() != k || sigmas.len() != k {
            return Err(Error::Config("mixture needs equal, non-zero numbers of means, weights and sigmas".into()));
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) {
            return Err(Error::Config("mixture means must share one positive dimension".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || sigmas.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Config("mixture weights and sigmas must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights must sum to 1, got {total}")));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(GaussianMixture { means, log_weights, sigmas, dim })
    }

    /// Per-component log joint `ln w_k + ln N(x; μ_k, σ_k²I)`.
    fn component_logs<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let d = self.dim as f64;
        self.means
            .iter()
            .zip(&self.log_weights)
            .zip(&self.sigmas)
            .map(|((mu, &lw), &sig)| {
                let sq: S = x.iter().zip(mu).map(|(&xi, &m)| (xi - S::lit(m)).powi(2)).sum();
                S::lit(lw - 0.5 * d * (std::f64::consts::TAU * sig * sig).ln()) - sq * S::lit(0.5 / (sig * sig))
            })
            .collect()
    }
}

fn log_sum_exp<S: Scalar>(v: &[S]) -> S {
    let m = v.iter().fold(S::neg_infinity(), |a, &b| a.max(b));
    m + v.iter().map(|&x| (x - m).exp()).sum::<S>().ln()
}

impl<S: Scalar> TargetDensity<S> for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn energy(&self, x: &[S]) -> Result<S> {
        check_dim("mixture target", self.dim, x.len())?;
        Ok(-log_sum_exp(&self.component_logs(x)))
    }

    fn grad_energy(&self, x: &[S]) -> Result<Vector<S>> {
        check_dim("mixture target", self.dim, x.len())?;
        let logs = self.component_logs(x);
        let lse = log_sum_exp(&logs);
        let mut g = Vector::zeros(self.dim);
        for ((mu, &sig), &lc) in self.means.iter().zip(&self.sigmas).zip(&logs) {
            let r = (lc - lse).exp() * S::lit(1.0 / (sig * sig));
            for i in 0..self.dim {
                g[i] += r * (x[i] - S::lit(mu[i]));
            }
        }
        Ok(g)
    }

    fn exact_log_norm(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Two-dimensional periodic φ⁴ lattice,
/// `S(φ) = Σ_links (φ_x − φ_y)² + Σ_x (m² φ_x² + λ φ_x⁴)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phi4Lattice {
    pub side: usize,
    pub m2: f64,
    pub lambda: f64,
}

impl Phi4Lattice {
    pub const DEFAULT_M2: f64 = -4.0;
    pub const DEFAULT_LAMBDA: f64 = 6.975;

    pub fn new(side: usize, m2: f64, lambda: f64) -> Result<Self> {
        if side < 2 {
            return Err(Error::Config(format!("lattice side must be >= 2, got {side}")));
        }
        if !(lambda >= 0.0) || !m2.is_finite() {
            return Err(Error::Config("phi4 needs finite m2 and lambda >= 0".into()));
        }
        Ok(Phi4Lattice { side, m2, lambda })
    }

    pub fn n_sites(&self) -> usize {
        self.side * self.side
    }

    #[inline]
    fn site(&self, x: usize, y: usize) -> usize {
        y * self.side + x
    }

    /// `Σ_links (φ_x − φ_y)² = φᵀΔφ`, each site linked forward in both directions.
    pub fn kinetic<S: Scalar>(&self, phi: &[S]) -> Result<S> {
        check_dim("phi4 field", self.n_sites(), phi.len())?;
        let l = self.side;
        let mut k = S::zero();
        for y in 0..l {
            for x in 0..l {
                let v = phi[self.site(x, y)];
                let right = phi[self.site((x + 1) % l, y)];
                let up = phi[self.site(x, (y + 1) % l)];
                k += (v - right).powi(2) + (v - up).powi(2);
            }
        }
        Ok(k)
    }

    /// `(Δφ)_x = Σ_μ (2φ_x − φ_{x+μ} − φ_{x−μ})`
    pub fn laplacian<S: Scalar>(&self, phi: &[S]) -> Result<Vector<S>> {
        check_dim("phi4 field", self.n_sites(), phi.len())?;
        let l = self.side;
        let four = S::lit(4.0);
        let mut out = Vector::zeros(phi.len());
        for y in 0..l {
            for x in 0..l {
                let nb = phi[self.site((x + 1) % l, y)]
                    + phi[self.site((x + l - 1) % l, y)]
                    + phi[self.site(x, (y + 1) % l)]
                    + phi[self.site(x, (y + l - 1) % l)];
                out[self.site(x, y)] = four * phi[self.site(x, y)] - nb;
            }
        }
        Ok(out)
    }

    pub fn action<S: Scalar>(&self, phi: &[S]) -> Result<S> {
        let (m2, lam) = (S::lit(self.m2), S::lit(self.lambda));
        let local: S = phi.iter().map(|&p| {
            let p2 = p * p;
            m2 * p2 + lam * p2 * p2
        }).sum();
        Ok(self.kinetic(phi)? + local)
    }

    /// `∂S/∂φ_x = 2(Δφ)_x + 2m²φ_x + 4λφ_x³`
    pub fn action_grad<S: Scalar>(&self, phi: &[S]) -> Result<Vector<S>> {
        let mut g = self.laplacian(phi)?;
        let (two, four) = (S::lit(2.0), S::lit(4.0));
        let (m2, lam) = (S::lit(self.m2), S::lit(self.lambda));
        for (gi, &p) in g.iter_mut().zip(phi) {
            *gi = two * *gi + two * m2 * p + four * lam * p * p * p;
        }
        Ok(g)
    }

    /// Periodic translation by `(dx, dy)`.
    pub fn shift<S: Scalar>(&self, phi: &[S], dx: usize, dy: usize) -> Vector<S> {
        let l = self.side;
        let mut out = Vector::zeros(phi.len());
        for y in 0..l {
            for x in 0..l {
                out[self.site((x + dx) % l, (y + dy) % l)] = phi[self.site(x, y)];
            }
        }
        out
    }

    /// Quarter-turn rotation `(x, y) → (L−1−y, x)`.
    pub fn rotate90<S: Scalar>(&self, phi: &[S]) -> Vector<S> {
        let l = self.side;
        let mut out = Vector::zeros(phi.len());
        for y in 0..l {
            for x in 0..l {
                out[self.site(l - 1 - y, x)] = phi[self.site(x, y)];
            }
        }
        out
    }

    /// Mirror `(x, y) → (L−1−x, y)`.
    pub fn reflect<S: Scalar>(&self, phi: &[S]) -> Vector<S> {
        let l = self.side;
        let mut out = Vector::zeros(phi.len());
        for y in 0..l {
            for x in 0..l {
                out[self.site(l - 1 - x, y)] = phi[self.site(x, y)];
            }
        }
        out
    }
}

pub fn phi4_energy<S: Scalar>(lat: &Phi4Lattice, phi: &[S]) -> Result<S> {
    lat.action(phi)
}

pub fn phi4_grad<S: Scalar>(lat: &Phi4Lattice, phi: &[S]) -> Result<Vector<S>> {
    lat.action_grad(phi)
}

impl<S: Scalar> TargetDensity<S> for Phi4Lattice {
    fn dim(&self) -> usize {
        self.n_sites()
    }

    fn energy(&self, x: &[S]) -> Result<S> {
        self.action(x)
    }

    fn grad_energy(&self, x: &[S]) -> Result<Vector<S>> {
        self.action_grad(x)
    }
}

/// Closed set of configurable targets.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Gaussian(GaussianTarget),
    Mixture(GaussianMixture),
    Phi4(Phi4Lattice),
}

impl<S: Scalar> TargetDensity<S> for Target {
    fn dim(&self) -> usize {
        match self {
            Target::Gaussian(t) => TargetDensity::<S>::dim(t),
            Target::Mixture(t) => TargetDensity::<S>::dim(t),
            Target::Phi4(t) => TargetDensity::<S>::dim(t),
        }
    }

    fn energy(&self, x: &[S]) -> Result<S> {
        match self {
            Target::Gaussian(t) => t.energy(x),
            Target::Mixture(t) => t.energy(x),
            Target::Phi4(t) => t.energy(x),
        }
    }

    fn grad_energy(&self, x: &[S]) -> Result<Vector<S>> {
        match self {
            Target::Gaussian(t) => t.grad_energy(x),
            Target::Mixture(t) => t.grad_energy(x),
            Target::Phi4(t) => t.grad_energy(x),
        }
    }

    fn exact_log_norm(&self) -> Option<f64> {
        match self {
            Target::Gaussian(t) => TargetDensity::<S>::exact_log_norm(t),
            Target::Mixture(t) => TargetDensity::<S>::exact_log_norm(t),
            Target::Phi4(t) => TargetDensity::<S>::exact_log_norm(t),
        }
    }
}
