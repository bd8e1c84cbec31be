//! Time-dependent vector field `f_θ(z, t)` as a tanh MLP with exact first
//! derivatives and exact Jacobian-trace derivatives.
//!
//! Layer `k` computes `h_k = W_k u_{k-1} + b_k`, hidden layers apply `u_k =
//! tanh(h_k)`, and the last layer is affine. The input `u_0` is `z`, or `[z, t]`
//! in [`TimeMode::Concat`]. With no hidden layers the field is `A u_0 + b`.
//!
//! The Jacobian is `J = W_out D_K W_K ⋯ D_1 W_1[:, :d]` with `D_k =
//! diag(tanh'(h_k))`. Every derivative below (VJPs, the trace, and the trace's
//! state and parameter gradients) runs through one backward sweep over the
//! layer stack, driven by a state cotangent `a` and a trace weight `a_l`:
//!
//! `G_{K+1} = a`, `G_k = tanh'(h_k) ⊙ (W_{k+1}ᵀ G_{k+1}) + a_l · ∂tr/∂h_k|_direct`
//!
//! which yields `aᵀJ + a_l ∂_z tr` as `W_1[:, :d]ᵀ G_1` and the matching
//! parameter cotangent from the outer products `G_k u_{k-1}ᵀ` plus the terms
//! where `W_k` appears explicitly inside the trace.
//!
//! Flat parameter layout: for each layer in order, `W_k` row-major then `b_k`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numerics::{axpy, dot, Matrix, RngStream, Vector};
use crate::scalar::Scalar;

/// Flat trainable parameters in the [`Mlp`] layout.
pub type ParamVector<S> = Vector<S>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    /// `t` is appended to the input as an extra column.
    Concat,
    /// Autonomous field.
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub state_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub time_mode: TimeMode,
}

impl DynamicsConfig {
    pub fn new(state_dim: usize, hidden_widths: Vec<usize>, time_mode: TimeMode) -> Result<Self> {
        let cfg = DynamicsConfig { state_dim, hidden_widths, time_mode };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Autonomous linear field `f(z) = A z + b`.
    pub fn linear(state_dim: usize) -> Self {
        DynamicsConfig { state_dim, hidden_widths: Vec::new(), time_mode: TimeMode::None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 {
            return Err(Error::Config("dynamics.state_dim must be at least 1".into()));
        }
        if self.hidden_widths.len() > 2 {
            return Err(Error::Config(format!(
                "dynamics.hidden supports at most 2 layers, got {}",
                self.hidden_widths.len()
            )));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::Config("dynamics.hidden widths must be positive".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        match self.time_mode {
            TimeMode::Concat => self.state_dim + 1,
            TimeMode::None => self.state_dim,
        }
    }

    /// `(rows, cols)` of each layer's weight matrix, input layer first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_widths.len() + 1);
        let mut fan_in = self.input_dim();
        for &w in &self.hidden_widths {
            shapes.push((w, fan_in));
            fan_in = w;
        }
        shapes.push((self.state_dim, fan_in));
        shapes
    }

    pub fn n_params(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum()
    }

    pub fn depth(&self) -> usize {
        self.hidden_widths.len()
    }
}

#[derive(Clone, Debug)]
struct Layer<S> {
    w: Matrix<S>,
    b: Vec<S>,
    w_off: usize,
    b_off: usize,
}

/// Parameter-only quantities reused by every trace evaluation.
#[derive(Clone, Debug)]
enum TraceCache<S> {
    Linear,
    /// `c_k = Σ_i W_1[k,i] W_2[i,k]`, plus transposed blocks for contiguous access.
    OneHidden { c: Vec<S>, w1z_t: Matrix<S>, w2_t: Matrix<S> },
    /// `M = W_1[:, :d] W_3` (stored transposed) and `P[a,b] = W_2[a,b] M[b,a]`.
    TwoHidden { m_t: Matrix<S>, p: Matrix<S> },
}

/// Deliberate corruption of one derivative, used to prove the gradient checks bite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Offsets every component of `∂_z tr(∂f/∂z)` by `1e-3`.
    StateTraceGradient,
}

/// Scratch buffers for one evaluation. Reuse across calls to avoid allocation.
#[derive(Clone, Debug)]
pub struct Workspace<S> {
    input: Vec<S>,
    acts: Vec<Vec<S>>,
    d1: Vec<Vec<S>>,
    d2: Vec<Vec<S>>,
    g: Vec<Vec<S>>,
    direct: Vec<Vec<S>>,
}

impl<S: Scalar> Workspace<S> {
    pub fn new(cfg: &DynamicsConfig) -> Self {
        let sized = || cfg.hidden_widths.iter().map(|&w| vec![S::zero(); w]).collect::<Vec<_>>();
        Workspace {
            input: vec![S::zero(); cfg.input_dim()],
            acts: sized(),
            d1: sized(),
            d2: sized(),
            g: sized(),
            direct: sized(),
        }
    }
}

/// The dynamics network with its parameters.
#[derive(Clone, Debug)]
pub struct Mlp<S> {
    config: DynamicsConfig,
    layers: Vec<Layer<S>>,
    cache: TraceCache<S>,
    fault: Option<Fault>,
}

impl<S: Scalar> Mlp<S> {
    /// Builds the network from a flat parameter vector.
    pub fn from_params(config: DynamicsConfig, params: &[S]) -> Result<Self> {
        config.validate()?;
        check_dim("parameter vector", config.n_params(), params.len())?;
        let mut layers = Vec::new();
        let mut off = 0;
        for (rows, cols) in config.layer_shapes() {
            let w_off = off;
            let w = Matrix::from_row_major(rows, cols, params[off..off + rows * cols].to_vec())?;
            off += rows * cols;
            let b_off = off;
            let b = params[off..off + rows].to_vec();
            off += rows;
            layers.push(Layer { w, b, w_off, b_off });
        }
        let cache = build_cache(&config, &layers);
        Ok(Mlp { config, layers, cache, fault: None })
    }

    /// Default initialization: output layer zero (identity flow), earlier
    /// layers uniform in `±1/√fan_in`.
    pub fn init(config: DynamicsConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let shapes = config.layer_shapes();
        let last = shapes.len() - 1;
        let mut params = Vec::with_capacity(config.n_params());
        for (k, &(rows, cols)) in shapes.iter().enumerate() {
            let scale = 1.0 / (cols as f64).sqrt();
            for _ in 0..rows * cols {
                params.push(if k == last { S::zero() } else { S::lit(rng.uniform(-scale, scale)) });
            }
            params.extend(std::iter::repeat_n(S::zero(), rows));
        }
        Self::from_params(config, &params)
    }

    /// Every weight and bias uniform in `±scale/√fan_in`, output layer included.
    pub fn random(config: DynamicsConfig, rng: &mut RngStream, scale: f64) -> Result<Self> {
        config.validate()?;
        let mut params = Vec::with_capacity(config.n_params());
        for (rows, cols) in config.layer_shapes() {
            let s = scale / (cols as f64).sqrt();
            for _ in 0..rows * cols + rows {
                params.push(S::lit(rng.uniform(-s, s)));
            }
        }
        Self::from_params(config, &params)
    }

    pub fn with_fault(mut self, fault: Option<Fault>) -> Self {
        self.fault = fault;
        self
    }

    pub fn config(&self) -> &DynamicsConfig {
        &self.config
    }

    pub fn state_dim(&self) -> usize {
        self.config.state_dim
    }

    pub fn n_params(&self) -> usize {
        self.config.n_params()
    }

    pub fn params(&self) -> ParamVector<S> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            out.extend_from_slice(layer.w.data());
            out.extend_from_slice(&layer.b);
        }
        Vector::from_vec(out)
    }

    pub fn workspace(&self) -> Workspace<S> {
        Workspace::new(&self.config)
    }

    // ---- public operations (allocating, dimension-checked) ----

    pub fn forward(&self, z: &[S], t: S) -> Result<Vector<S>> {
        self.check_state(z)?;
        let mut ws = self.workspace();
        let mut out = Vector::zeros(self.state_dim());
        self.hidden_pass(&mut ws, z, t);
        self.output_pass(&ws, &mut out);
        Ok(out)
    }

    /// `aᵀ ∂f/∂z`
    pub fn vjp_state(&self, z: &[S], t: S, a: &[S]) -> Result<Vector<S>> {
        self.check_state(z)?;
        check_dim("cotangent", self.state_dim(), a.len())?;
        let mut ws = self.workspace();
        let mut out = Vector::zeros(self.state_dim());
        self.hidden_pass(&mut ws, z, t);
        self.backward(&mut ws, a, S::zero(), Some(&mut out), None);
        Ok(out)
    }

    /// `aᵀ ∂f/∂θ` in the flat layout.
    pub fn vjp_params(&self, z: &[S], t: S, a: &[S]) -> Result<ParamVector<S>> {
        self.check_state(z)?;
        check_dim("cotangent", self.state_dim(), a.len())?;
        let mut ws = self.workspace();
        let mut out = Vector::zeros(self.n_params());
        self.hidden_pass(&mut ws, z, t);
        self.backward(&mut ws, a, S::zero(), None, Some((&mut out, S::one())));
        Ok(out)
    }

    /// Exact `tr(∂f/∂z)`.
    pub fn jacobian_trace(&self, z: &[S], t: S) -> Result<S> {
        self.check_state(z)?;
        let mut ws = self.workspace();
        self.hidden_pass(&mut ws, z, t);
        Ok(self.trace_from(&ws))
    }

    /// Exact `∂_z tr(∂f/∂z)`.
    pub fn grad_state_jacobian_trace(&self, z: &[S], t: S) -> Result<Vector<S>> {
        self.check_state(z)?;
        let zero = vec![S::zero(); self.state_dim()];
        let mut ws = self.workspace();
        let mut out = Vector::zeros(self.state_dim());
        self.hidden_pass(&mut ws, z, t);
        self.backward(&mut ws, &zero, S::one(), Some(&mut out), None);
        Ok(out)
    }

    /// Exact `∂_θ tr(∂f/∂z)` in the flat layout.
    pub fn grad_params_jacobian_trace(&self, z: &[S], t: S) -> Result<ParamVector<S>> {
        self.check_state(z)?;
        let zero = vec![S::zero(); self.state_dim()];
        let mut ws = self.workspace();
        let mut out = Vector::zeros(self.n_params());
        self.hidden_pass(&mut ws, z, t);
        self.backward(&mut ws, &zero, S::one(), None, Some((&mut out, S::one())));
        Ok(out)
    }

    /// Hutchinson estimate `(1/n) Σ εᵀ(∂f/∂z)ε` with Rademacher probes.
    pub fn hutchinson_trace(&self, z: &[S], t: S, rng: &mut RngStream, n_probes: usize) -> Result<S> {
        self.check_state(z)?;
        if n_probes == 0 {
            return Err(Error::Config("hutchinson_trace needs at least one probe".into()));
        }
        let d = self.state_dim();
        let mut ws = self.workspace();
        let mut vjp = vec![S::zero(); d];
        self.hidden_pass(&mut ws, z, t);
        let mut acc = S::zero();
        for _ in 0..n_probes {
            let eps: Vector<S> = rng.rademacher(d);
            self.backward(&mut ws, &eps, S::zero(), Some(&mut vjp), None);
            acc += dot(&vjp, &eps);
        }
        Ok(acc / S::lit(n_probes as f64))
    }

    /// Dense `∂f/∂z` assembled row by row from `d` unit-vector VJPs.
    pub fn jacobian(&self, z: &[S], t: S) -> Result<Matrix<S>> {
        let d = self.state_dim();
        let mut jac = Matrix::zeros(d, d);
        for i in 0..d {
            let row = self.vjp_state(z, t, &Vector::<S>::basis(d, i))?;
            jac.data_mut()[i * d..(i + 1) * d].copy_from_slice(&row);
        }
        Ok(jac)
    }

    // ---- fused evaluations used inside the ODE right-hand sides ----

    /// Writes `f(z,t)` and returns `tr(∂f/∂z)`.
    pub fn eval_field_trace(&self, ws: &mut Workspace<S>, z: &[S], t: S, f: &mut [S]) -> S {
        self.hidden_pass(ws, z, t);
        self.output_pass(ws, f);
        self.trace_from(ws)
    }

    /// Writes `f`, `-(αᵀ ∂f/∂z + ∂_z tr)` into `alpha_dot`, and returns the trace.
    pub fn eval_score_dynamics(
        &self,
        ws: &mut Workspace<S>,
        z: &[S],
        t: S,
        alpha: &[S],
        f: &mut [S],
        alpha_dot: &mut [S],
    ) -> S {
        self.hidden_pass(ws, z, t);
        self.output_pass(ws, f);
        let tr = self.trace_from(ws);
        self.backward(ws, alpha, S::one(), Some(alpha_dot), None);
        for v in alpha_dot.iter_mut() {
            *v = -*v;
        }
        tr
    }

    /// Adjoint right-hand side. Writes `f`, `a_dot = -(aᵀ∂f/∂z + a_l ∂_z tr)` and
    /// `p_dot = -(aᵀ∂f/∂θ + a_l ∂_θ tr)`; `p_dot` is overwritten.
    #[allow(clippy::too_many_arguments)]
    pub fn eval_adjoint(
        &self,
        ws: &mut Workspace<S>,
        z: &[S],
        t: S,
        a: &[S],
        a_l: S,
        f: &mut [S],
        a_dot: &mut [S],
        p_dot: &mut [S],
    ) {
        self.hidden_pass(ws, z, t);
        self.output_pass(ws, f);
        p_dot.fill(S::zero());
        self.backward(ws, a, a_l, Some(a_dot), Some((p_dot, -S::one())));
        for v in a_dot.iter_mut() {
            *v = -*v;
        }
    }

    // ---- internals ----

    fn check_state(&self, z: &[S]) -> Result<()> {
        check_dim("state", self.state_dim(), z.len())
    }

    fn hidden_pass(&self, ws: &mut Workspace<S>, z: &[S], t: S) {
        let d = self.state_dim();
        ws.input[..d].copy_from_slice(z);
        if self.config.time_mode == TimeMode::Concat {
            ws.input[d] = t;
        }
        let two = S::lit(2.0);
        for k in 0..self.config.depth() {
            let layer = &self.layers[k];
            let (prev, rest) = ws.acts.split_at_mut(k);
            let input: &[S] = if k == 0 { &ws.input } else { &prev[k - 1] };
            let act = &mut rest[0];
            for (r, a) in act.iter_mut().enumerate() {
                let h = dot(layer.w.row(r), input) + layer.b[r];
                let u = h.tanh();
                let s1 = S::one() - u * u;
                *a = u;
                ws.d1[k][r] = s1;
                ws.d2[k][r] = -two * u * s1;
            }
        }
    }

    fn output_pass(&self, ws: &Workspace<S>, f: &mut [S]) {
        let depth = self.config.depth();
        let layer = &self.layers[depth];
        let input: &[S] = if depth == 0 { &ws.input } else { &ws.acts[depth - 1] };
        for (r, fr) in f.iter_mut().enumerate() {
            *fr = dot(layer.w.row(r), input) + layer.b[r];
        }
    }

    fn trace_from(&self, ws: &Workspace<S>) -> S {
        let d = self.state_dim();
        match &self.cache {
            TraceCache::Linear => (0..d).map(|i| self.layers[0].w[(i, i)]).sum(),
            TraceCache::OneHidden { c, .. } => dot(&ws.d1[0], c),
            TraceCache::TwoHidden { p, .. } => {
                let mut tr = S::zero();
                for a in 0..p.rows() {
                    tr += ws.d1[1][a] * dot(p.row(a), &ws.d1[0]);
                }
                tr
            }
        }
    }

    /// Backward sweep for cotangent `cot` and trace weight `a_l`. Writes
    /// `W_1[:, :d]ᵀ G_1` into `state_out` and adds `scale ·` the parameter
    /// cotangent into `param_out`. Requires a prior [`Self::hidden_pass`].
    fn backward(
        &self,
        ws: &mut Workspace<S>,
        cot: &[S],
        a_l: S,
        state_out: Option<&mut [S]>,
        param_out: Option<(&mut [S], S)>,
    ) {
        let d = self.state_dim();
        let depth = self.config.depth();
        let with_trace = a_l != S::zero();

        if with_trace {
            match &self.cache {
                TraceCache::Linear => {}
                TraceCache::OneHidden { c, .. } => {
                    for (dir, (&s2, &ck)) in ws.direct[0].iter_mut().zip(ws.d2[0].iter().zip(c)) {
                        *dir = s2 * ck;
                    }
                }
                TraceCache::TwoHidden { p, .. } => {
                    // direct_2 = s2'' ⊙ (P s1'), direct_1 = s1'' ⊙ (Pᵀ s2')
                    for a in 0..p.rows() {
                        ws.direct[1][a] = ws.d2[1][a] * dot(p.row(a), &ws.d1[0]);
                    }
                    ws.direct[0].fill(S::zero());
                    for a in 0..p.rows() {
                        axpy(&mut ws.direct[0], ws.d1[1][a], p.row(a));
                    }
                    for (dir, &s2) in ws.direct[0].iter_mut().zip(&ws.d2[0]) {
                        *dir *= s2;
                    }
                }
            }
        }

        // G_k for hidden layers, top-down.
        for k in (0..depth).rev() {
            let above = &self.layers[k + 1];
            let (lo, hi) = ws.g.split_at_mut(k + 1);
            let g = &mut lo[k];
            let g_above: &[S] = if k + 1 == depth { cot } else { &hi[0] };
            g.fill(S::zero());
            for (r, &ga) in g_above.iter().enumerate() {
                axpy(g, ga, above.w.row(r));
            }
            for (i, gi) in g.iter_mut().enumerate() {
                *gi *= ws.d1[k][i];
                if with_trace {
                    *gi += a_l * ws.direct[k][i];
                }
            }
        }

        if let Some(out) = state_out {
            let first = &self.layers[0];
            let g1: &[S] = if depth == 0 { cot } else { &ws.g[0] };
            out.fill(S::zero());
            for (r, &gr) in g1.iter().enumerate() {
                axpy(out, gr, &first.w.row(r)[..d]);
            }
            if with_trace && self.fault == Some(Fault::StateTraceGradient) {
                for v in out.iter_mut() {
                    *v += a_l * S::lit(1e-3);
                }
            }
        }

        if let Some((pout, scale)) = param_out {
            for k in 0..=depth {
                let layer = &self.layers[k];
                let g: &[S] = if k == depth { cot } else { &ws.g[k] };
                let input: &[S] = if k == 0 { &ws.input } else { &ws.acts[k - 1] };
                let cols = layer.w.cols();
                for (r, &gr) in g.iter().enumerate() {
                    let sg = scale * gr;
                    let row = &mut pout[layer.w_off + r * cols..layer.w_off + (r + 1) * cols];
                    axpy(row, sg, input);
                    pout[layer.b_off + r] += sg;
                }
            }
            if with_trace {
                self.explicit_trace_terms(ws, scale * a_l, pout);
            }
        }
    }

    /// Adds `scale · ∂tr/∂W_k` for the explicit appearances of each `W_k` in the
    /// Jacobian chain (activation derivatives held fixed).
    fn explicit_trace_terms(&self, ws: &Workspace<S>, scale: S, pout: &mut [S]) {
        let d = self.state_dim();
        match &self.cache {
            TraceCache::Linear => {
                let l = &self.layers[0];
                let cols = l.w.cols();
                for i in 0..d {
                    pout[l.w_off + i * cols + i] += scale;
                }
            }
            TraceCache::OneHidden { w1z_t, w2_t, .. } => {
                let (l1, l2) = (&self.layers[0], &self.layers[1]);
                let s1 = &ws.d1[0];
                let (c1, c2) = (l1.w.cols(), l2.w.cols());
                // ∂/∂W2[i,k] = s'_k W1[k,i]
                for i in 0..d {
                    let row = &mut pout[l2.w_off + i * c2..l2.w_off + (i + 1) * c2];
                    for ((p, &sk), &w) in row.iter_mut().zip(s1).zip(w1z_t.row(i)) {
                        *p += scale * sk * w;
                    }
                }
                // ∂/∂W1[k,j] = s'_k W2[j,k], j < d
                for k in 0..l1.w.rows() {
                    let row = &mut pout[l1.w_off + k * c1..l1.w_off + k * c1 + d];
                    axpy(row, scale * s1[k], w2_t.row(k));
                }
            }
            TraceCache::TwoHidden { m_t, .. } => {
                let (l1, l2, l3) = (&self.layers[0], &self.layers[1], &self.layers[2]);
                let (s1, s2) = (&ws.d1[0], &ws.d1[1]);
                let (n1, n2) = (l1.w.rows(), l2.w.rows());
                let c1 = l1.w.cols();
                // ∂/∂W2[a,b] = s2'_a s1'_b M[b,a]
                for a in 0..n2 {
                    let sa = scale * s2[a];
                    let row = &mut pout[l2.w_off + a * n1..l2.w_off + (a + 1) * n1];
                    for ((p, &sb), &mba) in row.iter_mut().zip(s1).zip(m_t.row(a)) {
                        *p += sa * sb * mba;
                    }
                }
                // ∂/∂W3[i,a] = s2'_a (W2 D1 W1z)[a,i]
                let mut row = vec![S::zero(); d];
                for a in 0..n2 {
                    row.fill(S::zero());
                    for b in 0..n1 {
                        axpy(&mut row, l2.w[(a, b)] * s1[b], &l1.w.row(b)[..d]);
                    }
                    let sa = scale * s2[a];
                    for i in 0..d {
                        pout[l3.w_off + i * n2 + a] += sa * row[i];
                    }
                }
                // ∂/∂W1[b,i] = s1'_b (W2ᵀ D2 W3ᵀ)[b,i], i < d
                let mut col = vec![S::zero(); n1];
                for i in 0..d {
                    col.fill(S::zero());
                    for a in 0..n2 {
                        axpy(&mut col, s2[a] * l3.w[(i, a)], l2.w.row(a));
                    }
                    for b in 0..n1 {
                        pout[l1.w_off + b * c1 + i] += scale * s1[b] * col[b];
                    }
                }
            }
        }
    }
}

/// `W[:, :cols]ᵀ`
fn transpose_block<S: Scalar>(w: &Matrix<S>, cols: usize) -> Matrix<S> {
    let mut t = Matrix::zeros(cols, w.rows());
    for r in 0..w.rows() {
        for c in 0..cols {
            t[(c, r)] = w[(r, c)];
        }
    }
    t
}

fn build_cache<S: Scalar>(cfg: &DynamicsConfig, layers: &[Layer<S>]) -> TraceCache<S> {
    let d = cfg.state_dim;
    match cfg.depth() {
        0 => TraceCache::Linear,
        1 => {
            let (w1, w2) = (&layers[0].w, &layers[1].w);
            let c = (0..w1.rows())
                .map(|k| (0..d).map(|i| w1[(k, i)] * w2[(i, k)]).sum())
                .collect();
            TraceCache::OneHidden { c, w1z_t: transpose_block(w1, d), w2_t: w2.transpose() }
        }
        _ => {
            let (w1, w2, w3) = (&layers[0].w, &layers[1].w, &layers[2].w);
            let (n1, n2) = (w1.rows(), w2.rows());
            let mut m = Matrix::zeros(n1, n2);
            for b in 0..n1 {
                for a in 0..n2 {
                    m[(b, a)] = (0..d).map(|i| w1[(b, i)] * w3[(i, a)]).sum();
                }
            }
            let mut p = Matrix::zeros(n2, n1);
            for a in 0..n2 {
                for b in 0..n1 {
                    p[(a, b)] = w2[(a, b)] * m[(b, a)];
                }
            }
            TraceCache::TwoHidden { m_t: m.transpose(), p }
        }
    }
}
