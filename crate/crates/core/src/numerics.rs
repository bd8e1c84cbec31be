//! Dense vectors and matrices, seeded random streams, and the central
//! finite-difference oracle used by the derivative tests.

use std::ops::{Deref, DerefMut, Index, IndexMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Dense column vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector<S>(Vec<S>);

impl<S: Scalar> Vector<S> {
    pub fn zeros(d: usize) -> Self {
        Vector(vec![S::zero(); d])
    }

    pub fn from_vec(data: Vec<S>) -> Self {
        Vector(data)
    }

    pub fn from_f64(data: &[f64]) -> Self {
        Vector(data.iter().map(|&x| S::lit(x)).collect())
    }

    /// Unit basis vector `e_i` of dimension `d`.
    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = Self::zeros(d);
        v.0[i] = S::one();
        v
    }

    pub fn into_inner(self) -> Vec<S> {
        self.0
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.0
    }

    pub fn dot(&self, other: &[S]) -> S {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> S {
        self.dot(&self.0).sqrt()
    }

    pub fn norm_sq(&self) -> S {
        self.dot(&self.0)
    }

    pub fn max_abs(&self) -> S {
        self.0.iter().fold(S::zero(), |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn scaled(&self, c: S) -> Self {
        Vector(self.0.iter().map(|&x| x * c).collect())
    }

    pub fn add(&self, other: &[S]) -> Result<Self> {
        check_dim("vector add", self.len(), other.len())?;
        Ok(Vector(self.0.iter().zip(other).map(|(&a, &b)| a + b).collect()))
    }

    pub fn sub(&self, other: &[S]) -> Result<Self> {
        check_dim("vector sub", self.len(), other.len())?;
        Ok(Vector(self.0.iter().zip(other).map(|(&a, &b)| a - b).collect()))
    }

    /// `self += c * x`
    pub fn axpy(&mut self, c: S, x: &[S]) {
        axpy(&mut self.0, c, x);
    }
}

impl<S> Deref for Vector<S> {
    type Target = [S];
    fn deref(&self) -> &[S] {
        &self.0
    }
}

impl<S> DerefMut for Vector<S> {
    fn deref_mut(&mut self) -> &mut [S] {
        &mut self.0
    }
}

impl<S> From<Vec<S>> for Vector<S> {
    fn from(v: Vec<S>) -> Self {
        Vector(v)
    }
}

impl<S> FromIterator<S> for Vector<S> {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Vector(iter.into_iter().collect())
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        check_dim("matrix data", rows * cols, data.len())?;
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn trace(&self) -> S {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix<S>) -> Result<Self> {
        check_dim("matmul inner", self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let orow = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                axpy(orow, a, other.row(k));
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[S]) -> Result<Vector<S>> {
        check_dim("matvec", self.cols, x.len())?;
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    /// `xᵀ M`
    pub fn vecmat(&self, x: &[S]) -> Result<Vector<S>> {
        check_dim("vecmat", self.rows, x.len())?;
        let mut out = Vector::zeros(self.cols);
        for (r, &xr) in x.iter().enumerate() {
            axpy(&mut out, xr, self.row(r));
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Matrix<S>) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    fn index(&self, (r, c): (usize, usize)) -> &S {
        &self.data[r * self.cols + c]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    // four independent accumulators so the loop vectorizes; order stays fixed
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [S::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    let mut tail = S::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy<S: Scalar>(y: &mut [S], c: S, x: &[S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

/// Independent random stream keyed by `(seed, stream_id)`.
///
/// Backed by ChaCha20 with the stream id selecting the ChaCha stream, so draws
/// for one id never depend on how many draws were taken from another.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Position in the underlying keystream, in 32-bit words.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    pub fn std_normal<S: Scalar>(&mut self, d: usize) -> Vector<S> {
        (0..d)
            .map(|_| S::lit(self.rng.sample::<f64, _>(StandardNormal)))
            .collect()
    }

    pub fn rademacher<S: Scalar>(&mut self, d: usize) -> Vector<S> {
        (0..d)
            .map(|_| if self.rng.random::<bool>() { S::one() } else { -S::one() })
            .collect()
    }
}

pub fn seeded_stream(seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(seed, stream_id)
}

pub fn sample_std_normal<S: Scalar>(rng: &mut RngStream, d: usize) -> Vector<S> {
    rng.std_normal(d)
}

pub fn sample_rademacher<S: Scalar>(rng: &mut RngStream, d: usize) -> Vector<S> {
    rng.rademacher(d)
}

/// Default central-difference step for coordinate value `x`: `1e-5 · max(1, |x|)`.
pub fn default_fd_step<S: Scalar>(x: S) -> S {
    S::lit(1e-5) * x.abs().max(S::one())
}

/// Central-difference gradient with the default per-coordinate step.
pub fn finite_diff_grad<S, F>(f: F, x: &[S]) -> Result<Vector<S>>
where
    S: Scalar,
    F: FnMut(&[S]) -> S,
{
    fd_impl(f, x, default_fd_step)
}

/// Central-difference gradient with a fixed absolute step `h` on every coordinate.
pub fn finite_diff_grad_with_step<S, F>(f: F, x: &[S], h: S) -> Result<Vector<S>>
where
    S: Scalar,
    F: FnMut(&[S]) -> S,
{
    fd_impl(f, x, |_| h)
}

fn fd_impl<S, F, H>(mut f: F, x: &[S], step: H) -> Result<Vector<S>>
where
    S: Scalar,
    F: FnMut(&[S]) -> S,
    H: Fn(S) -> S,
{
    let mut probe = x.to_vec();
    let mut grad = Vector::zeros(x.len());
    for i in 0..x.len() {
        let h = step(x[i]);
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::InvalidProbe { index: i });
        }
        grad[i] = (fp - fm) / (h + h);
    }
    Ok(grad)
}

/// Largest entrywise relative error `|a−b| / max(|a|,|b|)` over entries where
/// `max(|a|,|b|) > floor`; entries at or below the floor are skipped.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .filter_map(|(&x, &y)| {
            let scale = x.abs().max(y.abs());
            (scale > floor).then(|| (x - y).abs() / scale)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_repeat() {
        let mut a = seeded_stream(7, 0);
        let mut b = seeded_stream(7, 0);
        let va: Vector<f64> = a.std_normal(32);
        let vb: Vector<f64> = b.std_normal(32);
        assert_eq!(va, vb);
        for (x, y) in va.iter().zip(vb.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn stream_id_and_seed_change_sequence() {
        let base: Vector<f64> = seeded_stream(7, 0).std_normal(16);
        let other_id: Vector<f64> = seeded_stream(7, 1).std_normal(16);
        let other_seed: Vector<f64> = seeded_stream(8, 0).std_normal(16);
        assert!(base.iter().zip(other_id.iter()).all(|(a, b)| a != b));
        assert_ne!(base, other_seed);
    }

    #[test]
    fn streams_do_not_interfere() {
        let mut a = seeded_stream(3, 10);
        let mut noise = seeded_stream(3, 11);
        let first: Vector<f64> = a.std_normal(4);
        let _: Vector<f64> = noise.std_normal(100);
        let second: Vector<f64> = a.std_normal(4);

        let mut fresh = seeded_stream(3, 10);
        let joined: Vector<f64> = fresh.std_normal(8);
        assert_eq!(&joined[..4], &first[..]);
        assert_eq!(&joined[4..], &second[..]);
    }

    #[test]
    fn std_normal_moments() {
        let mut rng = seeded_stream(11, 0);
        let n = 100_000;
        let xs: Vector<f64> = rng.std_normal(n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((0.97..=1.03).contains(&var), "var {var}");
        let small: Vector<f64> = rng.std_normal(3);
        assert_eq!(small.len(), 3);
        assert!(small.is_finite());
    }

    #[test]
    fn rademacher_range_and_moments() {
        let mut rng = seeded_stream(5, 2);
        let e: Vector<f64> = rng.rademacher(8);
        assert!(e.iter().all(|&x| x == 1.0 || x == -1.0));

        let xs: Vector<f64> = rng.rademacher(100_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.02);

        let d = 4;
        let n = 10_000;
        let mut outer = Matrix::<f64>::zeros(d, d);
        for _ in 0..n {
            let eps: Vector<f64> = rng.rademacher(d);
            for i in 0..d {
                for j in 0..d {
                    outer[(i, j)] += eps[i] * eps[j] / n as f64;
                }
            }
        }
        assert!(outer.max_abs_diff(&Matrix::identity(d)) < 0.05);
    }

    #[test]
    fn fd_closed_forms() {
        let g = finite_diff_grad_with_step(|x: &[f64]| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-8);

        let g = finite_diff_grad(|_: &[f64]| 4.2, &[1.0, -2.0, 0.5]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));

        let x = [0.3, -7.0, 120.0, 1e-3];
        let g = finite_diff_grad(|x: &[f64]| x.iter().sum(), &x).unwrap();
        assert!(g.iter().all(|&v| (v - 1.0).abs() < 1e-8), "{g:?}");
    }

    #[test]
    fn fd_quadratic_is_exact() {
        // f(x) = xᵀQx/2 + cᵀx has gradient Qx + c.
        let q = [[2.0, 0.5, -1.0], [0.5, 3.0, 0.25], [-1.0, 0.25, 1.5]];
        let c = [0.1, -0.2, 0.3];
        let f = |x: &[f64]| {
            let mut s = 0.0;
            for i in 0..3 {
                s += c[i] * x[i];
                for j in 0..3 {
                    s += 0.5 * x[i] * q[i][j] * x[j];
                }
            }
            s
        };
        let x = [0.7, -1.3, 2.1];
        let g = finite_diff_grad(f, &x).unwrap();
        for i in 0..3 {
            let exact: f64 = c[i] + (0..3).map(|j| q[i][j] * x[j]).sum::<f64>();
            assert!((g[i] - exact).abs() < 1e-9, "{i}: {} vs {exact}", g[i]);
        }
    }

    #[test]
    fn fd_rejects_non_finite_probe() {
        let err = finite_diff_grad(|x: &[f64]| (x[0] - 1.0).ln(), &[1.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidProbe { index: 0 }));
    }

    #[test]
    fn matmul_associative() {
        let mut rng = seeded_stream(1, 0);
        for _ in 0..20 {
            let mk = |rng: &mut RngStream| {
                Matrix::from_row_major(4, 4, rng.std_normal::<f64>(16).into_inner()).unwrap()
            };
            let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let scale = left.data().iter().fold(1.0f64, |m, x| m.max(x.abs()));
            assert!(left.max_abs_diff(&right) / scale < 1e-12);
        }
    }

    #[test]
    fn matrix_shape_checks() {
        assert!(Matrix::<f64>::from_row_major(2, 3, vec![0.0; 5]).is_err());
        let a = Matrix::<f64>::zeros(2, 3);
        assert!(a.matvec(&[1.0, 2.0]).is_err());
        assert_eq!(a.transpose().rows(), 3);
    }
}
