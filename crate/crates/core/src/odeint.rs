//! Fixed-step classical Runge–Kutta 4 on flat state vectors.
//!
//! Steps may be negative, which integrates backward in time. Callers pack
//! augmented states into one slice and unpack them in the right-hand side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::scalar::Scalar;

pub const DEFAULT_STEPS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<S> {
    t0: S,
    t1: S,
    n_steps: usize,
}

impl<S: Scalar> TimeGrid<S> {
    pub fn new(t0: S, t1: S, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(Error::InvalidGrid("endpoints must be finite".into()));
        }
        if t0 == t1 {
            return Err(Error::InvalidGrid(format!("t0 == t1 == {t0}")));
        }
        Ok(TimeGrid { t0, t1, n_steps })
    }

    pub fn t0(&self) -> S {
        self.t0
    }

    pub fn t1(&self) -> S {
        self.t1
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step(&self) -> S {
        (self.t1 - self.t0) / S::lit(self.n_steps as f64)
    }

    /// Same grid traversed from `t1` back to `t0`.
    pub fn reversed(&self) -> Self {
        TimeGrid { t0: self.t1, t1: self.t0, n_steps: self.n_steps }
    }

    /// `t0 + i·h`, exact at both endpoints.
    pub fn time_at(&self, i: usize) -> S {
        if i == self.n_steps {
            return self.t1;
        }
        let frac = S::lit(i as f64) / S::lit(self.n_steps as f64);
        self.t0 + (self.t1 - self.t0) * frac
    }
}

/// Stage buffers for RK4 on an `n`-dimensional state.
#[derive(Clone, Debug)]
pub struct Rk4<S> {
    k1: Vec<S>,
    k2: Vec<S>,
    k3: Vec<S>,
    k4: Vec<S>,
    tmp: Vec<S>,
}

impl<S: Scalar> Rk4<S> {
    pub fn new(n: usize) -> Self {
        let z = || vec![S::zero(); n];
        Rk4 { k1: z(), k2: z(), k3: z(), k4: z(), tmp: z() }
    }

    /// One classical RK4 update of `s` from `t` to `t + h`, in place.
    pub fn step<F>(&mut self, deriv: &mut F, s: &mut [S], t: S, h: S) -> Result<()>
    where
        F: FnMut(S, &[S], &mut [S]),
    {
        let half = h * S::lit(0.5);
        let th = t + half;

        deriv(t, s, &mut self.k1);
        combine(&mut self.tmp, s, half, &self.k1);
        deriv(th, &self.tmp, &mut self.k2);
        combine(&mut self.tmp, s, half, &self.k2);
        deriv(th, &self.tmp, &mut self.k3);
        combine(&mut self.tmp, s, h, &self.k3);
        deriv(t + h, &self.tmp, &mut self.k4);

        // Non-finite stage values propagate into the update, so one check suffices.
        let sixth = h / S::lit(6.0);
        let two = S::lit(2.0);
        let mut bad = None;
        for i in 0..s.len() {
            s[i] += sixth * (self.k1[i] + two * (self.k2[i] + self.k3[i]) + self.k4[i]);
            if bad.is_none() && !s[i].is_finite() {
                bad = Some(i);
            }
        }
        match bad {
            None => Ok(()),
            Some(index) => Err(Error::Integration { t: (t + h).to_f64_lossy(), index }),
        }
    }

    /// Integrates `s` over `grid` in place.
    pub fn integrate<F>(&mut self, deriv: &mut F, s: &mut [S], grid: &TimeGrid<S>) -> Result<()>
    where
        F: FnMut(S, &[S], &mut [S]),
    {
        let h = grid.step();
        for i in 0..grid.n_steps() {
            self.step(deriv, s, grid.time_at(i), h)?;
        }
        Ok(())
    }
}

#[inline]
fn combine<S: Scalar>(out: &mut [S], s: &[S], c: S, k: &[S]) {
    for ((o, &si), &ki) in out.iter_mut().zip(s).zip(k) {
        *o = si + c * ki;
    }
}

pub fn rk4_step<S, F>(mut deriv: F, s: &[S], t: S, h: S) -> Result<Vector<S>>
where
    S: Scalar,
    F: FnMut(S, &[S], &mut [S]),
{
    let mut out = s.to_vec();
    Rk4::new(s.len()).step(&mut deriv, &mut out, t, h)?;
    Ok(Vector::from_vec(out))
}

pub fn integrate<S, F>(mut deriv: F, s0: &[S], grid: &TimeGrid<S>) -> Result<Vector<S>>
where
    S: Scalar,
    F: FnMut(S, &[S], &mut [S]),
{
    let mut out = s0.to_vec();
    Rk4::new(s0.len()).integrate(&mut deriv, &mut out, grid)?;
    Ok(Vector::from_vec(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_field(_: f64, s: &[f64], ds: &mut [f64]) {
        ds[0] = s[0];
    }

    #[test]
    fn zero_field_is_identity() {
        let s = [1.5, -2.0];
        let out = rk4_step(|_, _, ds: &mut [f64]| ds.fill(0.0), &s, 0.0, 0.1).unwrap();
        assert_eq!(out.as_slice(), &s);
    }

    #[test]
    fn exact_on_cubic_quadrature() {
        let out = rk4_step(|t, _, ds: &mut [f64]| ds[0] = t, &[0.0], 0.0, 1.0).unwrap();
        assert_eq!(out[0], 0.5);
        let out = rk4_step(|t, _, ds: &mut [f64]| ds[0] = 4.0 * t * t * t, &[0.0], 0.0, 1.0).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_exponential_step() {
        let out = rk4_step(exp_field, &[1.0], 0.0, 0.1).unwrap();
        assert!((out[0] - 0.1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn exponential_over_unit_interval() {
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let out = integrate(exp_field, &[1.0], &grid).unwrap();
        let e = std::f64::consts::E;
        // classical RK4 at h = 0.02 carries a global error of 1.31e-9 here
        let rel = ((out[0] - e) / e).abs();
        assert!(rel < 1.4e-9 && rel > 1.2e-9, "{rel}");
    }

    #[test]
    fn forward_then_reverse_recovers_start() {
        let a = [[0.3, -1.0], [0.8, -0.2]];
        let field = |_: f64, s: &[f64], ds: &mut [f64]| {
            ds[0] = a[0][0] * s[0] + a[0][1] * s[1];
            ds[1] = a[1][0] * s[0] + a[1][1] * s[1];
        };
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let s0 = [0.7, -1.1];
        let x = integrate(field, &s0, &grid).unwrap();
        let back = integrate(field, &x, &grid.reversed()).unwrap();
        for i in 0..2 {
            assert!(((back[i] - s0[i]) / s0[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let e = std::f64::consts::E;
        let err = |n| {
            let g = TimeGrid::new(0.0, 1.0, n).unwrap();
            (integrate(exp_field, &[1.0], &g).unwrap()[0] - e).abs()
        };
        for n in [5, 10, 20] {
            let ratio = err(n) / err(2 * n);
            assert!((12.0..=20.0).contains(&ratio), "n={n} ratio={ratio}");
        }
    }

    #[test]
    fn round_trip_error_shrinks_at_fourth_order() {
        let field = |t: f64, s: &[f64], ds: &mut [f64]| ds[0] = (s[0] + t).sin();
        let gap = |n| {
            let g = TimeGrid::new(0.0, 2.0, n).unwrap();
            let x = integrate(field, &[0.4], &g).unwrap();
            (integrate(field, &x, &g.reversed()).unwrap()[0] - 0.4).abs()
        };
        let ratio = gap(10) / gap(20);
        assert!(ratio > 10.0, "ratio {ratio}");
    }

    #[test]
    fn repeat_is_bit_identical() {
        let g = TimeGrid::new(0.0, 1.3, 17).unwrap();
        let field = |t: f64, s: &[f64], ds: &mut [f64]| ds[0] = (s[0] * t).cos();
        let a = integrate(field, &[0.2], &g).unwrap();
        let b = integrate(field, &[0.2], &g).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        let g = TimeGrid::new(1.0, 0.0, 4).unwrap();
        assert_eq!(g.step(), -0.25);
    }

    #[test]
    fn non_finite_derivative_reports_location() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let err = integrate(
            |t, _, ds: &mut [f64]| {
                ds[0] = 0.0;
                ds[1] = if t > 0.3 { f64::NAN } else { 1.0 };
            },
            &[0.0, 0.0],
            &g,
        )
        .unwrap_err();
        match err {
            Error::Integration { t, index } => {
                assert_eq!(index, 1);
                assert!(t > 0.3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
