//! Monotone piecewise-linear curves on `[0,1]` and adaptive Simpson quadrature.
//!
//! Acceptance curves `S(p)` of task-pricing markets, cost CDFs of high-low
//! markets and demand curves of inventory markets are all piecewise linear.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
}

/// Linear interpolation through knots `(xs[i], ys[i])`, constant outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear<S> {
    xs: Vec<S>,
    ys: Vec<S>,
}

impl<S: Scalar> PiecewiseLinear<S> {
    /// Knots must have strictly increasing abscissae and ordinates in `[0,1]`.
    pub fn new(xs: Vec<S>, ys: Vec<S>) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::Supply("curve needs matching, non-empty knot lists".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Supply("curve abscissae must be strictly increasing".into()));
        }
        if ys.iter().chain(&xs).any(|v| !v.is_finite()) {
            return Err(Error::Supply("curve knots must be finite".into()));
        }
        if ys.iter().any(|y| *y < S::zero() || *y > S::one()) {
            return Err(Error::Supply("curve values must lie in [0,1]".into()));
        }
        Ok(Self { xs, ys })
    }

    /// Builds a curve and checks its direction of monotonicity.
    pub fn monotone(xs: Vec<S>, ys: Vec<S>, dir: Monotonicity) -> Result<Self> {
        let c = Self::new(xs, ys)?;
        if !c.is(dir) {
            return Err(Error::Supply(format!("curve is not {dir:?}")));
        }
        Ok(c)
    }

    /// `S(p) = p` on `[0,1]`.
    pub fn identity() -> Self {
        Self { xs: vec![S::zero(), S::one()], ys: vec![S::zero(), S::one()] }
    }

    pub fn knots(&self) -> impl Iterator<Item = (S, S)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn is(&self, dir: Monotonicity) -> bool {
        match dir {
            Monotonicity::NonDecreasing => self.ys.windows(2).all(|w| w[1] >= w[0]),
            Monotonicity::NonIncreasing => self.ys.windows(2).all(|w| w[1] <= w[0]),
        }
    }

    pub fn eval(&self, x: S) -> S {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        // first knot strictly greater than x
        let hi = self.xs.partition_point(|k| *k <= x);
        let lo = hi - 1;
        let t = (x - self.xs[lo]) / (self.xs[hi] - self.xs[lo]);
        self.ys[lo] + t * (self.ys[hi] - self.ys[lo])
    }

    /// Generalised inverse `inf{x : eval(x) >= u}` of a non-decreasing curve.
    pub fn inverse(&self, u: S) -> S {
        let n = self.xs.len();
        if u <= self.ys[0] {
            return self.xs[0];
        }
        for i in 1..n {
            if self.ys[i] >= u {
                let (y0, y1) = (self.ys[i - 1], self.ys[i]);
                if y1 == y0 {
                    return self.xs[i - 1];
                }
                let t = (u - y0) / (y1 - y0);
                return self.xs[i - 1] + t * (self.xs[i] - self.xs[i - 1]);
            }
        }
        self.xs[n - 1]
    }
}

/// Adaptive Simpson quadrature of `f` on `[a,b]` to absolute tolerance `tol`.
pub fn integrate<S: Scalar, F: Fn(S) -> S>(f: F, a: S, b: S, tol: S) -> S {
    let two = S::lit(2.0);
    let m = (a + b) / two;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

fn simpson<S: Scalar>(a: S, b: S, fa: S, fm: S, fb: S) -> S {
    (b - a) / S::lit(6.0) * (fa + S::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<S: Scalar, F: Fn(S) -> S>(
    f: &F,
    a: S,
    b: S,
    fa: S,
    fm: S,
    fb: S,
    whole: S,
    tol: S,
    depth: u32,
) -> S {
    let two = S::lit(2.0);
    let m = (a + b) / two;
    let (lm, rm) = ((a + m) / two, (m + b) / two);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= S::lit(15.0) * tol {
        return left + right + delta / S::lit(15.0);
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / two, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / two, depth - 1)
}
