//! Scalar abstraction shared by the model, geometry and bandit code.
//!
//! Everything numeric in this crate is written against [`Scalar`], so the same
//! oracles run in `f64` (the default, see the aliases at the crate root) or in
//! `f32` for cheap sweeps.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Half-width of the band inside which two worker payoffs count as a tie.
    fn tie_band() -> Self;

    /// Tolerance for probability vectors summing to one.
    fn prob_tol() -> Self;

    /// Lossy conversion from `f64`; constants in this crate are all representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f64 {
    #[inline]
    fn tie_band() -> Self {
        1e-12
    }

    #[inline]
    fn prob_tol() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    #[inline]
    fn tie_band() -> Self {
        1e-6
    }

    #[inline]
    fn prob_tol() -> Self {
        1e-5
    }
}

/// Exact dyadic number `k / 2^depth` in the scalar type.
///
/// Exact for `f64` as long as `depth <= 52`; for `f32` up to `depth <= 23`.
#[inline]
pub fn dyadic<S: Scalar>(k: u64, depth: u32) -> S {
    S::lit(k as f64) / S::lit((1u64 << depth) as f64)
}
