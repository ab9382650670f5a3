//! One-dimensional calculus of the double-well potential `W(r) = ½(1−r²)²`.

use crate::{Error, Real, Result};

/// `W`, `W'` and `√(2W)` evaluated at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Well<T> {
    pub w: T,
    pub dw: T,
    pub sqrt2w: T,
}

/// Surface tension `σ = ∫_{−1}^{1} √(2W(u)) du`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileConstants<T> {
    pub sigma: T,
}

impl<T: Real> ProfileConstants<T> {
    pub fn new() -> Self {
        Self { sigma: sigma() }
    }
}

impl<T: Real> Default for ProfileConstants<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// `σ = k(1) − k(−1) = 4/3`.
#[inline]
pub fn sigma<T: Real>() -> T {
    k_fn(T::one()) - k_fn(-T::one())
}

#[inline]
pub fn well<T: Real>(r: T) -> Well<T> {
    let one_minus = T::one() - r * r;
    Well {
        w: T::lit(0.5) * one_minus * one_minus,
        dw: T::lit(-2.0) * r * one_minus,
        // |1−r²| keeps the sign exact near the wells
        sqrt2w: one_minus.abs(),
    }
}

/// `k(r) = ∫₀^r √(2W) = r − r³/3`.
#[inline]
pub fn k_fn<T: Real>(r: T) -> T {
    r - r * r * r / T::lit(3.0)
}

/// `K(r) = ½ + k(r)/σ`, mapping `[−1,1]` monotonically onto `[0,1]`.
pub fn big_k<T: Real>(r: T) -> Result<T> {
    if !(r >= -T::one() && r <= T::one()) {
        return Err(Error::domain(format!("K is defined on [-1,1], got {r}")));
    }
    Ok(T::lit(0.5) + k_fn(r) / sigma::<T>())
}

/// Standing-wave profile `tanh(r/ε)`.
pub fn tanh_profile<T: Real>(r: T, eps: T) -> Result<T> {
    if !(eps > T::zero()) {
        return Err(Error::key("epsilon", format!("must be positive, got {eps}")));
    }
    Ok((r / eps).tanh())
}
