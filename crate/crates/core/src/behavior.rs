//! Acceptance-probability curves.
//!
//! A curve maps the reward `R` (pence) offered to a stage actor to the
//! probability `b(R)` that the actor performs the correct transfer. The
//! built-in family is the exponential saturation curve
//!
//! ```text
//! b(R) = 1 - (1 - p0) * exp(-k R),   k = ln((1 - p0) / 0.1) / x90
//! ```
//!
//! where `p0` is the base probability at zero reward and `x90` the reward at
//! which the probability reaches 0.9. Other curves can be plugged in through
//! the [`Behavior`] trait as long as `ln b` is concave, which
//! [`verify_log_concavity`] checks numerically.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

/// Largest admissible base probability. Must stay below 0.9 so the curve
/// actually rises to 0.9 at `x90`.
pub const P0_MAX: f64 = 0.9 - 1e-6;

/// Tolerance on the second divided difference of `ln b`. Raised to the
/// rounding-noise floor `16 ε / h²` for coarse scalar types.
pub const LOG_CONCAVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("base probability p0 = {0} outside [0, 0.9)")]
    BaseProbability(f64),
    #[error("x90 = {0} must be a positive finite reward")]
    X90(f64),
    #[error("reward {0} outside the curve's domain")]
    Reward(f64),
    #[error("grid must be strictly increasing, non-negative, with at least 3 points")]
    Grid,
}

/// A stage actor's response to a reward.
///
/// Implementations must be strictly increasing with a positive derivative
/// for every `reward >= 0`.
pub trait Behavior<T: Scalar> {
    /// `b(R)`; probability in `[0, 1)`.
    fn eval(&self, reward: T) -> Result<T, CurveError>;

    /// `b'(R)`.
    fn derivative(&self, reward: T) -> Result<T, CurveError>;

    /// `b(R) / b'(R)`, the quantity that is equal across layers at the
    /// throughput optimum. Defined for `R > 0`.
    fn inverse_ratio(&self, reward: T) -> Result<T, CurveError> {
        if !(reward > T::zero()) {
            return Err(CurveError::Reward(reward.as_f64()));
        }
        Ok(self.eval(reward)? / self.derivative(reward)?)
    }

    /// Same ratio but defined at `R = 0` as well; used by solvers that need
    /// the value at the boundary.
    fn ratio_at(&self, reward: T) -> Result<T, CurveError> {
        Ok(self.eval(reward)? / self.derivative(reward)?)
    }
}

/// Exponential saturation curve parameterised by `(p0, x90)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveParams", into = "CurveParams")]
pub struct BehaviorCurve<T: Scalar> {
    p0: T,
    x90: T,
    decay: T,
}

/// Serialized form of a [`BehaviorCurve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveParams {
    pub p0: f64,
    pub x90: f64,
}

impl<T: Scalar> BehaviorCurve<T> {
    pub fn new(p0: T, x90: T) -> Result<Self, CurveError> {
        if !(p0 >= T::zero() && p0 <= T::lit(P0_MAX)) {
            return Err(CurveError::BaseProbability(p0.as_f64()));
        }
        if !(x90 > T::zero() && x90.is_finite()) {
            return Err(CurveError::X90(x90.as_f64()));
        }
        let decay = ((T::one() - p0) / T::lit(0.1)).ln() / x90;
        Ok(Self { p0, x90, decay })
    }

    pub fn p0(&self) -> T {
        self.p0
    }

    pub fn x90(&self) -> T {
        self.x90
    }

    /// Decay rate `k` in 1/pence.
    pub fn decay_rate(&self) -> T {
        self.decay
    }

    fn check(reward: T) -> Result<(), CurveError> {
        if reward >= T::zero() && !reward.is_nan() {
            Ok(())
        } else {
            Err(CurveError::Reward(reward.as_f64()))
        }
    }
}

impl<T: Scalar> Behavior<T> for BehaviorCurve<T> {
    fn eval(&self, reward: T) -> Result<T, CurveError> {
        Self::check(reward)?;
        Ok(self.p0 - (T::one() - self.p0) * (-self.decay * reward).exp_m1())
    }

    fn derivative(&self, reward: T) -> Result<T, CurveError> {
        Self::check(reward)?;
        Ok((T::one() - self.p0) * self.decay * (-self.decay * reward).exp())
    }

    // b/b' = (e^{kR} - (1 - p0)) / ((1 - p0) k); avoids 0/0 once b' underflows.
    fn ratio_at(&self, reward: T) -> Result<T, CurveError> {
        Self::check(reward)?;
        let q = T::one() - self.p0;
        Ok(((self.decay * reward).exp() - q) / (q * self.decay))
    }

    fn inverse_ratio(&self, reward: T) -> Result<T, CurveError> {
        if !(reward > T::zero()) {
            return Err(CurveError::Reward(reward.as_f64()));
        }
        self.ratio_at(reward)
    }
}

impl<T: Scalar> TryFrom<CurveParams> for BehaviorCurve<T> {
    type Error = CurveError;

    fn try_from(p: CurveParams) -> Result<Self, Self::Error> {
        Self::new(T::lit(p.p0), T::lit(p.x90))
    }
}

impl<T: Scalar> From<BehaviorCurve<T>> for CurveParams {
    fn from(c: BehaviorCurve<T>) -> Self {
        CurveParams {
            p0: c.p0.as_f64(),
            x90: c.x90.as_f64(),
        }
    }
}

/// Checks that `ln b` is concave on `grid`: every second divided difference
/// of `ln b` must be `<= LOG_CONCAVITY_TOL`.
pub fn verify_log_concavity<T, B>(curve: &B, grid: &[T]) -> Result<bool, CurveError>
where
    T: Scalar,
    B: Behavior<T> + ?Sized,
{
    if grid.len() < 3 || grid[0] < T::zero() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CurveError::Grid);
    }
    let logs = grid
        .iter()
        .map(|&r| curve.eval(r).map(|b| b.ln()))
        .collect::<Result<Vec<_>, _>>()?;
    for i in 1..grid.len() - 1 {
        let (h0, h1) = (grid[i] - grid[i - 1], grid[i + 1] - grid[i]);
        let tol = T::lit(LOG_CONCAVITY_TOL).max(T::epsilon() * T::lit(16.0) / (h0 * h1));
        let d0 = (logs[i] - logs[i - 1]) / h0;
        let d1 = (logs[i + 1] - logs[i]) / h1;
        let second = (d1 - d0) * T::lit(2.0) / (h0 + h1);
        if second > tol || second.is_nan() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Evenly spaced grid `[start, end]` with the given step (end included when
/// it lands on the lattice).
pub fn uniform_grid<T: Scalar>(start: T, end: T, step: T) -> Vec<T> {
    let n = ((end - start) / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    (0..=n).map(|i| start + step * T::from_count(i)).collect()
}
