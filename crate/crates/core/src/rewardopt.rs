//! Centralised reference solver for splitting a deposit into layer rewards.
//!
//! Maximises the end-to-end throughput `Π b_i(R_i)` subject to
//! `Σ R_i <= D`, `R_i >= 0`. Because every `b_i` is strictly increasing the
//! budget is always spent in full, and at an interior optimum the ratios
//! `b_i / b_i'` agree across layers. The solver bisects on that common ratio:
//! each layer's ratio is increasing in its own reward, so a given common value
//! maps to one reward per layer (or to zero, if the layer's ratio at zero
//! already exceeds it, which is exactly the KKT corner condition).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{uniform_grid, verify_log_concavity, Behavior, CurveError};
use crate::Scalar;

/// Default tolerance on the budget residual, in pence.
pub const DEFAULT_TOL: f64 = 1e-6;

const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("{curves} curves but {rewards} rewards")]
    LengthMismatch { curves: usize, rewards: usize },
    #[error("curve for layer {0} is not log-concave on [0, D]")]
    NotLogConcave(usize),
    #[error("deposit {0} must be a finite non-negative amount")]
    Deposit(f64),
    #[error("step {0} must be positive")]
    Step(f64),
    #[error("surface sweep needs exactly 3 layers, got {0}")]
    UnsupportedDimension(usize),
    #[error("no layers given")]
    Empty,
    #[error("ratio inversion did not bracket for layer {0}")]
    Bracket(usize),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Rewards `R_1..R_L` in pence, one per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RewardVector<T: Scalar>(pub Vec<T>);

impl<T: Scalar> RewardVector<T> {
    pub fn zeros(layers: usize) -> Self {
        Self(vec![T::zero(); layers])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn total(&self) -> T {
        self.0.iter().fold(T::zero(), |a, &r| a + r)
    }

    /// Non-negative and within the deposit.
    pub fn is_feasible(&self, deposit: T, tol: T) -> bool {
        self.0.iter().all(|&r| r >= T::zero()) && self.total() <= deposit + tol
    }
}

impl<T: Scalar> std::ops::Index<usize> for RewardVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// `Π b_i(R_i)`.
pub fn throughput<T, B>(curves: &[B], rewards: &[T]) -> Result<T, SolveError>
where
    T: Scalar,
    B: Behavior<T>,
{
    if curves.len() != rewards.len() {
        return Err(SolveError::LengthMismatch {
            curves: curves.len(),
            rewards: rewards.len(),
        });
    }
    curves
        .iter()
        .zip(rewards)
        .try_fold(T::one(), |acc, (c, &r)| Ok(acc * c.eval(r)?))
}

/// Smallest `R >= 0` with `b/b'(R) >= target`; zero when the layer's ratio at
/// zero already reaches `target`.
fn invert_ratio<T, B>(curve: &B, target: T, layer: usize) -> Result<T, SolveError>
where
    T: Scalar,
    B: Behavior<T>,
{
    if curve.ratio_at(T::zero())? >= target {
        return Ok(T::zero());
    }
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut doublings = 0;
    while curve.ratio_at(hi)? < target {
        lo = hi;
        hi = hi * T::lit(2.0);
        doublings += 1;
        if doublings > 200 {
            return Err(SolveError::Bracket(layer));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if curve.ratio_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

fn rewards_at<T, B>(curves: &[B], ratio: T) -> Result<Vec<T>, SolveError>
where
    T: Scalar,
    B: Behavior<T>,
{
    curves
        .iter()
        .enumerate()
        .map(|(i, c)| invert_ratio(c, ratio, i))
        .collect()
}

fn check_log_concave<T, B>(curves: &[B], deposit: T) -> Result<(), SolveError>
where
    T: Scalar,
    B: Behavior<T>,
{
    let upper = if deposit > T::zero() { deposit } else { T::one() };
    let grid = uniform_grid(T::zero(), upper, upper / T::lit(200.0));
    for (i, c) in curves.iter().enumerate() {
        if !verify_log_concavity(c, &grid)? {
            return Err(SolveError::NotLogConcave(i));
        }
    }
    Ok(())
}

/// Throughput-optimal split of `deposit` across the layers.
///
/// `tol` bounds the budget residual `|Σ R_i - D|`.
pub fn solve_consensus<T, B>(curves: &[B], deposit: T, tol: T) -> Result<RewardVector<T>, SolveError>
where
    T: Scalar,
    B: Behavior<T>,
{
    if curves.is_empty() {
        return Err(SolveError::Empty);
    }
    if !(deposit >= T::zero() && deposit.is_finite()) {
        return Err(SolveError::Deposit(deposit.as_f64()));
    }
    check_log_concave(curves, deposit)?;
    if deposit == T::zero() {
        return Ok(RewardVector::zeros(curves.len()));
    }

    let total = |ratio: T| -> Result<(T, Vec<T>), SolveError> {
        let r = rewards_at(curves, ratio)?;
        Ok((r.iter().fold(T::zero(), |a, &x| a + x), r))
    };

    let mut lo = curves
        .iter()
        .map(|c| c.ratio_at(T::zero()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(T::infinity(), T::min);
    let mut hi = lo.abs().max(T::one()) * T::lit(2.0);
    while total(hi)?.0 < deposit {
        lo = hi;
        hi = hi * T::lit(2.0);
        if !hi.is_finite() {
            // Every layer is saturated to machine precision before the ratio
            // overflows; extra reward no longer changes the throughput, so
            // the remainder is shared equally.
            let (sum, mut r) = total(lo)?;
            let share = (deposit - sum) / T::from_count(r.len());
            r.iter_mut().for_each(|x| *x = *x + share);
            return Ok(RewardVector(r));
        }
    }

    let mut best = total(hi)?.1;
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo + hi) / T::lit(2.0);
        if !(mid > lo && mid < hi) {
            break;
        }
        let (sum, r) = total(mid)?;
        if (sum - deposit).abs() <= tol / T::lit(10.0) {
            best = r;
            break;
        }
        if sum < deposit {
            lo = mid;
        } else {
            hi = mid;
            best = r;
        }
    }
    Ok(RewardVector(best))
}

/// `b_i / b_i'` at each reward.
pub fn consensus_ratios<T, B>(curves: &[B], rewards: &[T]) -> Result<Vec<T>, SolveError>
where
    T: Scalar,
    B: Behavior<T>,
{
    if curves.len() != rewards.len() {
        return Err(SolveError::LengthMismatch {
            curves: curves.len(),
            rewards: rewards.len(),
        });
    }
    Ok(curves
        .iter()
        .zip(rewards)
        .map(|(c, &r)| c.ratio_at(r))
        .collect::<Result<Vec<_>, _>>()?)
}

/// One cell of a three-layer throughput surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell<T: Scalar> {
    pub r1: T,
    pub r2: T,
    pub r3: T,
    pub throughput: T,
}

/// Throughput over every feasible `(R_1, R_2)` with `R_3 = D - R_1 - R_2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSurface<T: Scalar> {
    pub deposit: T,
    pub step: T,
    pub cells: Vec<SurfaceCell<T>>,
    pub argmax: usize,
}

impl<T: Scalar> ThroughputSurface<T> {
    pub fn best(&self) -> &SurfaceCell<T> {
        &self.cells[self.argmax]
    }

    pub fn min_throughput(&self) -> T {
        self.cells
            .iter()
            .map(|c| c.throughput)
            .fold(T::infinity(), T::min)
    }
}

/// Enumerates the budget simplex of a three-layer chain on a `step` lattice.
pub fn sweep_surface<T, B>(curves: &[B], deposit: T, step: T) -> Result<ThroughputSurface<T>, SolveError>
where
    T: Scalar,
    B: Behavior<T>,
{
    if curves.len() != 3 {
        return Err(SolveError::UnsupportedDimension(curves.len()));
    }
    if !(step > T::zero()) {
        return Err(SolveError::Step(step.as_f64()));
    }
    if !(deposit >= T::zero() && deposit.is_finite()) {
        return Err(SolveError::Deposit(deposit.as_f64()));
    }
    let slack = step * T::lit(1e-9);
    let n = ((deposit + slack) / step).floor().to_usize().unwrap_or(0);
    let mut cells: Vec<SurfaceCell<T>> = Vec::with_capacity((n + 1) * (n + 2) / 2);
    let mut argmax = 0;
    for i in 0..=n {
        let r1 = step * T::from_count(i);
        for j in 0..=(n - i) {
            let r2 = step * T::from_count(j);
            let r3 = (deposit - r1 - r2).max(T::zero());
            let t = throughput(curves, &[r1, r2, r3])?;
            if cells.is_empty() || t > cells[argmax].throughput {
                argmax = cells.len();
            }
            cells.push(SurfaceCell {
                r1,
                r2,
                r3,
                throughput: t,
            });
        }
    }
    Ok(ThroughputSurface {
        deposit,
        step,
        cells,
        argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::BehaviorCurve;
    use crate::paper_cup_curves;

    #[test]
    fn zero_reward_throughput() {
        let t = throughput(&paper_cup_curves(), &[0.0, 0.0, 0.0]).unwrap();
        assert!((t - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn throughput_at_reported_split() {
        let t = throughput(&paper_cup_curves(), &[12.0, 6.0, 2.0]).unwrap();
        assert!((t - 0.77).abs() < 0.01);
    }

    #[test]
    fn single_layer_reduces_to_curve() {
        let c = BehaviorCurve::<f64>::new(0.2, 4.0).unwrap();
        assert_eq!(throughput(&[c], &[3.0]).unwrap(), c.eval(3.0).unwrap());
        let r = solve_consensus(&[c], 7.0, 1e-9).unwrap();
        assert!((r[0] - 7.0).abs() < 1e-8);
    }

    #[test]
    fn saturated_layers_share_the_remainder() {
        let c = BehaviorCurve::<f64>::new(0.5, 0.01).unwrap();
        let r = solve_consensus(&[c, c], 10.0, 1e-9).unwrap();
        assert!((r.total() - 10.0).abs() < 1e-9);
        assert!((r[0] - r[1]).abs() < 1e-9);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            throughput(&paper_cup_curves(), &[1.0]),
            Err(SolveError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn zero_deposit_gives_zero_rewards() {
        let r = solve_consensus(&paper_cup_curves(), 0.0, 1e-6).unwrap();
        assert_eq!(r.0, vec![0.0; 3]);
    }

    #[test]
    fn symmetric_curves_split_evenly() {
        let c = BehaviorCurve::<f64>::new(0.1, 6.0).unwrap();
        for d in [0.3, 3.0, 17.0] {
            let r = solve_consensus(&[c, c, c], d, 1e-9).unwrap();
            for x in r.as_slice() {
                assert!((x - d / 3.0).abs() < 1e-7, "{r:?}");
            }
        }
    }

    #[test]
    fn corner_layer_is_clamped() {
        // With a tiny deposit the generous base probability of the mill
        // layer makes any reward there wasteful.
        let r = solve_consensus(&paper_cup_curves(), 0.5, 1e-9).unwrap();
        assert_eq!(r[2], 0.0);
        assert!((r.total() - 0.5).abs() < 1e-8);
        assert!(r.0.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn table_one_optimum() {
        let r = solve_consensus(&paper_cup_curves(), 20.0, 1e-6).unwrap();
        for (x, want) in r.as_slice().iter().zip([12.0, 6.0, 2.0]) {
            assert!((x - want).abs() <= 1.0, "{r:?}");
        }
        assert!((r.total() - 20.0).abs() <= 1e-6);
        let ratios = consensus_ratios(&paper_cup_curves(), r.as_slice()).unwrap();
        let spread = ratios.iter().cloned().fold(f64::MIN, f64::max)
            - ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 1e-6, "{ratios:?}");
    }

    #[test]
    fn non_log_concave_curve_is_rejected() {
        struct Convex;
        impl Behavior<f64> for Convex {
            fn eval(&self, r: f64) -> Result<f64, CurveError> {
                Ok((r * r / 100.0 - 5.0).exp())
            }
            fn derivative(&self, r: f64) -> Result<f64, CurveError> {
                Ok(self.eval(r)? * r / 50.0)
            }
        }
        assert_eq!(
            solve_consensus(&[Convex, Convex], 10.0, 1e-6),
            Err(SolveError::NotLogConcave(0))
        );
    }

    #[test]
    fn sweep_rejects_other_dimensions() {
        let c = paper_cup_curves();
        assert_eq!(
            sweep_surface(&c[..2], 20.0, 1.0).unwrap_err(),
            SolveError::UnsupportedDimension(2)
        );
        assert!(sweep_surface(&c, 20.0, 0.0).is_err());
    }

    #[test]
    fn sweep_cells_are_feasible_and_bounded() {
        let s = sweep_surface(&paper_cup_curves(), 20.0, 1.0).unwrap();
        assert_eq!(s.cells.len(), 21 * 22 / 2);
        for c in &s.cells {
            assert!((c.r1 + c.r2 + c.r3 - 20.0).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&c.throughput));
            assert!(c.throughput <= s.best().throughput);
        }
    }

    #[test]
    fn works_in_f32() {
        let curves: Vec<BehaviorCurve<f32>> = vec![
            BehaviorCurve::new(0.05, 15.0).unwrap(),
            BehaviorCurve::new(0.10, 5.0).unwrap(),
            BehaviorCurve::new(0.50, 1.0).unwrap(),
        ];
        let r = solve_consensus(&curves, 20.0f32, 1e-3).unwrap();
        assert!((r[0] - 11.8).abs() < 0.2 && (r[1] - 6.1).abs() < 0.2);
    }
}
