//! Unsynchronised AIMD reward allocation.
//!
//! Every layer raises its requested reward by `α` each step. When the sum of
//! requests exceeds the deposit, a budget monitor broadcasts a capacity event;
//! each layer then records its current reward, updates its long-term average
//! `R̄_i(k)` and independently backs off to `β R_i` with probability
//!
//! ```text
//! π_i = Γ b_i(R̄_i) / (R̄_i b_i'(R̄_i))
//! ```
//!
//! The averages converge to the throughput-optimal split without any layer
//! disclosing its behaviour curve: a layer's curve is private to
//! [`AimdLayer`] and only enters through [`decrease_probability`].

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{Behavior, CurveError};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AimdError {
    #[error("average reward {0} must be positive")]
    AverageReward(f64),
    #[error("Γ = {0} must be positive")]
    Gamma(f64),
    #[error("invalid AIMD configuration: {0}")]
    Config(String),
    #[error("deposit never reached after {steps} steps; final rewards {rewards:?}")]
    DepositUnreachable { steps: usize, rewards: Vec<f64> },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Tuning of the allocator. `gamma = None` selects Γ automatically with
/// [`auto_gamma`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AimdConfig<T: Scalar> {
    pub deposit: T,
    pub alpha: T,
    pub beta: T,
    pub gamma: Option<T>,
    pub initial_reward: T,
    pub max_iters: usize,
    /// Capacity events over which the averages must have settled.
    pub convergence_window: usize,
    /// Relative change of every `R̄_i` tolerated across the window.
    pub convergence_tol: T,
    /// Capacity events before convergence is first tested.
    pub min_events: usize,
    /// Lower clamp on the decrease probability.
    pub pi_min: T,
    /// Trajectory rows are kept every this many steps (plus the last step).
    pub record_every: usize,
}

impl<T: Scalar> Default for AimdConfig<T> {
    fn default() -> Self {
        Self {
            deposit: T::lit(20.0),
            alpha: T::lit(0.01),
            beta: T::lit(0.85),
            gamma: None,
            initial_reward: T::lit(0.1),
            max_iters: 1_000_000,
            convergence_window: 50,
            convergence_tol: T::lit(1e-3),
            min_events: 100_000,
            pi_min: T::lit(1e-6),
            record_every: 100,
        }
    }
}

impl<T: Scalar> AimdConfig<T> {
    pub fn validate(&self) -> Result<(), AimdError> {
        let bad = |m: &str| Err(AimdError::Config(m.to_string()));
        if !(self.deposit > T::zero() && self.deposit.is_finite()) {
            return bad("deposit must be positive");
        }
        if !(self.alpha > T::zero()) {
            return bad("alpha must be positive");
        }
        if !(self.beta > T::zero() && self.beta < T::one()) {
            return bad("beta must lie in (0, 1)");
        }
        if let Some(g) = self.gamma {
            if !(g > T::zero()) {
                return Err(AimdError::Gamma(g.as_f64()));
            }
        }
        if !(self.initial_reward > T::zero()) {
            return bad("initial_reward must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if self.convergence_window == 0 {
            return bad("convergence_window must be positive");
        }
        if !(self.pi_min > T::zero() && self.pi_min <= T::one()) {
            return bad("pi_min must lie in (0, 1]");
        }
        if self.record_every == 0 {
            return bad("record_every must be positive");
        }
        Ok(())
    }
}

/// `Γ b(R̄) / (R̄ b'(R̄))` without clamping. Equals `Γ / (R̄ g'(R̄))` for
/// `g = ln b`.
pub fn unclamped_decrease_probability<T, B>(curve: &B, average: T, gamma: T) -> Result<T, AimdError>
where
    T: Scalar,
    B: Behavior<T> + ?Sized,
{
    if !(average > T::zero()) {
        return Err(AimdError::AverageReward(average.as_f64()));
    }
    if !(gamma > T::zero()) {
        return Err(AimdError::Gamma(gamma.as_f64()));
    }
    Ok(gamma * curve.ratio_at(average)? / average)
}

/// Decrease probability clamped to `[pi_min, 1]`.
pub fn decrease_probability<T, B>(curve: &B, average: T, gamma: T, pi_min: T) -> Result<T, AimdError>
where
    T: Scalar,
    B: Behavior<T> + ?Sized,
{
    let p = unclamped_decrease_probability(curve, average, gamma)?;
    Ok(p.max(pi_min).min(T::one()))
}

/// Γ from the declared curves: half of the largest, over layers, of the
/// smallest `R b'(R) / b(R)` on `[α, D]`.
///
/// The layer that needs the most reward then never clamps at 1 anywhere in
/// the operating range, while layers that saturate early only clamp well
/// above their share, where the clamp acts as an extra restoring force.
pub fn auto_gamma<T, B>(curves: &[B], alpha: T, deposit: T) -> Result<T, AimdError>
where
    T: Scalar,
    B: Behavior<T>,
{
    const POINTS: usize = 2000;
    if curves.is_empty() {
        return Err(AimdError::Config("no layers".into()));
    }
    let hi = deposit.max(alpha);
    let mut best = T::zero();
    for c in curves {
        let mut lowest = T::infinity();
        for i in 0..=POINTS {
            let r = alpha + (hi - alpha) * T::from_count(i) / T::from_count(POINTS);
            lowest = lowest.min(r / c.ratio_at(r)?);
        }
        best = best.max(lowest);
    }
    let g = best * T::lit(0.5);
    if !(g > T::zero()) {
        return Err(AimdError::Gamma(g.as_f64()));
    }
    Ok(g)
}

/// State of one layer's allocator. The behaviour curve never leaves this
/// struct.
#[derive(Debug, Clone)]
pub struct AimdLayer<T: Scalar, B> {
    reward: T,
    events: usize,
    event_sum: T,
    history: Vec<T>,
    curve: B,
    gamma: T,
    pi_min: T,
    rng: ChaCha8Rng,
}

impl<T: Scalar, B: Behavior<T>> AimdLayer<T, B> {
    pub fn new(curve: B, initial_reward: T, gamma: T, pi_min: T, rng: ChaCha8Rng) -> Self {
        Self {
            reward: initial_reward,
            events: 0,
            event_sum: T::zero(),
            history: Vec::new(),
            curve,
            gamma,
            pi_min,
            rng,
        }
    }

    /// Current request `R_i(l)`.
    pub fn reward(&self) -> T {
        self.reward
    }

    /// Capacity events seen so far, `k`.
    pub fn events(&self) -> usize {
        self.events
    }

    /// Long-term average `R̄_i(k)`; `None` before the first event.
    pub fn average(&self) -> Option<T> {
        (self.events > 0).then(|| self.event_sum / T::from_count(self.events))
    }

    /// Rewards recorded at each capacity event.
    pub fn history(&self) -> &[T] {
        &self.history
    }

    fn increase(&mut self, alpha: T) {
        self.reward = self.reward + alpha;
    }

    /// Handles a broadcast capacity event; returns whether this layer backed
    /// off.
    fn on_capacity_event(&mut self, alpha: T, beta: T) -> Result<bool, AimdError> {
        self.events += 1;
        self.event_sum = self.event_sum + self.reward;
        self.history.push(self.reward);
        let avg = self.event_sum / T::from_count(self.events);
        let p = decrease_probability(&self.curve, avg, self.gamma, self.pi_min)?;
        let draw = T::lit(self.rng.random::<f64>());
        if draw < p {
            self.reward = self.reward * beta;
            Ok(true)
        } else {
            self.reward = self.reward + alpha;
            Ok(false)
        }
    }

    /// `b'(R̄)/b(R̄)` at this layer's current average; the consensus
    /// diagnostic. Reveals a single number, never the curve.
    pub fn marginal_ratio(&self) -> Result<Option<T>, AimdError> {
        match self.average() {
            Some(avg) => Ok(Some(T::one() / self.curve.ratio_at(avg)?)),
            None => Ok(None),
        }
    }
}

/// Central agent that only sees the requested rewards and the deposit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetMonitor<T: Scalar> {
    pub deposit: T,
}

impl<T: Scalar> BudgetMonitor<T> {
    pub fn is_capacity_event<I: IntoIterator<Item = T>>(&self, rewards: I) -> bool {
        rewards.into_iter().fold(T::zero(), |a, r| a + r) > self.deposit
    }
}

/// What happened in one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub capacity_event: bool,
    /// Layers that backed off (only non-zero on capacity events).
    pub decreased: usize,
}

/// One synchronous AIMD step over all layers.
pub fn step<T, B>(
    layers: &mut [AimdLayer<T, B>],
    monitor: &BudgetMonitor<T>,
    alpha: T,
    beta: T,
) -> Result<StepOutcome, AimdError>
where
    T: Scalar,
    B: Behavior<T>,
{
    if !monitor.is_capacity_event(layers.iter().map(|l| l.reward())) {
        layers.iter_mut().for_each(|l| l.increase(alpha));
        return Ok(StepOutcome {
            capacity_event: false,
            decreased: 0,
        });
    }
    let mut decreased = 0;
    for layer in layers.iter_mut() {
        if layer.on_capacity_event(alpha, beta)? {
            decreased += 1;
        }
    }
    Ok(StepOutcome {
        capacity_event: true,
        decreased,
    })
}

/// Builds the layers of a run: one ChaCha stream per layer, all derived from
/// `seed`.
pub fn init_layers<T, B>(curves: &[B], config: &AimdConfig<T>, gamma: T, seed: u64) -> Vec<AimdLayer<T, B>>
where
    T: Scalar,
    B: Behavior<T> + Clone,
{
    curves
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            AimdLayer::new(c.clone(), config.initial_reward, gamma, config.pi_min, rng)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow<T: Scalar> {
    pub step: usize,
    pub rewards: Vec<T>,
    /// Capacity events so far.
    pub events: usize,
    /// `R̄_i(k)`; zero before the first capacity event.
    pub averages: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusRow<T: Scalar> {
    pub event: usize,
    pub step: usize,
    /// `b_i'(R̄_i) / b_i(R̄_i)` per layer.
    pub ratios: Vec<T>,
}

/// Full record of an allocator run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AimdRun<T: Scalar> {
    pub gamma: T,
    pub steps: usize,
    pub events: usize,
    pub converged: bool,
    pub final_rewards: Vec<T>,
    pub final_averages: Vec<T>,
    pub trajectory: Vec<TrajectoryRow<T>>,
    pub consensus: Vec<ConsensusRow<T>>,
}

impl<T: Scalar> AimdRun<T> {
    /// Mean of `Σ R_i(l)` over the recorded trajectory rows after the first
    /// capacity event.
    pub fn mean_total_reward(&self) -> Option<T> {
        let rows: Vec<_> = self.trajectory.iter().filter(|r| r.events > 0).collect();
        if rows.is_empty() {
            return None;
        }
        let sum = rows
            .iter()
            .map(|r| r.rewards.iter().fold(T::zero(), |a, &x| a + x))
            .fold(T::zero(), |a, x| a + x);
        Some(sum / T::from_count(rows.len()))
    }
}

/// Relative spread `(max - min) / mean` of a set of ratios.
pub fn relative_spread<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    let min = values.iter().copied().fold(T::infinity(), T::min);
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / T::from_count(values.len());
    (max - min) / mean
}

/// `b_i'(R̄_i) / b_i(R̄_i)` for each layer.
pub fn consensus_diagnostic<T, B>(curves: &[B], averages: &[T]) -> Result<Vec<T>, AimdError>
where
    T: Scalar,
    B: Behavior<T>,
{
    curves
        .iter()
        .zip(averages)
        .map(|(c, &r)| {
            if !(r > T::zero()) {
                return Err(AimdError::AverageReward(r.as_f64()));
            }
            Ok(T::one() / c.ratio_at(r)?)
        })
        .collect()
}

fn settled<T: Scalar>(window: &VecDeque<Vec<T>>, tol: T) -> bool {
    let (Some(first), Some(last)) = (window.front(), window.back()) else {
        return false;
    };
    first
        .iter()
        .zip(last)
        .all(|(&a, &b)| a > T::zero() && ((b - a) / a).abs() < tol)
}

/// Runs the allocator until the averages settle or `max_iters` is reached.
pub fn run<T, B>(curves: &[B], config: &AimdConfig<T>, seed: u64) -> Result<AimdRun<T>, AimdError>
where
    T: Scalar,
    B: Behavior<T> + Clone,
{
    config.validate()?;
    if curves.is_empty() {
        return Err(AimdError::Config("no layers".into()));
    }
    let gamma = match config.gamma {
        Some(g) => g,
        None => auto_gamma(curves, config.alpha, config.deposit)?,
    };
    let mut layers = init_layers(curves, config, gamma, seed);
    let monitor = BudgetMonitor {
        deposit: config.deposit,
    };

    let snapshot = |step: usize, layers: &[AimdLayer<T, B>]| TrajectoryRow {
        step,
        rewards: layers.iter().map(|l| l.reward()).collect(),
        events: layers[0].events(),
        averages: layers.iter().map(|l| l.average().unwrap_or(T::zero())).collect(),
    };

    let mut trajectory = vec![snapshot(0, &layers)];
    let mut consensus = Vec::new();
    let mut window: VecDeque<Vec<T>> = VecDeque::with_capacity(config.convergence_window + 1);
    let mut converged = false;
    let mut steps = 0;

    for l in 1..=config.max_iters {
        let outcome = step(&mut layers, &monitor, config.alpha, config.beta)?;
        steps = l;
        if outcome.capacity_event {
            let k = layers[0].events();
            let averages: Vec<T> = layers.iter().map(|x| x.average().expect("event seen")).collect();
            let ratios = layers
                .iter()
                .map(|x| x.marginal_ratio().map(|r| r.expect("event seen")))
                .collect::<Result<Vec<_>, _>>()?;
            consensus.push(ConsensusRow { event: k, step: l, ratios });
            window.push_back(averages);
            if window.len() > config.convergence_window + 1 {
                window.pop_front();
            }
            if k >= config.min_events
                && window.len() == config.convergence_window + 1
                && settled(&window, config.convergence_tol)
            {
                converged = true;
            }
        }
        if l % config.record_every == 0 || converged {
            trajectory.push(snapshot(l, &layers));
        }
        if converged {
            break;
        }
    }
    if trajectory.last().map(|r| r.step) != Some(steps) {
        trajectory.push(snapshot(steps, &layers));
    }

    if layers[0].events() == 0 {
        return Err(AimdError::DepositUnreachable {
            steps,
            rewards: layers.iter().map(|l| l.reward().as_f64()).collect(),
        });
    }
    Ok(AimdRun {
        gamma,
        steps,
        events: layers[0].events(),
        converged,
        final_rewards: layers.iter().map(|l| l.reward()).collect(),
        final_averages: layers.iter().map(|l| l.average().expect("events seen")).collect(),
        trajectory,
        consensus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::BehaviorCurve;
    use crate::paper_cup_curves;

    fn rng(i: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(i)
    }

    #[test]
    fn decrease_probability_examples() {
        let c = paper_cup_curves()[0];
        // 0.1 * 35.8103... / 12 from the 40-digit evaluation
        let p = decrease_probability(&c, 12.0, 0.1, 1e-6).unwrap();
        assert!((p - 0.298_419_465_105_452_4).abs() < 1e-12);
        let p2 = unclamped_decrease_probability(&c, 12.0, 0.2).unwrap();
        assert!((p2 - 2.0 * unclamped_decrease_probability(&c, 12.0, 0.1).unwrap()).abs() < 1e-15);
        let twin = paper_cup_curves()[0];
        assert_eq!(
            decrease_probability(&c, 5.0, 0.1, 1e-6),
            decrease_probability(&twin, 5.0, 0.1, 1e-6)
        );
        assert_eq!(
            decrease_probability(&c, 0.0, 0.1, 1e-6),
            Err(AimdError::AverageReward(0.0))
        );
        assert_eq!(decrease_probability(&c, 12.0, 1e9, 1e-6).unwrap(), 1.0);
        assert_eq!(decrease_probability(&c, 12.0, 1e-12, 1e-6).unwrap(), 1e-6);
    }

    #[test]
    fn identity_with_log_derivative() {
        // π = Γ / (R̄ g'(R̄)), g = ln b; g' by central differences
        let c = paper_cup_curves()[1];
        let (r, h, gamma) = (4.0, 1e-5, 0.03);
        let g = |x: f64| c.eval(x).unwrap().ln();
        let g_prime = (g(r + h) - g(r - h)) / (2.0 * h);
        let direct = unclamped_decrease_probability(&c, r, gamma).unwrap();
        assert!((direct - gamma / (r * g_prime)).abs() / direct < 1e-8);
    }

    fn layers(curves: &[BehaviorCurve<f64>], start: f64, gamma: f64) -> Vec<AimdLayer<f64, BehaviorCurve<f64>>> {
        curves
            .iter()
            .enumerate()
            .map(|(i, c)| AimdLayer::new(*c, start, gamma, 1e-6, rng(i as u64)))
            .collect()
    }

    #[test]
    fn additive_increase_below_budget() {
        let mut ls = layers(&paper_cup_curves(), 1.0, 0.01);
        let m = BudgetMonitor { deposit: 20.0 };
        let out = step(&mut ls, &m, 0.25, 0.5).unwrap();
        assert!(!out.capacity_event);
        for l in &ls {
            assert_eq!(l.reward(), 1.25);
            assert_eq!(l.events(), 0);
        }
    }

    #[test]
    fn synchronised_limit_when_pi_is_one() {
        let mut ls = layers(&paper_cup_curves(), 8.0, 1e9);
        let m = BudgetMonitor { deposit: 20.0 };
        let out = step(&mut ls, &m, 0.01, 0.5).unwrap();
        assert!(out.capacity_event);
        assert_eq!(out.decreased, 3);
        for l in &ls {
            assert_eq!(l.reward(), 4.0);
            assert_eq!(l.events(), 1);
        }
    }

    #[test]
    fn no_decrease_keeps_exceeding() {
        let mut ls = layers(&paper_cup_curves(), 8.0, 1e-30);
        for l in ls.iter_mut() {
            l.pi_min = 1e-300;
        }
        let m = BudgetMonitor { deposit: 20.0 };
        for k in 1..=5 {
            let out = step(&mut ls, &m, 0.01, 0.5).unwrap();
            assert!(out.capacity_event);
            assert_eq!(out.decreased, 0);
            assert_eq!(ls[0].events(), k);
        }
    }

    #[test]
    fn averages_match_history() {
        let cfg = AimdConfig {
            max_iters: 50_000,
            min_events: usize::MAX,
            ..AimdConfig::default()
        };
        let curves = paper_cup_curves();
        let gamma = auto_gamma(&curves, cfg.alpha, cfg.deposit).unwrap();
        let mut ls = init_layers(&curves, &cfg, gamma, 9);
        let m = BudgetMonitor { deposit: cfg.deposit };
        for _ in 0..cfg.max_iters {
            step(&mut ls, &m, cfg.alpha, cfg.beta).unwrap();
        }
        for l in &ls {
            let h = l.history();
            assert!(!h.is_empty());
            let recomputed = h.iter().sum::<f64>() / h.len() as f64;
            assert!((recomputed - l.average().unwrap()).abs() < 1e-9);
            assert!(l.reward() >= 0.0);
        }
    }

    #[test]
    fn single_layer_sawtooth() {
        let c = BehaviorCurve::new(0.2, 5.0).unwrap();
        let cfg = AimdConfig {
            deposit: 10.0,
            alpha: 0.05,
            beta: 0.8,
            gamma: Some(1e9),
            max_iters: 20_000,
            min_events: usize::MAX,
            record_every: 1,
            ..AimdConfig::default()
        };
        let run = run(&[c], &cfg, 1).unwrap();
        let after: Vec<f64> = run
            .trajectory
            .iter()
            .filter(|r| r.events > 0)
            .map(|r| r.rewards[0])
            .collect();
        for r in &after {
            assert!(*r >= 0.8 * 10.0 - 1e-9 && *r <= 10.0 + 0.05 + 1e-9, "{r}");
        }
        let mean = after.iter().sum::<f64>() / after.len() as f64;
        assert!(mean > 8.0 && mean < 10.0);
        let avg = run.final_averages[0];
        assert!(avg > 10.0 && avg <= 10.05 + 1e-9);
    }

    #[test]
    fn identical_layers_stay_identical_when_synchronised() {
        let c = BehaviorCurve::new(0.1, 4.0).unwrap();
        let cfg = AimdConfig {
            gamma: Some(1e9),
            max_iters: 10_000,
            min_events: usize::MAX,
            ..AimdConfig::default()
        };
        let run = run(&[c, c, c], &cfg, 3).unwrap();
        for row in &run.trajectory {
            assert!(row.rewards.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn budget_overshoot_lasts_one_step() {
        let cfg = AimdConfig {
            max_iters: 20_000,
            min_events: usize::MAX,
            record_every: 1,
            ..AimdConfig::default()
        };
        let run = run(&paper_cup_curves(), &cfg, 4).unwrap();
        for w in run.trajectory.windows(2) {
            if w[0].rewards.iter().sum::<f64>() > cfg.deposit {
                assert_eq!(w[1].events, w[0].events + 1, "step {}", w[1].step);
            }
        }
    }

    #[test]
    fn converged_run_is_feasible_and_near_optimal() {
        let curves = paper_cup_curves();
        let best = crate::rewardopt::solve_consensus(&curves, 20.0, 1e-9).unwrap();
        let best = crate::rewardopt::throughput(&curves, best.as_slice()).unwrap();
        for seed in [0, 1] {
            let run = run(&curves, &AimdConfig::default(), seed).unwrap();
            assert!(run.converged);
            assert!(run.mean_total_reward().unwrap() <= 20.0 + 0.01);
            let t = crate::rewardopt::throughput(&curves, &run.final_averages).unwrap();
            assert!(t >= 0.98 * best, "{t} vs {best}");
        }
    }

    #[test]
    fn deposit_unreachable_is_reported() {
        let cfg = AimdConfig {
            deposit: 1000.0,
            max_iters: 100,
            ..AimdConfig::default()
        };
        match run(&paper_cup_curves(), &cfg, 0) {
            Err(AimdError::DepositUnreachable { steps, rewards }) => {
                assert_eq!(steps, 100);
                assert_eq!(rewards.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = AimdConfig {
            beta: 1.0,
            ..AimdConfig::<f64>::default()
        };
        assert!(bad.validate().is_err());
        let bad = AimdConfig {
            gamma: Some(-1.0),
            ..AimdConfig::<f64>::default()
        };
        assert_eq!(bad.validate(), Err(AimdError::Gamma(-1.0)));
    }

    #[test]
    fn consensus_diagnostic_symmetry() {
        let c = BehaviorCurve::new(0.3, 2.0).unwrap();
        let r = consensus_diagnostic(&[c, c], &[1.5, 1.5]).unwrap();
        assert_eq!(r[0], r[1]);
        assert!(consensus_diagnostic(&[c], &[0.0]).is_err());
    }

    #[test]
    fn auto_gamma_for_paper_cups() {
        let g = auto_gamma(&paper_cup_curves(), 0.01, 20.0).unwrap();
        assert!(g > 0.01 && g < 0.02, "{g}");
    }
}
