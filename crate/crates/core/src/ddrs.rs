//! End-to-end deposit-return simulation.
//!
//! Cups are born as a Poisson stream, each with a digital wallet holding the
//! deposit active at its birth. A cup waits one stage cadence before each
//! transfer opportunity; the transfer succeeds with probability `b_i(R_i)`
//! and pays the stage actor from the wallet, otherwise the cup is wasted at
//! that stage. At the end of every control period the recycling rate among
//! cups resolved in the period drives the PI controller, and the new deposit
//! is split into rewards by the consensus solver (fast mode) or a full AIMD
//! run.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aimd::{self, AimdConfig, AimdError};
use crate::behavior::{Behavior, BehaviorCurve, CurveError};
use crate::depositctl::{ControlError, PiConfig, PiController};
use crate::rewardopt::{solve_consensus, SolveError, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdrsError {
    #[error("invalid simulation configuration: {0}")]
    Config(String),
    #[error("wallet of cup {cup} would go negative ({balance})")]
    WalletUnderflow { cup: u64, balance: f64 },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Aimd(#[from] AimdError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

/// Where a cup currently is. `layer` counts completed transfers: 0 = with the
/// consumer, L = at the paper mill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "stage")]
pub enum Outcome {
    InFlight,
    Recycled,
    /// Wasted at the given stage, 1-based.
    Wasted(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CupTwin {
    pub id: u64,
    pub birth: f64,
    pub layer: usize,
    pub deposit: f64,
    pub wallet: f64,
    pub outcome: Outcome,
    /// Time of the next transfer opportunity.
    pub due: f64,
}

/// Days between a cup's arrival at a stage and its transfer opportunity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub stage: usize,
    pub cadence: u32,
}

/// Poisson cup arrivals over `[start, start + horizon)`, sorted by birth time.
pub fn generate_cups<R: Rng + ?Sized>(
    rate: f64,
    start: f64,
    horizon: f64,
    deposit: f64,
    first_id: u64,
    rng: &mut R,
) -> Result<Vec<CupTwin>, DdrsError> {
    if !(rate >= 0.0 && rate.is_finite()) || !(horizon >= 0.0) {
        return Err(DdrsError::Config(format!("rate {rate} and horizon {horizon} must be non-negative")));
    }
    let mean = rate * horizon;
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let n = Poisson::new(mean)
        .map_err(|e| DdrsError::Config(e.to_string()))?
        .sample(rng) as usize;
    let mut births: Vec<f64> = (0..n).map(|_| start + horizon * rng.random::<f64>()).collect();
    births.sort_by(f64::total_cmp);
    Ok(births
        .into_iter()
        .enumerate()
        .map(|(i, birth)| CupTwin {
            id: first_id + i as u64,
            birth,
            layer: 0,
            deposit,
            wallet: deposit,
            outcome: Outcome::InFlight,
            due: birth,
        })
        .collect())
}

/// Result of a transfer opportunity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub advanced: bool,
    pub paid: f64,
}

/// One transfer opportunity at stage `cup.layer + 1`. `reward` is the
/// advertised reward and `active_deposit` the deposit it was split from; the
/// cup pays `reward · cup.deposit / active_deposit`.
///
/// A cup born under an older deposit may have paid earlier stages from a
/// differently proportioned split, so its payment is capped at what is left
/// in its wallet. For a cup born under the active deposit an overdraft means
/// the rewards exceed the deposit and is reported as an error.
pub fn advance_stage<R: Rng + ?Sized>(
    cup: &mut CupTwin,
    curve: &BehaviorCurve<f64>,
    reward: f64,
    active_deposit: f64,
    stages: usize,
    rng: &mut R,
) -> Result<Transition, DdrsError> {
    let p = curve.eval(reward)?;
    if rng.random::<f64>() >= p {
        cup.outcome = Outcome::Wasted(cup.layer + 1);
        return Ok(Transition {
            advanced: false,
            paid: 0.0,
        });
    }
    let paid = if active_deposit > 0.0 {
        reward * cup.deposit / active_deposit
    } else {
        0.0
    };
    let balance = cup.wallet - paid;
    if balance < -1e-9 && cup.deposit == active_deposit {
        return Err(DdrsError::WalletUnderflow { cup: cup.id, balance });
    }
    let paid = paid.min(cup.wallet);
    cup.wallet -= paid;
    cup.layer += 1;
    if cup.layer == stages {
        cup.outcome = Outcome::Recycled;
    }
    Ok(Transition { advanced: true, paid })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Fast,
    Aimd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Advisory {
    /// 1-based stage.
    pub stage: usize,
    pub direction: Direction,
}

/// Advisories for stages whose measured success rate falls outside its band.
/// Stages without a measurement (`NaN`) are skipped.
pub fn check_behavior_bounds(rates: &[f64], bounds: &[(f64, f64)]) -> Vec<Advisory> {
    rates
        .iter()
        .zip(bounds)
        .enumerate()
        .filter_map(|(i, (&r, &(lo, hi)))| {
            if r < lo {
                Some(Advisory { stage: i + 1, direction: Direction::Below })
            } else if r > hi {
                Some(Advisory { stage: i + 1, direction: Direction::Above })
            } else {
                None
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdrsConfig {
    pub curves: Vec<BehaviorCurve<f64>>,
    pub cups_per_day: f64,
    pub cadences: Vec<u32>,
    pub horizon_periods: usize,
    pub mode: Mode,
    pub pi: PiConfig<f64>,
    pub aimd: AimdConfig<f64>,
    /// Rewards for the first period; split from `pi.d0` when absent.
    pub initial_rewards: Option<Vec<f64>>,
    /// Optional per-stage success bands for advisories.
    pub behavior_bounds: Option<Vec<(f64, f64)>>,
}

impl Default for DdrsConfig {
    fn default() -> Self {
        Self {
            curves: crate::paper_cup_curves(),
            cups_per_day: 900.0,
            cadences: vec![1, 2, 5],
            horizon_periods: 36,
            mode: Mode::Fast,
            pi: PiConfig::default(),
            aimd: AimdConfig::default(),
            initial_rewards: None,
            behavior_bounds: None,
        }
    }
}

impl DdrsConfig {
    pub fn validate(&self) -> Result<(), DdrsError> {
        let bad = |m: String| Err(DdrsError::Config(m));
        if self.curves.is_empty() {
            return bad("at least one curve is required".into());
        }
        if self.cadences.len() != self.curves.len() {
            return bad(format!("{} cadences for {} curves", self.cadences.len(), self.curves.len()));
        }
        if self.cadences.contains(&0) {
            return bad("cadences must be at least one day".into());
        }
        if !(self.cups_per_day >= 0.0 && self.cups_per_day.is_finite()) {
            return bad("cups_per_day must be non-negative".into());
        }
        if self.horizon_periods == 0 {
            return bad("horizon_periods must be positive".into());
        }
        self.pi.validate()?;
        if self.mode == Mode::Aimd {
            self.aimd.validate()?;
        }
        if let Some(r) = &self.initial_rewards {
            if r.len() != self.curves.len() {
                return bad(format!("{} initial rewards for {} curves", r.len(), self.curves.len()));
            }
            if r.iter().any(|&x| !(x >= 0.0)) {
                return bad("initial rewards must be non-negative".into());
            }
            let total: f64 = r.iter().sum();
            if total > self.pi.d0 + 1e-9 {
                return bad(format!("initial rewards sum to {total} > d0 = {}", self.pi.d0));
            }
        }
        if let Some(b) = &self.behavior_bounds {
            if b.len() != self.curves.len() {
                return bad("one behaviour band per stage is required".into());
            }
            if b.iter().any(|&(lo, hi)| !(0.0 <= lo && lo <= hi && hi <= 1.0)) {
                return bad("behaviour bands must satisfy 0 <= lo <= hi <= 1".into());
            }
        }
        Ok(())
    }

    pub fn schedules(&self) -> Vec<StageSchedule> {
        self.cadences
            .iter()
            .enumerate()
            .map(|(i, &cadence)| StageSchedule { stage: i + 1, cadence })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodReport {
    pub period: usize,
    pub deposit: f64,
    pub rewards: Vec<f64>,
    pub created: usize,
    pub recycled: usize,
    /// Cups wasted at each stage during the period.
    pub wasted: Vec<usize>,
    /// `recycled / (recycled + Σ wasted)`; `None` if nothing resolved.
    pub measured_rate: Option<f64>,
    /// Success rate of each stage's transfer opportunities (`NaN` if none).
    pub stage_success: Vec<f64>,
    pub in_flight: usize,
    pub cumulative_created: usize,
    pub cumulative_recycled: usize,
    pub cumulative_wasted: Vec<usize>,
    pub advisories: Vec<Advisory>,
}

impl PeriodReport {
    pub fn resolved(&self) -> usize {
        self.recycled + self.wasted.iter().sum::<usize>()
    }

    /// Waste at each stage as a fraction of the cups resolved in the period.
    pub fn waste_fractions(&self) -> Vec<f64> {
        let n = self.resolved();
        self.wasted
            .iter()
            .map(|&w| if n == 0 { f64::NAN } else { w as f64 / n as f64 })
            .collect()
    }

    /// `created = recycled + Σ wasted + in flight`, cumulatively.
    pub fn accounting_holds(&self) -> bool {
        self.cumulative_created
            == self.cumulative_recycled + self.cumulative_wasted.iter().sum::<usize>() + self.in_flight
    }
}

/// Where the money went.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoneyAudit {
    pub paid_in: f64,
    /// Wallet balances of cups still in flight.
    pub in_flight_wallets: f64,
    /// Unspent balances of resolved cups.
    pub residue: f64,
    pub ledgers: Vec<f64>,
}

impl MoneyAudit {
    pub fn imbalance(&self) -> f64 {
        self.paid_in - self.in_flight_wallets - self.residue - self.ledgers.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DdrsRun {
    pub reports: Vec<PeriodReport>,
    pub final_deposit: f64,
    pub gain_instability: bool,
    pub money: MoneyAudit,
}

impl DdrsRun {
    /// Measured rates over the last quarter of the run.
    pub fn final_quarter(&self) -> impl Iterator<Item = &PeriodReport> {
        let n = self.reports.len();
        self.reports.iter().skip(n - n.div_ceil(4))
    }
}

/// Splits the deposit into rewards, scaled down if needed so they never sum
/// to more than the deposit (the solver stops within its tolerance, and AIMD
/// averages are taken at moments of overshoot).
fn split_deposit(config: &DdrsConfig, deposit: f64, seed: u64) -> Result<Vec<f64>, DdrsError> {
    if deposit <= 0.0 {
        return Ok(vec![0.0; config.curves.len()]);
    }
    let raw = match config.mode {
        Mode::Fast => solve_consensus(&config.curves, deposit, DEFAULT_TOL)?.0,
        Mode::Aimd => {
            let cfg = AimdConfig {
                deposit,
                ..config.aimd.clone()
            };
            aimd::run(&config.curves, &cfg, seed)?.final_averages
        }
    };
    let total: f64 = raw.iter().sum();
    let scale = if total > deposit { deposit / total } else { 1.0 };
    Ok(raw.iter().map(|r| r * scale).collect())
}

struct Pipeline {
    queues: Vec<VecDeque<CupTwin>>,
    ledgers: Vec<f64>,
    residue: f64,
    paid_in: f64,
}

/// Runs the closed-loop simulation.
pub fn run_ddrs(config: &DdrsConfig, seed: u64) -> Result<DdrsRun, DdrsError> {
    config.validate()?;
    let stages = config.curves.len();
    let period_days = config.pi.period_days as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aimd_seed = |period: usize| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(period as u64 + 1);

    let mut ctl = PiController::new(config.pi.clone())?;
    let mut deposit = ctl.deposit();
    let mut rewards = match &config.initial_rewards {
        Some(r) => r.clone(),
        None => split_deposit(config, deposit, aimd_seed(0))?,
    };

    let mut pipe = Pipeline {
        queues: vec![VecDeque::new(); stages],
        ledgers: vec![0.0; stages],
        residue: 0.0,
        paid_in: 0.0,
    };
    let mut next_id = 0u64;
    let mut cum_created = 0usize;
    let mut cum_recycled = 0usize;
    let mut cum_wasted = vec![0usize; stages];
    let mut reports = Vec::with_capacity(config.horizon_periods);

    for period in 0..config.horizon_periods {
        let start = period as f64 * period_days;
        let end = start + period_days;
        let born = generate_cups(config.cups_per_day, start, period_days, deposit, next_id, &mut rng)?;
        next_id += born.len() as u64;
        let created = born.len();
        for mut cup in born {
            pipe.paid_in += cup.deposit;
            cup.due = cup.birth + config.cadences[0] as f64;
            pipe.queues[0].push_back(cup);
        }

        let mut recycled = 0usize;
        let mut wasted = vec![0usize; stages];
        let mut attempts = vec![0usize; stages];
        let mut successes = vec![0usize; stages];
        // Dwell times are constant per stage, so every queue stays sorted by
        // due time and stages can be drained in order.
        for i in 0..stages {
            while pipe.queues[i].front().is_some_and(|c| c.due < end) {
                let mut cup = pipe.queues[i].pop_front().expect("non-empty");
                attempts[i] += 1;
                let t = advance_stage(&mut cup, &config.curves[i], rewards[i], deposit, stages, &mut rng)?;
                pipe.ledgers[i] += t.paid;
                if !t.advanced {
                    wasted[i] += 1;
                    pipe.residue += cup.wallet;
                    continue;
                }
                successes[i] += 1;
                if cup.outcome == Outcome::Recycled {
                    recycled += 1;
                    pipe.residue += cup.wallet;
                } else {
                    cup.due += config.cadences[i + 1] as f64;
                    pipe.queues[i + 1].push_back(cup);
                }
            }
        }

        cum_created += created;
        cum_recycled += recycled;
        for (c, w) in cum_wasted.iter_mut().zip(&wasted) {
            *c += w;
        }
        let resolved = recycled + wasted.iter().sum::<usize>();
        let measured_rate = (resolved > 0).then(|| recycled as f64 / resolved as f64);
        let stage_success: Vec<f64> = successes
            .iter()
            .zip(&attempts)
            .map(|(&s, &a)| if a == 0 { f64::NAN } else { s as f64 / a as f64 })
            .collect();
        let advisories = config
            .behavior_bounds
            .as_deref()
            .map(|b| check_behavior_bounds(&stage_success, b))
            .unwrap_or_default();

        reports.push(PeriodReport {
            period,
            deposit,
            rewards: rewards.clone(),
            created,
            recycled,
            wasted,
            measured_rate,
            stage_success,
            in_flight: pipe.queues.iter().map(VecDeque::len).sum(),
            cumulative_created: cum_created,
            cumulative_recycled: cum_recycled,
            cumulative_wasted: cum_wasted.clone(),
            advisories,
        });

        if let Some(rate) = measured_rate {
            let previous = deposit;
            deposit = ctl.step(rate)?.deposit;
            if deposit != previous {
                rewards = split_deposit(config, deposit, aimd_seed(period + 1))?;
            }
        }
    }

    let money = MoneyAudit {
        paid_in: pipe.paid_in,
        in_flight_wallets: pipe.queues.iter().flatten().map(|c| c.wallet).sum(),
        residue: pipe.residue,
        ledgers: pipe.ledgers,
    };
    Ok(DdrsRun {
        reports,
        final_deposit: deposit,
        gain_instability: ctl.gain_instability(),
        money,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpenLoopSummary {
    pub cups: usize,
    pub recycled: usize,
    pub wasted: Vec<usize>,
}

impl OpenLoopSummary {
    pub fn recycled_fraction(&self) -> f64 {
        self.recycled as f64 / self.cups as f64
    }
}

/// Pushes `cups` cups through the stages at fixed rewards, ignoring timing.
pub fn simulate_fixed_rewards<R: Rng + ?Sized>(
    curves: &[BehaviorCurve<f64>],
    rewards: &[f64],
    cups: usize,
    rng: &mut R,
) -> Result<OpenLoopSummary, DdrsError> {
    if curves.len() != rewards.len() {
        return Err(DdrsError::Config(format!("{} rewards for {} curves", rewards.len(), curves.len())));
    }
    let probs = curves
        .iter()
        .zip(rewards)
        .map(|(c, &r)| c.eval(r))
        .collect::<Result<Vec<_>, _>>()?;
    let mut wasted = vec![0usize; curves.len()];
    let mut recycled = 0;
    for _ in 0..cups {
        match probs.iter().position(|&p| rng.random::<f64>() >= p) {
            Some(i) => wasted[i] += 1,
            None => recycled += 1,
        }
    }
    Ok(OpenLoopSummary { cups, recycled, wasted })
}
