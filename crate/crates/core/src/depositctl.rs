//! PI feedback on the deposit.
//!
//! Once per control period the measured recycling rate is compared with the
//! target and the deposit is moved. The output is clamped to the deposit
//! bounds and to a multiplicative rate limit (by default it can at most double
//! or halve in one adjustment). The integral is frozen while the output is
//! clamped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::Behavior;
use crate::rewardopt::{solve_consensus, throughput, SolveError, DEFAULT_TOL};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("{name} = {value} must lie in [0, 1]")]
    Rate { name: &'static str, value: f64 },
    #[error("invalid controller configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Plant(#[from] SolveError),
}

/// `target − measured`, both probabilities.
pub fn measure_error<T: Scalar>(measured: T, target: T) -> Result<T, ControlError> {
    let unit = |name, v: T| {
        if v >= T::zero() && v <= T::one() {
            Ok(())
        } else {
            Err(ControlError::Rate { name, value: v.as_f64() })
        }
    };
    unit("measured_rate", measured)?;
    unit("target_rate", target)?;
    Ok(target - measured)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PiConfig<T: Scalar> {
    pub kp: T,
    pub ki: T,
    pub target_rate: T,
    pub d0: T,
    pub d_min: T,
    pub d_max: T,
    /// New deposit ≤ `rate_limit_up` × previous deposit.
    pub rate_limit_up: T,
    /// New deposit ≥ `rate_limit_down` × previous deposit.
    pub rate_limit_down: T,
    pub period_days: u32,
}

impl<T: Scalar> Default for PiConfig<T> {
    fn default() -> Self {
        Self {
            kp: T::lit(10.0),
            ki: T::lit(20.0),
            target_rate: T::lit(0.77),
            d0: T::one(),
            d_min: T::zero(),
            d_max: T::lit(100.0),
            rate_limit_up: T::lit(2.0),
            rate_limit_down: T::lit(0.5),
            period_days: 30,
        }
    }
}

impl<T: Scalar> PiConfig<T> {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::Config(m.to_string()));
        if !(self.kp >= T::zero() && self.kp.is_finite()) || !(self.ki >= T::zero() && self.ki.is_finite()) {
            return bad("kp and ki must be non-negative and finite");
        }
        if !(self.target_rate >= T::zero() && self.target_rate <= T::one()) {
            return Err(ControlError::Rate {
                name: "target_rate",
                value: self.target_rate.as_f64(),
            });
        }
        if !(self.d_min >= T::zero() && self.d_min <= self.d_max && self.d_max.is_finite()) {
            return bad("need 0 <= d_min <= d_max < inf");
        }
        if !(self.d0 > T::zero() && self.d0 >= self.d_min && self.d0 <= self.d_max) {
            return bad("d0 must be positive and within [d_min, d_max]");
        }
        if !(self.rate_limit_up >= T::one() && self.rate_limit_up.is_finite()) {
            return bad("rate_limit_up must be >= 1");
        }
        if !(self.rate_limit_down > T::zero() && self.rate_limit_down <= T::one()) {
            return bad("rate_limit_down must lie in (0, 1]");
        }
        if self.period_days == 0 {
            return bad("period_days must be positive");
        }
        Ok(())
    }
}

/// Result of one controller step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiStep<T: Scalar> {
    pub error: T,
    pub candidate: T,
    pub deposit: T,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiController<T: Scalar> {
    config: PiConfig<T>,
    integral: T,
    deposit: T,
    pinned_errors: Vec<T>,
    unstable: bool,
}

impl<T: Scalar> PiController<T> {
    pub fn new(config: PiConfig<T>) -> Result<Self, ControlError> {
        config.validate()?;
        Ok(Self {
            deposit: config.d0,
            config,
            integral: T::zero(),
            pinned_errors: Vec::new(),
            unstable: false,
        })
    }

    pub fn config(&self) -> &PiConfig<T> {
        &self.config
    }

    pub fn deposit(&self) -> T {
        self.deposit
    }

    pub fn integral(&self) -> T {
        self.integral
    }

    /// Set once the deposit sat at `d_max` for three consecutive periods
    /// while the error kept growing.
    pub fn gain_instability(&self) -> bool {
        self.unstable
    }

    /// Admissible output range given the current deposit.
    pub fn output_bounds(&self) -> (T, T) {
        let c = &self.config;
        let lo = c.d_min.max(c.rate_limit_down * self.deposit);
        let hi = c.d_max.min(c.rate_limit_up * self.deposit);
        (lo.min(hi), hi)
    }

    pub fn step(&mut self, measured_rate: T) -> Result<PiStep<T>, ControlError> {
        let e = measure_error(measured_rate, self.config.target_rate)?;
        let trial = self.integral + e;
        let candidate = self.config.d0 + self.config.kp * e + self.config.ki * trial;
        let (lo, hi) = self.output_bounds();
        let deposit = candidate.max(lo).min(hi);
        let clamped = deposit != candidate;
        if !clamped {
            self.integral = trial;
        }
        self.deposit = deposit;
        self.track_instability(e);
        Ok(PiStep {
            error: e,
            candidate,
            deposit,
            clamped,
        })
    }

    fn track_instability(&mut self, e: T) {
        if self.deposit < self.config.d_max {
            self.pinned_errors.clear();
            return;
        }
        let growing = self.pinned_errors.last().is_none_or(|&prev| e.abs() > prev.abs());
        if !growing {
            self.pinned_errors.clear();
        }
        self.pinned_errors.push(e);
        if self.pinned_errors.len() >= 3 {
            self.unstable = true;
        }
    }
}

/// One period of plant output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantSample<T: Scalar> {
    pub rate: T,
    pub rewards: Vec<T>,
}

/// Deterministic plant: the deposit is split by the consensus solver and the
/// rate is the resulting end-to-end throughput.
pub fn static_plant<T, B>(curves: &[B]) -> impl Fn(T) -> Result<PlantSample<T>, ControlError> + '_
where
    T: Scalar,
    B: Behavior<T>,
{
    move |deposit| {
        let rewards = solve_consensus(curves, deposit, T::lit(DEFAULT_TOL))?;
        let rate = throughput(curves, rewards.as_slice())?;
        Ok(PlantSample {
            rate,
            rewards: rewards.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopRow<T: Scalar> {
    pub period: usize,
    pub deposit: T,
    pub measured_rate: T,
    pub target_rate: T,
    pub rewards: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopTrace<T: Scalar> {
    pub rows: Vec<LoopRow<T>>,
    pub gain_instability: bool,
}

impl<T: Scalar> LoopTrace<T> {
    /// First period from which the rate stays within `band` of target.
    pub fn settling_period(&self, band: T) -> Option<usize> {
        let mut first = None;
        for row in &self.rows {
            if (row.measured_rate - row.target_rate).abs() <= band {
                first.get_or_insert(row.period);
            } else {
                first = None;
            }
        }
        first
    }
}

/// Runs the loop for `periods` periods. Row `p` holds the deposit active in
/// period `p` and the rate it produced.
pub fn closed_loop<T, P>(config: PiConfig<T>, mut plant: P, periods: usize) -> Result<LoopTrace<T>, ControlError>
where
    T: Scalar,
    P: FnMut(T) -> Result<PlantSample<T>, ControlError>,
{
    let mut ctl = PiController::new(config)?;
    let mut rows = Vec::with_capacity(periods);
    for period in 0..periods {
        let deposit = ctl.deposit();
        let sample = plant(deposit)?;
        rows.push(LoopRow {
            period,
            deposit,
            measured_rate: sample.rate,
            target_rate: ctl.config().target_rate,
            rewards: sample.rewards,
        });
        ctl.step(sample.rate)?;
    }
    Ok(LoopTrace {
        rows,
        gain_instability: ctl.gain_instability(),
    })
}
