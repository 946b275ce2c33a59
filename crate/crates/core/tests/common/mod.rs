//! Property checks shared by the `properties` and `acceptance` targets.
#![allow(dead_code)]

use ddrs_core::aimd::{self, AimdConfig, BudgetMonitor};
use ddrs_core::behavior::{uniform_grid, verify_log_concavity, Behavior, BehaviorCurve};
use ddrs_core::ddrs::{run_ddrs, DdrsConfig};
use ddrs_core::depositctl::{static_plant, PiConfig, PiController};
use ddrs_core::paper_cup_curves;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Check = Result<(), TestCaseError>;

pub fn curve_params() -> impl Strategy<Value = (f64, f64)> {
    (0.0..0.89f64, 0.1..50.0f64)
}

pub fn curve_identities(p0: f64, x90: f64, r: f64) -> Check {
    let c = BehaviorCurve::new(p0, x90).unwrap();
    prop_assert_eq!(c.eval(0.0).unwrap(), p0);
    prop_assert!((c.eval(x90).unwrap() - 0.9).abs() < 1e-12);
    let b = c.eval(r).unwrap();
    prop_assert!((p0..=1.0).contains(&b));
    let h = 1e-6 * (1.0 + r);
    let lo = (r - h).max(0.0);
    let fd = (c.eval(r + h).unwrap() - c.eval(lo).unwrap()) / (r + h - lo);
    let d = c.derivative(r).unwrap();
    prop_assert!((fd - d).abs() <= 1e-5 * d.abs() + 1e-9, "fd {} vs {}", fd, d);
    prop_assert!(c.eval(r + 1.0).unwrap() >= b);
    Ok(())
}

pub fn curve_log_concave(p0: f64, x90: f64) -> Check {
    let c = BehaviorCurve::new(p0, x90).unwrap();
    let grid = uniform_grid(0.0, 4.0 * x90, x90 / 50.0);
    prop_assert!(verify_log_concavity(&c, &grid).unwrap());
    Ok(())
}

/// Accounting identity and money conservation on a short closed-loop run.
pub fn ddrs_books(seed: u64, cups_per_day: f64, periods: usize, d0: f64, target: f64) -> Check {
    let cfg = DdrsConfig {
        cups_per_day,
        horizon_periods: periods,
        pi: PiConfig {
            d0,
            target_rate: target,
            ..PiConfig::default()
        },
        ..DdrsConfig::default()
    };
    let run = run_ddrs(&cfg, seed).unwrap();
    for r in &run.reports {
        prop_assert!(r.accounting_holds(), "period {}", r.period);
        prop_assert!(r.rewards.iter().sum::<f64>() <= r.deposit + 1e-9);
    }
    let m = &run.money;
    prop_assert!(m.imbalance().abs() <= 1e-9 * m.paid_in.max(1.0), "imbalance {}", m.imbalance());
    prop_assert!(m.in_flight_wallets >= 0.0 && m.residue >= 0.0);
    Ok(())
}

/// No cup can be recycled before it has sat through every stage cadence.
pub fn ddrs_latency(seed: u64, cadences: Vec<u32>, cups_per_day: f64) -> Check {
    let total: u32 = cadences.iter().sum();
    let cfg = DdrsConfig {
        curves: vec![BehaviorCurve::new(0.5, 0.01).unwrap(); cadences.len()],
        cadences,
        cups_per_day,
        horizon_periods: 1,
        pi: PiConfig {
            period_days: total,
            d0: 5.0,
            ..PiConfig::default()
        },
        ..DdrsConfig::default()
    };
    let run = run_ddrs(&cfg, seed).unwrap();
    prop_assert_eq!(run.reports[0].recycled, 0);
    Ok(())
}

pub fn pi_params() -> impl Strategy<Value = (PiConfig<f64>, Vec<f64>)> {
    (
        0.0..50.0f64,
        0.0..50.0f64,
        0.0..1.0f64,
        0.0..5.0f64,
        5.0..100.0f64,
        1.0..3.0f64,
        0.1..1.0f64,
        prop::collection::vec(0.0..=1.0f64, 100),
    )
        .prop_map(|(kp, ki, target, d_min, span, up, down, ms)| {
            let d_max = d_min + span;
            let cfg = PiConfig {
                kp,
                ki,
                target_rate: target,
                d0: (d_min + 1.0).min(d_max),
                d_min,
                d_max,
                rate_limit_up: up,
                rate_limit_down: down,
                period_days: 30,
            };
            (cfg, ms)
        })
}

/// Bounds and rate limits after every step; integral frozen when clamped.
pub fn pi_clamps(cfg: PiConfig<f64>, measurements: &[f64]) -> Check {
    let mut c = PiController::new(cfg.clone()).unwrap();
    for &m in measurements {
        let before = c.deposit();
        let integral = c.integral();
        let s = c.step(m).unwrap();
        prop_assert!(s.deposit >= cfg.d_min && s.deposit <= cfg.d_max);
        prop_assert!(s.deposit <= cfg.rate_limit_up * before * (1.0 + 1e-12));
        prop_assert!(s.deposit >= cfg.d_min.max(cfg.rate_limit_down * before) * (1.0 - 1e-12));
        if s.clamped {
            prop_assert_eq!(c.integral(), integral);
        } else {
            prop_assert_eq!(c.integral(), integral + s.error);
        }
    }
    Ok(())
}

/// After a long saturated stretch the deposit turns within two periods of an
/// error sign reversal.
pub fn pi_anti_windup(kp: f64, ki: f64, d0: f64, target: f64, d_max: f64) -> Check {
    let cfg = PiConfig {
        kp,
        ki,
        d0,
        target_rate: target,
        d_max,
        ..PiConfig::default()
    };
    let mut c = PiController::new(cfg).unwrap();
    let mut guard = 0;
    while c.deposit() < d_max {
        c.step(0.0).unwrap();
        guard += 1;
        prop_assert!(guard < 10_000, "never saturated");
    }
    for _ in 0..10 {
        c.step(0.0).unwrap();
        prop_assert_eq!(c.deposit(), d_max);
    }
    let first = c.step(1.0).unwrap().deposit;
    let second = c.step(1.0).unwrap().deposit;
    prop_assert!(first < d_max || second < d_max, "{} {}", first, second);
    Ok(())
}

pub fn pi_deterministic(cfg: PiConfig<f64>, measurements: &[f64]) -> Check {
    let run = |cfg: PiConfig<f64>| {
        let mut c = PiController::new(cfg).unwrap();
        measurements.iter().map(|&m| c.step(m).unwrap().deposit).collect::<Vec<_>>()
    };
    prop_assert_eq!(run(cfg.clone()), run(cfg));
    Ok(())
}

pub fn plant_monotone(d1: f64, d2: f64) -> Check {
    let curves = paper_cup_curves();
    let plant = static_plant(&curves);
    let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
    prop_assert!(plant(lo).unwrap().rate <= plant(hi).unwrap().rate + 1e-9);
    Ok(())
}

/// The running average of every layer equals the mean of its recorded
/// rewards at capacity events.
pub fn aimd_average_recompute(seed: u64, deposit: f64, steps: usize) -> Check {
    let curves = paper_cup_curves();
    let cfg = AimdConfig {
        deposit,
        ..AimdConfig::default()
    };
    let gamma = aimd::auto_gamma(&curves, cfg.alpha, deposit).unwrap();
    let mut layers = aimd::init_layers(&curves, &cfg, gamma, seed);
    let monitor = BudgetMonitor { deposit };
    for _ in 0..steps {
        aimd::step(&mut layers, &monitor, cfg.alpha, cfg.beta).unwrap();
    }
    for l in &layers {
        prop_assert!(l.reward() >= 0.0);
        let h = l.history();
        prop_assert_eq!(h.len(), l.events());
        if let Some(avg) = l.average() {
            let mean = h.iter().sum::<f64>() / h.len() as f64;
            prop_assert!((mean - avg).abs() <= 1e-9 * avg.max(1.0));
        }
    }
    Ok(())
}
