use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ddrs_core::aimd::{self, relative_spread};
use ddrs_core::binsim::{rms_distance, simulate_week, Strategy, WeekReport};
use ddrs_core::ddrs::run_ddrs;
use ddrs_core::rewardopt::{consensus_ratios, solve_consensus, sweep_surface, throughput};
use ddrs_core::Curve;
use ddrs_core::behavior::Behavior;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{cols, header, num, numbered, Artifacts};
use crate::scenario::{Kind, Scenario};
use crate::CliError;

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub deposit: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub auto_gamma: bool,
    pub iters: Option<usize>,
    pub curves: Option<Vec<Curve>>,
}

impl Overrides {
    /// Applies the overrides and re-validates the scenario.
    pub fn apply(&self, mut s: Scenario) -> Result<Scenario, CliError> {
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(out) = &self.out {
            s.out = Some(out.clone());
        }
        let aimd_only = self.alpha.is_some()
            || self.beta.is_some()
            || self.gamma.is_some()
            || self.auto_gamma
            || self.iters.is_some();
        if aimd_only && s.kind != Kind::Aimd {
            return Err(CliError::invalid(
                "--alpha/--beta/--gamma/--auto-gamma/--iters",
                format!("only apply to aimd scenarios, not '{}'", s.kind),
            ));
        }
        if let (Some(_), true) = (self.gamma, self.auto_gamma) {
            return Err(CliError::invalid("--gamma", "conflicts with --auto-gamma"));
        }
        match s.kind {
            Kind::Solve => {
                let p = s.solve.as_mut().expect("filled");
                if let Some(d) = self.deposit {
                    p.deposit = d;
                }
                if let Some(c) = &self.curves {
                    p.curves = c.clone();
                }
            }
            Kind::Sweep => {
                let p = s.sweep.as_mut().expect("filled");
                if let Some(d) = self.deposit {
                    p.deposit = d;
                }
                if let Some(c) = &self.curves {
                    p.curves = c.clone();
                }
            }
            Kind::Aimd => {
                let p = s.aimd.as_mut().expect("filled");
                let a = &mut p.allocator;
                if let Some(d) = self.deposit {
                    a.deposit = d;
                }
                if let Some(x) = self.alpha {
                    a.alpha = x;
                }
                if let Some(x) = self.beta {
                    a.beta = x;
                }
                if self.gamma.is_some() {
                    a.gamma = self.gamma;
                }
                if self.auto_gamma {
                    a.gamma = None;
                }
                if let Some(n) = self.iters {
                    a.max_iters = n;
                }
                if let Some(c) = &self.curves {
                    p.curves = c.clone();
                }
            }
            Kind::Ddrs => {
                let p = s.ddrs.as_mut().expect("filled");
                if let Some(d) = self.deposit {
                    p.pi.d0 = d;
                }
                if let Some(c) = &self.curves {
                    p.curves = c.clone();
                }
            }
            Kind::Bins => {
                if self.deposit.is_some() || self.curves.is_some() {
                    return Err(CliError::invalid("--deposit/--curves", "do not apply to bins scenarios"));
                }
            }
        }
        s.validate()?;
        Ok(s)
    }
}

/// Outcome of a successful run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub kind: Kind,
    pub seed: u64,
    /// One-line human summary.
    pub line: String,
    pub metrics: Value,
    pub files: Vec<PathBuf>,
}

/// Output directory: the scenario's `out`, else `out/<name>`.
pub fn output_dir(s: &Scenario) -> PathBuf {
    s.out.clone().unwrap_or_else(|| Path::new("out").join(&s.name))
}

/// Runs a validated scenario and writes its artifacts.
pub fn run(s: &Scenario) -> Result<RunReport, CliError> {
    let mut art = Artifacts::new(&output_dir(s))?;
    let (line, metrics) = match s.kind {
        Kind::Bins => run_bins(s, &mut art)?,
        Kind::Solve => run_solve(s, &mut art)?,
        Kind::Sweep => run_sweep(s, &mut art)?,
        Kind::Aimd => run_aimd(s, &mut art)?,
        Kind::Ddrs => run_ddrs_kind(s, &mut art)?,
    };
    art.json("scenario.json", s)?;
    let mut files: Vec<PathBuf> = art.files().to_vec();
    files.push(art.dir().join("summary.json"));
    let report = RunReport {
        name: s.name.clone(),
        kind: s.kind,
        seed: s.seed,
        line,
        metrics,
        files,
    };
    art.json(
        "summary.json",
        &json!({
            "name": report.name,
            "kind": report.kind,
            "seed": report.seed,
            "metrics": report.metrics,
            "files": report.files,
            "scenario": s,
        }),
    )?;
    art.keep();
    Ok(report)
}

/// Runs seeds `seed .. seed + n` concurrently, each into `<out>/seed_<s>`,
/// and writes `<out>/aggregate.json` keyed by seed.
pub fn run_replications(s: &Scenario, n: usize) -> Result<Vec<RunReport>, CliError> {
    if n == 0 {
        return Err(CliError::invalid("--replications", "must be at least 1"));
    }
    let base = output_dir(s);
    let scenarios: Vec<Scenario> = (0..n as u64)
        .map(|i| {
            let mut c = s.clone();
            c.seed = s.seed + i;
            c.out = Some(base.join(format!("seed_{}", c.seed)));
            c
        })
        .collect();
    let results: Vec<Result<RunReport, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios.iter().map(|c| scope.spawn(move || run(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::runtime("replication thread panicked"))))
            .collect()
    });
    let reports = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let by_seed: BTreeMap<u64, &Value> = reports.iter().map(|r| (r.seed, &r.metrics)).collect();
    let mut art = Artifacts::new(&base)?;
    art.json(
        "aggregate.json",
        &json!({ "name": s.name, "kind": s.kind, "replications": n, "seeds": by_seed }),
    )?;
    art.keep();
    Ok(reports)
}

fn core_err(e: impl std::fmt::Display) -> CliError {
    CliError::runtime(e)
}

fn run_bins(s: &Scenario, art: &mut Artifacts) -> Result<(String, Value), CliError> {
    let p = s.bins.as_ref().expect("filled");
    let n = p.week.bins.len();
    let mut reports: Vec<(Strategy, WeekReport)> = Vec::new();
    for &strategy in &p.strategies {
        // Same seed for every strategy: all of them see the same arrivals.
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        reports.push((strategy, simulate_week(&p.week, strategy, &mut rng).map_err(core_err)?));
    }
    let centralised = reports
        .iter()
        .find(|(st, _)| *st == Strategy::Centralised)
        .map(|(_, r)| r.clone());

    if p.levels {
        let head = header(&[&cols(&["strategy", "minute", "day", "hour"]), &numbered("level", n), &cols(&["cumulative_overflow"])]);
        let rows = reports.iter().flat_map(|(st, r)| {
            let label = st.label();
            r.levels.iter().zip(&r.cumulative_overflow).enumerate().map(move |(t, (lv, ov))| {
                let mut row = vec![
                    label.clone(),
                    t.to_string(),
                    (t / 1440).to_string(),
                    num((t % 1440) as f64 / 60.0),
                ];
                row.extend(lv.iter().map(|l| l.to_string()));
                row.push(ov.to_string());
                row
            })
        });
        art.csv("bins_levels.csv", &head, rows)?;
    }

    let mut overflow = BTreeMap::new();
    let mut rms = BTreeMap::new();
    let mut rows = Vec::new();
    for (st, r) in &reports {
        let sm = &r.summary;
        let d = centralised.as_ref().map(|c| rms_distance(r, c));
        overflow.insert(sm.strategy.clone(), sm.overflow_fraction());
        if let Some(d) = d {
            rms.insert(st.label(), d);
        }
        rows.push(vec![
            sm.strategy.clone(),
            sm.arrivals.to_string(),
            sm.recycled.to_string(),
            sm.overflowed.to_string(),
            num(sm.overflow_fraction()),
            sm.emptyings.to_string(),
            sm.mean_signal_wait_s.map(num).unwrap_or_default(),
            d.map(num).unwrap_or_default(),
        ]);
    }
    art.csv(
        "bins_summary.csv",
        &cols(&[
            "strategy",
            "arrivals",
            "recycled",
            "overflowed",
            "overflow_fraction",
            "emptyings",
            "mean_signal_wait_s",
            "rms_to_centralised",
        ]),
        rows,
    )?;
    let line = format!(
        "bins: overflow {}",
        overflow
            .iter()
            .map(|(k, v)| format!("{k} {:.1}%", 100.0 * v))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok((line, json!({ "overflow_fraction": overflow, "rms_to_centralised": rms })))
}

fn run_solve(s: &Scenario, art: &mut Artifacts) -> Result<(String, Value), CliError> {
    let p = s.solve.as_ref().expect("filled");
    let r = solve_consensus(&p.curves, p.deposit, p.tol).map_err(core_err)?;
    let t = throughput(&p.curves, r.as_slice()).map_err(core_err)?;
    let ratios = consensus_ratios(&p.curves, r.as_slice()).map_err(core_err)?;
    let mut rows = Vec::new();
    for (i, c) in p.curves.iter().enumerate() {
        rows.push(vec![
            (i + 1).to_string(),
            num(c.p0()),
            num(c.x90()),
            num(r[i]),
            num(c.eval(r[i]).map_err(core_err)?),
            num(1.0 / ratios[i]),
        ]);
    }
    art.csv(
        "solve.csv",
        &cols(&["layer", "p0", "x90", "reward", "acceptance", "marginal_ratio"]),
        rows,
    )?;
    let line = format!("solve: R = ({}), throughput {:.4}", fmt_vec(r.as_slice()), t);
    Ok((line, json!({ "rewards": r.as_slice(), "throughput": t, "deposit": p.deposit })))
}

fn run_sweep(s: &Scenario, art: &mut Artifacts) -> Result<(String, Value), CliError> {
    let p = s.sweep.as_ref().expect("filled");
    let surface = sweep_surface(&p.curves, p.deposit, p.step).map_err(core_err)?;
    art.csv(
        "sweep.csv",
        &cols(&["r1", "r2", "r3", "throughput"]),
        surface
            .cells
            .iter()
            .map(|c| vec![num(c.r1), num(c.r2), num(c.r3), num(c.throughput)]),
    )?;
    let b = surface.best();
    let line = format!(
        "sweep: best ({:.2}, {:.2}, {:.2}) with throughput {:.4}, worst {:.4}, {} cells",
        b.r1,
        b.r2,
        b.r3,
        b.throughput,
        surface.min_throughput(),
        surface.cells.len()
    );
    Ok((
        line,
        json!({ "best": b, "min_throughput": surface.min_throughput(), "cells": surface.cells.len() }),
    ))
}

fn run_aimd(s: &Scenario, art: &mut Artifacts) -> Result<(String, Value), CliError> {
    let p = s.aimd.as_ref().expect("filled");
    let run = aimd::run(&p.curves, &p.allocator, s.seed).map_err(core_err)?;
    let l = p.curves.len();
    art.csv(
        "aimd_trajectory.csv",
        &header(&[&cols(&["step"]), &numbered("R", l), &cols(&["k"]), &numbered("Rbar", l)]),
        run.trajectory.iter().map(|row| {
            let mut v = vec![row.step.to_string()];
            v.extend(row.rewards.iter().map(|&x| num(x)));
            v.push(row.events.to_string());
            v.extend(row.averages.iter().map(|&x| num(x)));
            v
        }),
    )?;
    art.csv(
        "aimd_consensus.csv",
        &header(&[&cols(&["k", "step"]), &numbered("ratio", l)]),
        run.consensus.iter().map(|row| {
            let mut v = vec![row.event.to_string(), row.step.to_string()];
            v.extend(row.ratios.iter().map(|&x| num(x)));
            v
        }),
    )?;
    let ratios = aimd::consensus_diagnostic(&p.curves, &run.final_averages).map_err(core_err)?;
    let spread = relative_spread(&ratios);
    let t = throughput(&p.curves, &run.final_averages).map_err(core_err)?;
    let line = format!(
        "aimd: R̄ = ({}) after {} steps / {} events{}, ratio spread {:.1}%, throughput {:.4}",
        fmt_vec(&run.final_averages),
        run.steps,
        run.events,
        if run.converged { "" } else { " (not converged)" },
        100.0 * spread,
        t
    );
    Ok((
        line,
        json!({
            "gamma": run.gamma,
            "steps": run.steps,
            "events": run.events,
            "converged": run.converged,
            "final_averages": run.final_averages,
            "final_rewards": run.final_rewards,
            "ratio_spread": spread,
            "throughput": t,
        }),
    ))
}

fn run_ddrs_kind(s: &Scenario, art: &mut Artifacts) -> Result<(String, Value), CliError> {
    let cfg = s.ddrs.as_ref().expect("filled");
    let run = run_ddrs(cfg, s.seed).map_err(core_err)?;
    let l = cfg.curves.len();
    art.csv(
        "ddrs_periods.csv",
        &header(&[
            &cols(&["period", "deposit"]),
            &numbered("R", l),
            &cols(&["rate", "target_rate"]),
            &numbered("waste_stage", l),
            &cols(&["created", "recycled", "resolved", "in_flight", "advisories"]),
        ]),
        run.reports.iter().map(|r| {
            let mut v = vec![r.period.to_string(), num(r.deposit)];
            v.extend(r.rewards.iter().map(|&x| num(x)));
            v.push(r.measured_rate.map(num).unwrap_or_default());
            v.push(num(cfg.pi.target_rate));
            v.extend(r.waste_fractions().into_iter().map(num));
            v.push(r.created.to_string());
            v.push(r.recycled.to_string());
            v.push(r.resolved().to_string());
            v.push(r.in_flight.to_string());
            v.push(
                r.advisories
                    .iter()
                    .map(|a| format!("{}:{}", a.stage, serde_json::to_value(a.direction).unwrap().as_str().unwrap_or("")))
                    .collect::<Vec<_>>()
                    .join(";"),
            );
            v
        }),
    )?;
    let rates: Vec<f64> = run.final_quarter().filter_map(|r| r.measured_rate).collect();
    let mean_rate = if rates.is_empty() {
        f64::NAN
    } else {
        rates.iter().sum::<f64>() / rates.len() as f64
    };
    let line = format!(
        "ddrs: final deposit {:.2}p, final-quarter rate {:.2}% (target {:.2}%){}",
        run.final_deposit,
        100.0 * mean_rate,
        100.0 * cfg.pi.target_rate,
        if run.gain_instability { ", gain instability flagged" } else { "" }
    );
    Ok((
        line,
        json!({
            "final_deposit": run.final_deposit,
            "final_quarter_rate": if mean_rate.is_nan() { Value::Null } else { json!(mean_rate) },
            "gain_instability": run.gain_instability,
            "money": run.money,
            "money_imbalance": run.money.imbalance(),
        }),
    ))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")
}
