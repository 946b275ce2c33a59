use std::fmt;
use std::path::{Path, PathBuf};

use ddrs_core::binsim::{Strategy, WeekConfig};
use ddrs_core::ddrs::DdrsConfig;
use ddrs_core::{paper_cup_curves, AimdConfig, Curve};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Bins,
    Solve,
    Sweep,
    Aimd,
    Ddrs,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::Bins => "bins",
            Kind::Solve => "solve",
            Kind::Sweep => "sweep",
            Kind::Aimd => "aimd",
            Kind::Ddrs => "ddrs",
        };
        f.write_str(s)
    }
}

fn preset_strategies() -> Vec<Strategy> {
    Strategy::presets().to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinsParams {
    #[serde(default = "preset_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub week: WeekConfig,
    /// Write the minute-by-minute level trajectories.
    #[serde(default = "yes")]
    pub levels: bool,
}

fn yes() -> bool {
    true
}

impl Default for BinsParams {
    fn default() -> Self {
        Self {
            strategies: preset_strategies(),
            week: WeekConfig::default(),
            levels: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveParams {
    pub curves: Vec<Curve>,
    pub deposit: f64,
    pub tol: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            curves: paper_cup_curves(),
            deposit: 20.0,
            tol: ddrs_core::rewardopt::DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub curves: Vec<Curve>,
    pub deposit: f64,
    pub step: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            curves: paper_cup_curves(),
            deposit: 20.0,
            step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AimdParams {
    pub curves: Vec<Curve>,
    pub allocator: AimdConfig,
}

impl Default for AimdParams {
    fn default() -> Self {
        Self {
            curves: paper_cup_curves(),
            allocator: AimdConfig::default(),
        }
    }
}

/// A fully described experiment. Exactly one parameter block, matching
/// `kind`, may be present; a missing block takes its defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<BinsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aimd: Option<AimdParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ddrs: Option<DdrsConfig>,
}

impl Scenario {
    /// Default scenario of the given kind.
    pub fn defaults(kind: Kind) -> Self {
        let mut s = Scenario {
            name: kind.to_string(),
            kind,
            seed: 0,
            out: None,
            bins: None,
            solve: None,
            sweep: None,
            aimd: None,
            ddrs: None,
        };
        s.fill_defaults();
        s
    }

    fn fill_defaults(&mut self) {
        match self.kind {
            Kind::Bins => {
                self.bins.get_or_insert_with(BinsParams::default);
            }
            Kind::Solve => {
                self.solve.get_or_insert_with(SolveParams::default);
            }
            Kind::Sweep => {
                self.sweep.get_or_insert_with(SweepParams::default);
            }
            Kind::Aimd => {
                self.aimd.get_or_insert_with(AimdParams::default);
            }
            Kind::Ddrs => {
                self.ddrs.get_or_insert_with(DdrsConfig::default);
            }
        }
    }

    /// Checks that only the block for `kind` is present and that every
    /// parameter passes its module's preconditions.
    pub fn validate(&self) -> Result<(), CliError> {
        let present = [
            (Kind::Bins, self.bins.is_some()),
            (Kind::Solve, self.solve.is_some()),
            (Kind::Sweep, self.sweep.is_some()),
            (Kind::Aimd, self.aimd.is_some()),
            (Kind::Ddrs, self.ddrs.is_some()),
        ];
        for (k, there) in present {
            if there && k != self.kind {
                return Err(CliError::invalid(k.to_string(), format!("block given for a '{}' scenario", self.kind)));
            }
        }
        if self.name.trim().is_empty() {
            return Err(CliError::invalid("name", "must not be empty"));
        }
        match self.kind {
            Kind::Bins => {
                let p = self.bins.as_ref().expect("filled");
                if p.strategies.is_empty() {
                    return Err(CliError::invalid("bins.strategies", "at least one strategy is required"));
                }
                for (i, s) in p.strategies.iter().enumerate() {
                    if let Strategy::Decentralised { exponent } = s {
                        if !(*exponent > 0.0 && exponent.is_finite()) {
                            return Err(CliError::invalid(
                                format!("bins.strategies[{i}].exponent"),
                                "must be positive",
                            ));
                        }
                    }
                }
                p.week.validate().map_err(|e| CliError::invalid("bins.week", e))
            }
            Kind::Solve => {
                let p = self.solve.as_ref().expect("filled");
                check_curves("solve.curves", &p.curves)?;
                if !(p.deposit >= 0.0 && p.deposit.is_finite()) {
                    return Err(CliError::invalid("solve.deposit", "must be non-negative"));
                }
                if !(p.tol > 0.0) {
                    return Err(CliError::invalid("solve.tol", "must be positive"));
                }
                Ok(())
            }
            Kind::Sweep => {
                let p = self.sweep.as_ref().expect("filled");
                if p.curves.len() != 3 {
                    return Err(CliError::invalid("sweep.curves", "the surface sweep needs exactly three curves"));
                }
                if !(p.deposit >= 0.0 && p.deposit.is_finite()) {
                    return Err(CliError::invalid("sweep.deposit", "must be non-negative"));
                }
                if !(p.step > 0.0) || p.deposit / p.step > 2000.0 {
                    return Err(CliError::invalid("sweep.step", "must be positive and at least deposit / 2000"));
                }
                Ok(())
            }
            Kind::Aimd => {
                let p = self.aimd.as_ref().expect("filled");
                check_curves("aimd.curves", &p.curves)?;
                p.allocator.validate().map_err(|e| CliError::invalid("aimd.allocator", e))
            }
            Kind::Ddrs => self
                .ddrs
                .as_ref()
                .expect("filled")
                .validate()
                .map_err(|e| CliError::invalid("ddrs", e)),
        }
    }
}

fn check_curves(key: &str, curves: &[Curve]) -> Result<(), CliError> {
    if curves.is_empty() {
        Err(CliError::invalid(key, "at least one curve is required"))
    } else {
        Ok(())
    }
}

/// Parses TOML, or JSON when the file name ends in `.json`.
pub fn parse_scenario(text: &str, json: bool) -> Result<Scenario, String> {
    if text.trim().is_empty() {
        return Err("empty scenario".into());
    }
    if json {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// Reads, parses, fills in defaults and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let json = path.extension().is_some_and(|e| e == "json");
    let mut s = parse_scenario(&text, json).map_err(|message| CliError::Parse {
        path: path.to_path_buf(),
        message,
    })?;
    s.fill_defaults();
    s.validate()?;
    Ok(s)
}

/// Curves from a standalone file holding `curves = [...]`.
pub fn load_curves(path: &Path) -> Result<Vec<Curve>, CliError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct CurveFile {
        curves: Vec<Curve>,
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let parsed: Result<CurveFile, String> = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    let file = parsed.map_err(|message| CliError::Parse {
        path: path.to_path_buf(),
        message,
    })?;
    check_curves("curves", &file.curves)?;
    Ok(file.curves)
}
