//! Scan configuration: TOML with dotted sections, plus named presets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    /// Time-dependent Redfield.
    Redfield,
    #[value(name = "redfield_ti")]
    RedfieldTi,
    Rwa,
    Nr,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Redfield => "redfield",
            Method::RedfieldTi => "redfield_ti",
            Method::Rwa => "rwa",
            Method::Nr => "nr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    #[default]
    Exact,
    /// Gibbs state of the system Hamiltonian.
    Gibbs,
}

impl Reference {
    pub fn name(self) -> &'static str {
        match self {
            Reference::Exact => "exact",
            Reference::Gibbs => "gibbs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Metric {
    AvgTraceDist,
    SteadyTraceDist,
    SteadyTraceDistOverGamma,
    OdDistOverGamma,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::AvgTraceDist => "avg_trace_dist",
            Metric::SteadyTraceDist => "steady_trace_dist",
            Metric::SteadyTraceDistOverGamma => "steady_trace_dist_over_gamma",
            Metric::OdDistOverGamma => "od_dist_over_gamma",
        }
    }

    pub fn is_transient(self) -> bool {
        self == Metric::AvgTraceDist
    }

    pub fn divides_by_gamma(self) -> bool {
        matches!(
            self,
            Metric::SteadyTraceDistOverGamma | Metric::OdDistOverGamma
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    pub scale: Scale,
}

impl Axis {
    pub fn validate(&self, name: &str) -> Result<()> {
        if self.n < 1 {
            return Err(BenchError::Config(format!("{name}.n must be at least 1")));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(BenchError::Config(format!(
                "{name} needs finite min < max, got ({}, {})",
                self.min, self.max
            )));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return Err(BenchError::Config(format!(
                "{name} on a log scale needs min > 0"
            )));
        }
        Ok(())
    }

    /// Grid points from `min`; a single point sits at `min`.
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.min];
        }
        let last = (self.n - 1) as f64;
        (0..self.n)
            .map(|i| {
                let s = i as f64 / last;
                match self.scale {
                    Scale::Linear => self.min + (self.max - self.min) * s,
                    Scale::Log => self.min * (self.max / self.min).powf(s),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub gamma: Axis,
    pub beta: Axis,
}

/// Averaging window of the transient metric: `"k/gamma"` for `τ_R = k/(γω)`
/// or a plain number for a fixed window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TauRule {
    InverseGamma(f64),
    Fixed(f64),
}

impl TauRule {
    pub fn window(self, gamma: f64, omega: f64) -> Result<f64> {
        let t = match self {
            TauRule::InverseGamma(k) => k / (gamma * omega),
            TauRule::Fixed(t) => t,
        };
        if t > 0.0 && t.is_finite() {
            Ok(t)
        } else {
            Err(BenchError::Config(format!(
                "averaging window {t} at gamma = {gamma} is not positive"
            )))
        }
    }
}

impl Default for TauRule {
    fn default() -> Self {
        TauRule::InverseGamma(2.0)
    }
}

impl fmt::Display for TauRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauRule::InverseGamma(k) => write!(f, "{k}/gamma"),
            TauRule::Fixed(t) => write!(f, "{t}"),
        }
    }
}

impl FromStr for TauRule {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            BenchError::Config(format!(
                "tau_R_rule must be \"k/gamma\" or a number, got {s:?}"
            ))
        };
        let s = s.trim();
        let (value, rule): (f64, fn(f64) -> TauRule) = match s.strip_suffix("/gamma") {
            Some(k) => (k.trim().parse().map_err(|_| bad())?, TauRule::InverseGamma),
            None => (s.parse().map_err(|_| bad())?, TauRule::Fixed),
        };
        if value > 0.0 && value.is_finite() {
            Ok(rule(value))
        } else {
            Err(bad())
        }
    }
}

impl TryFrom<String> for TauRule {
    type Error = BenchError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TauRule> for String {
    fn from(r: TauRule) -> String {
        r.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixed {
    pub cutoff: f64,
    pub dim: usize,
    #[serde(rename = "tau_R_rule", default)]
    pub tau_r_rule: TauRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub method: Method,
    #[serde(default)]
    pub reference: Reference,
    pub metric: Metric,
    pub output: PathBuf,
    /// Also write a plotting script next to the CSV.
    #[serde(default = "default_plot")]
    pub plot: bool,
    pub grid: Grid,
    pub fixed: Fixed,
}

fn default_plot() -> bool {
    true
}

pub const PRESETS: [&str; 4] = ["fig3", "fig4", "fig5", "fig6"];

impl ScanConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScanConfig =
            toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scan configurations always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.gamma.validate("grid.gamma")?;
        self.grid.beta.validate("grid.beta")?;
        if self.grid.gamma.min < 0.0 {
            return Err(BenchError::Config("grid.gamma must be non-negative".into()));
        }
        if self.grid.beta.min <= 0.0 {
            return Err(BenchError::Config("grid.beta must be positive".into()));
        }
        if self.fixed.dim < 2 {
            return Err(BenchError::Config(format!(
                "fixed.dim must be at least 2, got {}",
                self.fixed.dim
            )));
        }
        if !(self.fixed.cutoff > 0.0 && self.fixed.cutoff.is_finite()) {
            return Err(BenchError::Config(format!(
                "fixed.cutoff must be positive, got {}",
                self.fixed.cutoff
            )));
        }
        let needs_gamma = self.metric.divides_by_gamma()
            || (self.metric.is_transient()
                && matches!(self.fixed.tau_r_rule, TauRule::InverseGamma(_)));
        if needs_gamma && self.grid.gamma.min <= 0.0 {
            return Err(BenchError::Config(format!(
                "metric {} needs gamma > 0 on the whole grid",
                self.metric.name()
            )));
        }
        if self.metric.is_transient() && self.reference == Reference::Gibbs {
            return Err(BenchError::Config(
                "transient metrics need the exact reference".into(),
            ));
        }
        Ok(())
    }

    /// Named presets approximating the axes of the published heatmaps:
    /// γ ∈ [0.05, 1] and β ∈ [0.2, 5], both logarithmic on 21 points.
    pub fn preset(name: &str) -> Result<Self> {
        let (method, metric, cutoff) = match name {
            "fig3" => (Method::Redfield, Metric::AvgTraceDist, 5.0),
            "fig4" => (Method::Rwa, Metric::AvgTraceDist, 5.0),
            "fig5" => (Method::RedfieldTi, Metric::SteadyTraceDistOverGamma, 1.0),
            "fig6" => (Method::RedfieldTi, Metric::OdDistOverGamma, 1.0),
            _ => {
                return Err(BenchError::Config(format!(
                    "unknown preset {name:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        let axis = |min, max| Axis {
            min,
            max,
            n: 21,
            scale: Scale::Log,
        };
        Ok(ScanConfig {
            method,
            reference: Reference::Exact,
            metric,
            output: PathBuf::from(format!("{name}.csv")),
            plot: true,
            grid: Grid {
                gamma: axis(0.05, 1.0),
                beta: axis(0.2, 5.0),
            },
            fixed: Fixed {
                cutoff,
                dim: 30,
                tau_r_rule: TauRule::default(),
            },
        })
    }
}
