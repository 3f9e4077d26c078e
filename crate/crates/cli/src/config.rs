//! Run configuration: an optional TOML or JSON file overlaid by flags.
//! All rates are multiples of κ, which is fixed at 1.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use atomlaser::coherence::Method;
use atomlaser::qnd::DesignInput;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    Off,
    On,
    Both,
}

impl FeedbackMode {
    pub fn settings(self) -> &'static [bool] {
        match self {
            FeedbackMode::Off => &[false],
            FeedbackMode::On => &[true],
            FeedbackMode::Both => &[false, true],
        }
    }
}

impl FromStr for FeedbackMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "off" => Ok(FeedbackMode::Off),
            "on" => Ok(FeedbackMode::On),
            "both" => Ok(FeedbackMode::Both),
            _ => Err(format!("expected off, on or both, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Resolvent,
    Quadrature,
    Both,
    Analytic,
}

impl MethodChoice {
    pub fn numeric(self) -> Method {
        match self {
            MethodChoice::Resolvent | MethodChoice::Both => Method::Resolvent,
            MethodChoice::Quadrature => Method::Quadrature,
            MethodChoice::Analytic => Method::Analytic,
        }
    }
}

impl FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "resolvent" => Ok(MethodChoice::Resolvent),
            "quadrature" => Ok(MethodChoice::Quadrature),
            "both" => Ok(MethodChoice::Both),
            "analytic" => Ok(MethodChoice::Analytic),
            _ => Err(format!("expected resolvent, quadrature, both or analytic, got `{s}`")),
        }
    }
}

/// χ values as either `lo:hi:n` (log spaced, inclusive) or a comma list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChiGrid {
    List(Vec<f64>),
    Text(String),
}

impl ChiGrid {
    pub fn values(&self) -> Result<Vec<f64>, UsageError> {
        let v = match self {
            ChiGrid::List(v) => v.clone(),
            ChiGrid::Text(s) => parse_chi_grid(s)?,
        };
        if v.is_empty() {
            return Err(UsageError("χ grid is empty".into()));
        }
        if let Some(x) = v.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(UsageError(format!("χ must be finite and ≥ 0, got {x}")));
        }
        Ok(v)
    }
}

pub fn parse_chi_grid(s: &str) -> Result<Vec<f64>, UsageError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| UsageError(format!("bad number `{t}` in χ grid")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => s.split(',').map(num).collect(),
        3 => {
            let (lo, hi) = (num(parts[0])?, num(parts[1])?);
            let n: usize = parts[2]
                .trim()
                .parse()
                .map_err(|_| UsageError(format!("bad point count `{}`", parts[2])))?;
            if !(lo > 0.0 && hi >= lo) || n == 0 {
                return Err(UsageError(format!("log grid needs 0 < lo ≤ hi and n ≥ 1, got `{s}`")));
            }
            if n == 1 {
                return Ok(vec![lo]);
            }
            let step = (hi / lo).ln() / (n - 1) as f64;
            Ok((0..n)
                .map(|k| if k == n - 1 { hi } else { lo * (step * k as f64).exp() })
                .collect())
        }
        _ => Err(UsageError(format!("χ grid must be `lo:hi:n` or a comma list, got `{s}`"))),
    }
}

pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
    if !(lo < hi) {
        return Err(format!("range needs lo < hi, got `{s}`"));
    }
    Ok((lo, hi))
}

/// Everything a run may be configured with. Unset fields take defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub mu: Option<f64>,
    pub chi: Option<f64>,
    pub chi_grid: Option<ChiGrid>,
    pub feedback: Option<FeedbackMode>,
    pub eta: Option<f64>,
    pub method: Option<MethodChoice>,
    pub dim_pad: Option<f64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub omega_range: Option<(f64, f64)>,
    /// Evolution time κt for Q-function snapshots.
    pub time: Option<f64>,
    pub design: Option<DesignInput>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, UsageError> {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        if is_json {
            serde_json::from_str(&text)
                .map_err(|e| UsageError(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
        }
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: Config) -> Config {
        Config {
            mu: over.mu.or(self.mu),
            chi: over.chi.or(self.chi),
            chi_grid: over.chi_grid.or(self.chi_grid),
            feedback: over.feedback.or(self.feedback),
            eta: over.eta.or(self.eta),
            method: over.method.or(self.method),
            dim_pad: over.dim_pad.or(self.dim_pad),
            out: over.out.or(self.out),
            jobs: over.jobs.or(self.jobs),
            omega_range: over.omega_range.or(self.omega_range),
            time: over.time.or(self.time),
            design: over.design.or(self.design),
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or(15.0)
    }

    pub fn chi(&self) -> f64 {
        self.chi.unwrap_or(0.0)
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(1.0)
    }

    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_endpoints() {
        let g = parse_chi_grid("0.1:1e5:7").unwrap();
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[6], 1e5);
        assert!((g[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn list_and_empty_grids() {
        assert_eq!(parse_chi_grid("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(ChiGrid::Text(String::new()).values().is_err());
        assert!(ChiGrid::List(vec![]).values().is_err());
        assert!(parse_chi_grid("1:2").is_err());
        assert!(parse_chi_grid("0:2:3").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = Config {
            mu: Some(30.0),
            eta: Some(0.5),
            ..Config::default()
        };
        let flags = Config {
            mu: Some(60.0),
            ..Config::default()
        };
        let c = file.overlay(flags);
        assert_eq!(c.mu, Some(60.0));
        assert_eq!(c.eta, Some(0.5));
    }

    #[test]
    fn toml_and_json_parse() {
        let t: Config = toml::from_str("mu = 60\nchi_grid = \"0.1:10:3\"\nfeedback = \"both\"\n").unwrap();
        assert_eq!(t.mu, Some(60.0));
        assert_eq!(t.feedback, Some(FeedbackMode::Both));
        assert_eq!(t.chi_grid.unwrap().values().unwrap().len(), 3);
        let j: Config = serde_json::from_str(r#"{"chi_grid": [1, 2], "method": "both"}"#).unwrap();
        assert_eq!(j.method, Some(MethodChoice::Both));
        assert!(toml::from_str::<Config>("bogus = 1").is_err());
    }
}
