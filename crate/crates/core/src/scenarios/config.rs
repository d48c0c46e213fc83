use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Fig1,
    Fig2,
    Zeno,
    BiasSweep,
    Thermalize,
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 6] =
        [Scenario::Fig1, Scenario::Fig2, Scenario::Zeno, Scenario::BiasSweep, Scenario::Thermalize, Scenario::Custom];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig1 => "fig1",
            Scenario::Fig2 => "fig2",
            Scenario::Zeno => "zeno",
            Scenario::BiasSweep => "bias_sweep",
            Scenario::Thermalize => "thermalize",
            Scenario::Custom => "custom",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?} (expected fig1, fig2, zeno, bias_sweep, thermalize or custom)")))
    }
}

/// One ladder value or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingLadder {
    Single(f64),
    List(Vec<f64>),
}

impl CouplingLadder {
    pub fn values(&self) -> Vec<f64> {
        match self {
            CouplingLadder::Single(x) => vec![*x],
            CouplingLadder::List(v) => v.clone(),
        }
    }
}

/// Default ladder of the fig1 and fig2 scenarios.
pub const DEFAULT_LADDER: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];
/// Ladder value treated as the strongest coupling.
pub const STRONGEST_LADDER: f64 = 3.0;

fn default_temperature() -> f64 {
    5.0
}

fn default_samples() -> usize {
    1024
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_log10: Option<CouplingLadder>,
    #[serde(default)]
    pub b: f64,
    #[serde(rename = "T", alias = "temperature", default = "default_temperature")]
    pub temperature: f64,
    /// Run length; scenario default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_path: PathBuf,
    /// Reserved; every current scenario is deterministic.
    #[serde(default)]
    pub seed: u64,
    /// Also write the real and imaginary parts of every block entry.
    #[serde(default)]
    pub full: bool,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        ScenarioConfig {
            scenario,
            coupling_log10: None,
            b: 0.0,
            temperature: default_temperature(),
            t_end: None,
            samples: default_samples(),
            model_path: None,
            output_path: default_output(),
            seed: 0,
            full: false,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("bad scenario config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("T must be positive and finite, got {}", self.temperature));
        }
        if !self.b.is_finite() {
            return bad(format!("b must be finite, got {}", self.b));
        }
        if self.samples < 8 {
            return bad(format!("samples must be at least 8, got {}", self.samples));
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("t_end must be positive and finite, got {t}"));
            }
        }
        if let Some(ladder) = &self.coupling_log10 {
            let v = ladder.values();
            if v.is_empty() {
                return bad("coupling_log10 list is empty".into());
            }
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                return bad(format!("coupling_log10 must be finite, got {x}"));
            }
            let multi = matches!(self.scenario, Scenario::Fig1 | Scenario::Fig2 | Scenario::Custom);
            if !multi && v.len() != 1 {
                return bad(format!("{} takes a single coupling_log10 value, got {}", self.scenario, v.len()));
            }
        }
        match (self.scenario, &self.model_path) {
            (Scenario::Custom, None) => bad("scenario custom requires model_path".into()),
            (Scenario::Custom, Some(_)) => Ok(()),
            (sc, Some(_)) => bad(format!("scenario {sc} builds its own model; model_path is only for custom")),
            _ => Ok(()),
        }
    }

    /// Ladder values this config runs at.
    pub fn ladder(&self) -> Vec<f64> {
        match (&self.coupling_log10, self.scenario) {
            (Some(l), _) => l.values(),
            (None, Scenario::Fig1 | Scenario::Fig2) => DEFAULT_LADDER.to_vec(),
            (None, Scenario::Thermalize) => vec![0.0],
            (None, _) => vec![STRONGEST_LADDER],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_takes_defaults() {
        let cfg = ScenarioConfig::from_json_str(r#"{"scenario": "fig1"}"#).unwrap();
        assert_eq!(cfg, ScenarioConfig::new(Scenario::Fig1));
        assert_eq!(cfg.ladder(), DEFAULT_LADDER.to_vec());
        cfg.validate().unwrap();
    }

    #[test]
    fn single_or_list_coupling() {
        let a = ScenarioConfig::from_json_str(r#"{"scenario": "zeno", "coupling_log10": 2}"#).unwrap();
        assert_eq!(a.ladder(), vec![2.0]);
        let b = ScenarioConfig::from_json_str(r#"{"scenario": "fig2", "coupling_log10": [-3, 0, 3], "T": 4}"#).unwrap();
        assert_eq!(b.ladder(), vec![-3.0, 0.0, 3.0]);
        assert_eq!(b.temperature, 4.0);
    }

    #[test]
    fn custom_needs_a_model_and_presets_refuse_one() {
        let mut cfg = ScenarioConfig::new(Scenario::Custom);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.model_path = Some("m.json".into());
        cfg.validate().unwrap();
        let mut preset = ScenarioConfig::new(Scenario::Fig1);
        preset.model_path = Some("m.json".into());
        assert!(matches!(preset.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(ScenarioConfig::from_json_str(r#"{"scenario": "fig9"}"#).is_err());
        assert!(ScenarioConfig::from_json_str(r#"{"scenario": "fig1", "bogus": 1}"#).is_err());
        let mut cfg = ScenarioConfig::new(Scenario::Zeno);
        cfg.coupling_log10 = Some(CouplingLadder::List(vec![1.0, 2.0]));
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::new(Scenario::Fig1);
        cfg.temperature = 0.0;
        assert!(cfg.validate().is_err());
        cfg.temperature = 5.0;
        cfg.t_end = Some(-1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
            let json = serde_json::to_string(&sc).unwrap();
            assert_eq!(json, format!("\"{}\"", sc.name()));
        }
    }
}
