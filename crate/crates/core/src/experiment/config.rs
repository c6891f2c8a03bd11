//! Scenario files (TOML).
//!
//! ```toml
//! P = 3
//! t_bar = 1
//! alpha = 4
//! lengths = [2, 3, 3]      # or: users = 100, sigma = 10.0, tolerance = 0.5
//! eta_hat = 3              # or "sweep" / "optimize"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cc_elevation::ExclusionRule;
use crate::error::{Error, Result};
use crate::experiment::lengths::{generate_lengths, LengthDistribution, LengthMode};
use crate::system_model::{AssignmentPolicy, ChurnEvent, NetworkSnapshot, SystemParams};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum EtaSetting {
    Fixed(usize),
    Word(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaChoice {
    Fixed(usize),
    Sweep,
    Optimize,
}

impl EtaChoice {
    fn from_setting(s: &EtaSetting) -> Result<Self> {
        match s {
            EtaSetting::Fixed(e) => Ok(EtaChoice::Fixed(*e)),
            EtaSetting::Word(w) => match w.as_str() {
                "sweep" => Ok(EtaChoice::Sweep),
                "optimize" => Ok(EtaChoice::Optimize),
                other => Err(Error::Config(format!(
                    "eta_hat must be an integer, `sweep` or `optimize`, got `{other}`"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SigmaSweepConfig {
    /// Defaults to the scenario's user count.
    pub users: Option<usize>,
    /// Sigma bands; all distributions when absent.
    #[serde(default)]
    pub targets: Vec<f64>,
    #[serde(default)]
    pub tolerance: f64,
    /// Distributions kept per band (0 keeps all).
    #[serde(default)]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub intervals: u64,
    #[serde(default = "default_eta_policy")]
    pub eta_policy: String,
    #[serde(default)]
    pub events: Vec<ChurnEvent>,
}

fn default_eta_policy() -> String {
    "optimize".into()
}

/// The file as written.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "P")]
    pub profiles: usize,
    pub t_bar: usize,
    pub alpha: usize,
    pub lengths: Option<Vec<usize>>,
    pub users: Option<usize>,
    pub sigma: Option<f64>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub eta_hat: Option<EtaSetting>,
    pub policy: Option<String>,
    pub exclusion: Option<String>,
    pub output: Option<PathBuf>,
    pub sigma_sweep: Option<SigmaSweepConfig>,
    pub dynamics: Option<DynamicsConfig>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().trim().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Validates and fills defaults; `seed` overrides the file's seed.
    pub fn resolve(&self, seed: Option<u64>) -> Result<Scenario> {
        let params = SystemParams::new(self.alpha, self.profiles, self.t_bar)?;
        let seed = seed.or(self.seed).unwrap_or(0);
        let distribution = match (&self.lengths, self.users) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either `lengths` or `users`, not both".into()));
            }
            (None, None) => return Err(Error::Config("one of `lengths` or `users` is required".into())),
            (Some(lengths), None) => {
                if self.sigma.is_some() || self.tolerance.is_some() {
                    return Err(Error::Config("`sigma`/`tolerance` only apply with `users`".into()));
                }
                if lengths.len() != self.profiles {
                    return Err(Error::Config(format!(
                        "`lengths` has {} entries, P = {}",
                        lengths.len(),
                        self.profiles
                    )));
                }
                LengthDistribution::new(lengths.clone())
            }
            (None, Some(users)) => {
                let sigma = self.sigma.unwrap_or(0.0);
                let tolerance = self.tolerance.unwrap_or(0.0);
                let mode = LengthMode::Sample { count: 1, seed };
                generate_lengths(users, self.profiles, sigma, tolerance, mode)?.remove(0)
            }
        };
        let eta = match &self.eta_hat {
            Some(s) => EtaChoice::from_setting(s)?,
            None => EtaChoice::Optimize,
        };
        let policy = AssignmentPolicy::parse(self.policy.as_deref().unwrap_or("least-loaded"), seed)?;
        let exclusion = ExclusionRule::parse(self.exclusion.as_deref().unwrap_or("highest-ids"), seed)?;
        let dynamics = match &self.dynamics {
            Some(d) => {
                let eta_policy = match d.eta_policy.as_str() {
                    "optimize" => EtaChoice::Optimize,
                    "fixed" => match eta {
                        EtaChoice::Fixed(e) => EtaChoice::Fixed(e),
                        _ => {
                            return Err(Error::Config(
                                "`eta_policy = \"fixed\"` needs an integer `eta_hat`".into(),
                            ))
                        }
                    },
                    other => return Err(Error::Config(format!("unknown eta_policy `{other}`"))),
                };
                if d.intervals == 0 {
                    return Err(Error::Config("`intervals` must be at least 1".into()));
                }
                Some(Dynamics {
                    intervals: d.intervals,
                    eta_policy,
                    events: d.events.clone(),
                })
            }
            None => None,
        };
        Ok(Scenario {
            snapshot: NetworkSnapshot::from_lengths(&distribution.lengths),
            params,
            distribution,
            eta,
            policy,
            exclusion,
            seed,
            output: self.output.clone(),
            sigma_sweep: self.sigma_sweep.clone(),
            dynamics,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    pub intervals: u64,
    pub eta_policy: EtaChoice,
    pub events: Vec<ChurnEvent>,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: SystemParams,
    pub distribution: LengthDistribution,
    /// Users `1..=K` numbered profile by profile.
    pub snapshot: NetworkSnapshot,
    pub eta: EtaChoice,
    pub policy: AssignmentPolicy,
    pub exclusion: ExclusionRule,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub sigma_sweep: Option<SigmaSweepConfig>,
    pub dynamics: Option<Dynamics>,
}
