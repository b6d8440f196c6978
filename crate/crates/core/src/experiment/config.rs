use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bo::BoConfig;
use crate::dynamics::DayToDayConfig;
use crate::mfd::NetworkParams;
use crate::population::PopulationConfig;
use crate::toll::{TollBounds, TollProfile};
use crate::{Error, Result};

/// Which experiment a configuration describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Nte,
    Toll,
    Optimize,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Nte => "nte",
            Mode::Toll => "toll",
            Mode::Optimize => "optimize",
        }
    }
}

/// The `[toll]` section. Either a concrete profile (`components`) or a
/// search space (`k` plus optional `bounds`), never both.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TollSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<TollProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<TollBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub replications: usize,
    pub output_dir: PathBuf,
    /// Add the chosen slot's taste shock to welfare.
    pub include_epsilon: bool,
    /// Write the trajectory of every simulated day, not just the last one.
    pub dump_trajectories: bool,
    /// Worker threads for replications. 0 means all cores.
    pub jobs: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            replications: 1,
            output_dir: PathBuf::from("out"),
            include_epsilon: false,
            dump_trajectories: false,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub population: PopulationConfig,
    #[serde(default)]
    pub network: NetworkParams,
    #[serde(default)]
    pub dynamics: DayToDayConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toll: Option<TollSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bo: Option<BoConfig>,
    #[serde(default)]
    pub experiment: RunSettings,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Every field, defaults included, as TOML.
    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Resolves the mode from the sections present.
    pub fn mode(&self) -> Result<Mode> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        match (&self.toll, &self.bo) {
            (None, None) => Ok(Mode::Nte),
            (None, Some(_)) => bad("[bo] needs a [toll] section with k"),
            (Some(t), bo) => match (&t.components, t.k) {
                (Some(_), Some(_)) => bad("[toll] takes either components or k, not both"),
                (Some(_), None) if t.bounds.is_some() => bad("[toll] bounds only apply with k"),
                (Some(_), None) if bo.is_some() => bad("[bo] cannot be combined with a fixed toll"),
                (Some(_), None) => Ok(Mode::Toll),
                (None, Some(_)) => Ok(Mode::Optimize),
                (None, None) => bad("[toll] needs components or k"),
            },
        }
    }

    /// Fills in the sections an explicitly requested mode needs and checks
    /// the result resolves to that mode.
    pub fn resolve_for(&mut self, want: Mode) -> Result<()> {
        if want == Mode::Optimize {
            if let Some(t) = self.toll.as_mut() {
                if t.components.is_none() && t.k.is_some() {
                    t.bounds.get_or_insert_with(TollBounds::default);
                    self.bo.get_or_insert_with(BoConfig::default);
                }
            }
        }
        let got = self.mode()?;
        if got != want {
            return Err(Error::Config(format!(
                "config describes a `{}` experiment, not `{}`",
                got.name(),
                want.name()
            )));
        }
        Ok(())
    }

    /// Overrides every seed with `seed`.
    pub fn set_seed(&mut self, seed: u64) {
        self.population.seed = seed;
        self.dynamics.seed = seed;
        if let Some(bo) = self.bo.as_mut() {
            bo.seed = seed;
            bo.objective_seed = None;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mode = self.mode()?;
        self.population.validate()?;
        self.network.validate()?;
        self.dynamics.validate()?;
        if self.experiment.replications == 0 {
            return Err(Error::Config("experiment: replications must be at least 1".into()));
        }
        if mode == Mode::Optimize {
            let (k, bounds) = self.search_space()?;
            bounds.validate()?;
            if k == 0 {
                return Err(Error::Config("toll: k must be at least 1".into()));
            }
            self.bo.clone().unwrap_or_default().validate(3 * k)?;
        }
        Ok(())
    }

    pub(crate) fn search_space(&self) -> Result<(usize, TollBounds)> {
        let t = self.toll.as_ref().ok_or_else(|| Error::Config("missing [toll]".into()))?;
        let k = t.k.ok_or_else(|| Error::Config("toll: k missing".into()))?;
        Ok((k, t.bounds.unwrap_or_default()))
    }

    /// The configuration of replication `r`: every seed shifted by `r`.
    pub fn replication(&self, r: usize) -> ExperimentConfig {
        let mut c = self.clone();
        let r = r as u64;
        c.population.seed = c.population.seed.wrapping_add(r);
        c.dynamics.seed = c.dynamics.seed.wrapping_add(r);
        if let Some(bo) = c.bo.as_mut() {
            let objective = bo.objective_seed.unwrap_or(self.dynamics.seed);
            bo.seed = bo.seed.wrapping_add(r);
            bo.objective_seed = Some(objective.wrapping_add(r));
        }
        c
    }
}
