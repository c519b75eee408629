//! Single-file TOML configuration with `[plant]`, `[fan]`, `[training]`,
//! `[mpc]` and `[scenario]` sections. Every field has a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scenario::ScenarioConfig;
use crate::fan::FanGeometry;
use crate::mpc::MpcConfig;
use crate::nn::TrainingConfig;
use crate::plant::PlantConfig;
use crate::{Error, Result, SAMPLE_TIME};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub plant: PlantConfig,
    pub fan: FanGeometry,
    pub training: TrainingConfig,
    pub mpc: MpcConfig,
    pub scenario: ScenarioConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.engine.validate(SAMPLE_TIME)?;
        self.plant.inputs.validate()?;
        self.fan.validate()?;
        self.training.validate()?;
        self.mpc.validate()?;
        let (p, m) = (&self.plant.inputs, &self.mpc.inputs);
        if m.tps_min < p.tps_min || m.tps_max > p.tps_max || m.fuel_min < p.fuel_min || m.fuel_max > p.fuel_max {
            return Err(Error::Config("mpc input box must lie inside the plant input box".into()));
        }
        self.scenario.validate(&self.mpc)
    }
}
