//! Pipeline configuration: one TOML table per stage, layered over a scale preset.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use coacs_core::phasing::PhaseConfig;
use coacs_core::simulate::{ParticleConfig, SimConfig};
use coacs_core::HealConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 256 x 256, 50 patterns, 100 replicates.
    Full,
    /// 128 x 128, 5 patterns, 10 replicates.
    Desk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    /// Number of radial shells reported; all shells when absent.
    pub shells: Option<usize>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { shells: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub simulate: SimConfig,
    pub heal: HealConfig,
    pub phase: PhaseConfig,
    pub evaluate: EvaluateConfig,
}

impl PipelineConfig {
    pub fn preset(scale: Scale) -> Self {
        let mut cfg = Self::default();
        if scale == Scale::Desk {
            cfg.simulate.n = 128;
            cfg.simulate.patterns = 5;
            cfg.simulate.beamstop_side = 13;
            cfg.simulate.particle = ParticleConfig {
                circumdiameter: 10.0,
                ..ParticleConfig::default()
            };
            cfg.phase.support_side = 16;
            cfg.phase.hio_iters = 5000;
            cfg.phase.er_iters = 1000;
            cfg.phase.replicates = 10;
        }
        cfg
    }

    /// Parses `text` as TOML on top of the preset for `scale`.
    pub fn from_toml(text: &str, scale: Scale) -> Result<Self> {
        let mut base = toml::Table::try_from(Self::preset(scale)).context("serializing preset")?;
        let overrides: toml::Table = toml::from_str(text).context("parsing configuration")?;
        merge(&mut base, overrides);
        let cfg: Self = toml::Value::Table(base).try_into().context("invalid configuration")?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, scale: Scale) -> Result<Self> {
        let cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::from_toml(&text, scale)?
            }
            None => Self::preset(scale),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.simulate.validate().context("[simulate]")?;
        self.heal.validate().context("[heal]")?;
        self.phase.validate().context("[phase]")?;
        if self.phase.support_side == 0 || 2 * self.phase.support_side > self.simulate.n {
            bail!(
                "[phase] support_side {} does not fit a grid of {}",
                self.phase.support_side,
                self.simulate.n
            );
        }
        if (self.heal.quantum_efficiency - self.simulate.quantum_efficiency).abs() > 0.0 {
            bail!("[heal] quantum_efficiency must equal [simulate] quantum_efficiency");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_full_scale() {
        let cfg = PipelineConfig::preset(Scale::Full);
        assert_eq!(cfg.simulate.n, 256);
        assert_eq!(cfg.simulate.patterns, 50);
        assert_eq!(cfg.phase.replicates, 100);
        assert_eq!(cfg.phase.support_side, 31);
    }

    #[test]
    fn file_overrides_preset_fields_only() {
        let cfg = PipelineConfig::from_toml("[phase]\nreplicates = 4\nkeep_best = 2\n", Scale::Desk).unwrap();
        assert_eq!(cfg.phase.replicates, 4);
        assert_eq!(cfg.phase.hio_iters, 5000);
        assert_eq!(cfg.simulate.n, 128);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = PipelineConfig::preset(Scale::Desk);
        let back = PipelineConfig::from_toml(&cfg.to_toml().unwrap(), Scale::Full).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_sections_and_zero_patterns() {
        assert!(PipelineConfig::from_toml("[bogus]\nx = 1\n", Scale::Desk).is_err());
        let cfg = PipelineConfig::from_toml("[simulate]\npatterns = 0\n", Scale::Desk).unwrap();
        assert!(cfg.validate().is_err());
    }
}
