//! Shaping parameters shared by segmentation, potential estimation, shaping,
//! and redistribution.
//!
//! Configs merge in three layers: compiled defaults, then a flat TOML file,
//! then explicit overrides (the CLI maps flags onto [`ConfigPatch`]). A
//! merged config is validated once with [`ShapingConfig::validate`]; every
//! consumer may then assume the documented ranges hold.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::Error;

/// All tunable parameters of the advantage pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingConfig {
    /// Shaping coefficient. Must stay below 0.5 so a correct trajectory
    /// always out-earns an incorrect one (worst correct total is 1 - alpha,
    /// best incorrect total is alpha).
    pub alpha: f64,
    /// Discount floor reached once a segment is l_ref tokens or longer.
    pub gamma_min: f64,
    /// Reference segment length in tokens; the discount falls linearly from
    /// 1 at length 0 to gamma_min at l_ref and is clamped beyond.
    pub l_ref: u32,
    /// Number of segments a trajectory is cut into.
    pub k_segments: usize,
    /// Rollouts per boundary; potentials live on the 1/m grid.
    pub m_rollouts: usize,
    /// Entropy threshold in nats for boundary candidates. No universal value
    /// exists; the default suits the simulator's two-level entropy scheme and
    /// real token streams need their own calibration.
    pub tau: f64,
    /// Strength of entropy-proportional token weighting.
    pub beta: f64,
    /// Lower clip for token weights.
    pub delta_min: f64,
    /// Upper clip for token weights.
    pub delta_max: f64,
    /// Stabilizer added to the entropy standard deviation.
    pub epsilon: f64,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        ShapingConfig {
            alpha: 0.3,
            gamma_min: 0.9,
            l_ref: 512,
            k_segments: 8,
            m_rollouts: 8,
            tau: 1.0,
            beta: 0.5,
            delta_min: 0.5,
            delta_max: 1.5,
            epsilon: 1e-6,
        }
    }
}

/// Partial config: every field optional, used for file and CLI overlays.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub alpha: Option<f64>,
    pub gamma_min: Option<f64>,
    pub l_ref: Option<u32>,
    pub k_segments: Option<usize>,
    pub m_rollouts: Option<usize>,
    pub tau: Option<f64>,
    pub beta: Option<f64>,
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    pub epsilon: Option<f64>,
}

impl ConfigPatch {
    /// Parses a flat `key = value` TOML file into a patch.
    pub fn from_toml_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::ConfigFile(format!("{}: {e}", path.display())))
    }
}

impl ShapingConfig {
    /// Applies a patch on top of `self`, field by field.
    pub fn overlaid(mut self, patch: &ConfigPatch) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = patch.$f { self.$f = v; } )* };
        }
        take!(alpha, gamma_min, l_ref, k_segments, m_rollouts, tau, beta, delta_min, delta_max, epsilon);
        self
    }

    /// Defaults overlaid with a TOML file.
    pub fn from_toml_file(path: &Path) -> Result<Self, Error> {
        let cfg = ShapingConfig::default().overlaid(&ConfigPatch::from_toml_file(path)?);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every documented range. Alpha < 0.5 is load-bearing, not a
    /// style preference: the outcome-consistency bound fails without it.
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Config(format!(
                "alpha = {} violates 0 < alpha < 0.5 (correct trajectories must out-earn incorrect ones)",
                self.alpha
            )));
        }
        if !(self.gamma_min > 0.0 && self.gamma_min < 1.0) {
            return Err(Error::Config(format!("gamma_min = {} outside (0, 1)", self.gamma_min)));
        }
        if self.l_ref == 0 {
            return Err(Error::Config("l_ref must be positive".into()));
        }
        if self.k_segments == 0 {
            return Err(Error::Config("k_segments must be positive".into()));
        }
        if self.m_rollouts == 0 {
            return Err(Error::Config("m_rollouts must be positive".into()));
        }
        if !self.tau.is_finite() {
            return Err(Error::Config(format!("tau = {} is not finite", self.tau)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta = {} must be finite and >= 0", self.beta)));
        }
        if !(self.delta_min > 0.0 && self.delta_min <= 1.0 && self.delta_max >= 1.0) {
            return Err(Error::Config(format!(
                "weight clips must satisfy 0 < delta_min <= 1 <= delta_max, got [{}, {}]",
                self.delta_min, self.delta_max
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon = {} must be positive", self.epsilon)));
        }
        Ok(())
    }
}
