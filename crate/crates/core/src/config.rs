//! Scenario constants and the flat `key = value` config file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{db_to_linear, dbm_to_watts};

/// All constants of one scenario, in linear units (watts, linear gains).
///
/// Every user shares the same noise, efficiency and threshold values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_antennas: usize,
    pub num_elements: usize,
    pub bs_position: [f64; 3],
    pub irs_position: [f64; 3],
    pub user_radius: f64,
    pub noise_antenna_var: f64,
    pub noise_id_var: f64,
    pub eh_efficiency: f64,
    pub sinr_threshold: f64,
    pub energy_threshold: f64,
    pub path_loss_ref: f64,
    /// BS to user.
    pub exponent_direct: f64,
    /// BS to IRS.
    pub exponent_bs_irs: f64,
    /// IRS to user.
    pub exponent_irs_user: f64,
    /// Rician factor of the BS to IRS link.
    pub rician_bs_irs: f64,
    /// Rician factor of the IRS to user links.
    pub rician_irs_user: f64,
    pub element_spacing_ratio: f64,
    pub randomization_count: usize,
    pub convergence_eps: f64,
    pub max_iters: usize,
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_users: 4,
            num_antennas: 4,
            num_elements: 30,
            bs_position: [0.0, 0.0, 15.0],
            irs_position: [50.0, 50.0, 15.0],
            user_radius: 200.0,
            noise_antenna_var: dbm_to_watts(-70.0),
            noise_id_var: dbm_to_watts(-50.0),
            eh_efficiency: 0.7,
            sinr_threshold: db_to_linear(10.0),
            energy_threshold: dbm_to_watts(-10.0),
            path_loss_ref: db_to_linear(-30.0),
            exponent_direct: 3.0,
            exponent_bs_irs: 2.2,
            exponent_irs_user: 2.5,
            rician_bs_irs: db_to_linear(3.0),
            rician_irs_user: db_to_linear(3.0),
            element_spacing_ratio: 0.5,
            randomization_count: 1000,
            convergence_eps: 1e-3,
            max_iters: 50,
            rng_seed: 1,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.num_users == 0 {
            return bad("num_users must be at least 1");
        }
        if self.num_antennas == 0 {
            return bad("num_antennas must be at least 1");
        }
        let positive = [
            ("noise_antenna_var", self.noise_antenna_var),
            ("noise_id_var", self.noise_id_var),
            ("sinr_threshold", self.sinr_threshold),
            ("energy_threshold", self.energy_threshold),
            ("path_loss_ref", self.path_loss_ref),
            ("convergence_eps", self.convergence_eps),
            ("user_radius", self.user_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.eh_efficiency > 0.0 && self.eh_efficiency <= 1.0) {
            return bad("eh_efficiency must lie in (0, 1]");
        }
        if self.rician_bs_irs < 0.0 || self.rician_irs_user < 0.0 {
            return bad("rician factors must be non-negative");
        }
        if self.randomization_count == 0 {
            return bad("randomization_count must be at least 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        let all_finite = self
            .bs_position
            .iter()
            .chain(self.irs_position.iter())
            .chain([
                self.exponent_direct,
                self.exponent_bs_irs,
                self.exponent_irs_user,
                self.element_spacing_ratio,
            ]
            .iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return bad("positions, exponents and spacing must be finite");
        }
        Ok(())
    }

    /// Parses the flat `key = value` format. Keys are the field names; any
    /// key left out keeps its default value, unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(&with_defaults(text)?)
            .map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Copy with the IRS removed.
    pub fn without_irs(&self) -> Self {
        Self {
            num_elements: 0,
            ..self.clone()
        }
    }

    /// A_k = σ² + δ²/ρ, the effective noise seen by the information decoder
    /// once divided by ρ.
    pub fn decoder_noise(&self, rho: f64) -> f64 {
        self.noise_antenna_var + self.noise_id_var / rho
    }
}

// Merge user keys over the serialized defaults so partial files are accepted
// while `deny_unknown_fields` still catches typos.
fn with_defaults(text: &str) -> Result<String> {
    let user: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let mut base: toml::Table = toml::Table::try_from(SystemConfig::default())
        .map_err(|e| Error::Config(e.to_string()))?;
    for (k, v) in user {
        base.insert(k, v);
    }
    toml::to_string(&base).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_simulation_table() {
        let c = SystemConfig::default();
        assert_eq!((c.num_users, c.num_antennas, c.num_elements), (4, 4, 30));
        assert!((c.noise_antenna_var - 1e-10).abs() < 1e-22);
        assert!((c.noise_id_var - 1e-8).abs() < 1e-20);
        assert!((c.path_loss_ref - 1e-3).abs() < 1e-15);
        assert_eq!(c.eh_efficiency, 0.7);
        assert_eq!(c.convergence_eps, 1e-3);
        assert_eq!(c.randomization_count, 1000);
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = SystemConfig::from_toml_str("num_users = 2\n# comment\nsinr_threshold = 3.5\n").unwrap();
        assert_eq!(c.num_users, 2);
        assert_eq!(c.sinr_threshold, 3.5);
        assert_eq!(c.num_antennas, 4);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = SystemConfig::from_toml_str("num_user = 2\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(SystemConfig::from_toml_str("num_users = 0").is_err());
        assert!(SystemConfig::from_toml_str("eh_efficiency = 1.5").is_err());
        assert!(SystemConfig::from_toml_str("noise_id_var = 0.0").is_err());
    }

    #[test]
    fn round_trip() {
        let c = SystemConfig { num_elements: 7, rng_seed: 99, ..Default::default() };
        let back = SystemConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, back);
    }
}
