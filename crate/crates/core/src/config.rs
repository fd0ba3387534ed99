//! Experiment configuration.

use serde::{Deserialize, Serialize};

use crate::classifier::MlpConfig;
use crate::iforest::ForestConfig;
use crate::{Error, Result};

pub const DEFAULT_FRACTIONS: [f64; 5] = [0.05, 0.10, 0.15, 0.20, 0.30];

/// Everything a pipeline run or sweep depends on.
///
/// Component seeds are derived from `master_seed`; the `seed` fields inside
/// `forest` and `classifier` only matter when those components are used on
/// their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    /// Fraction of `positive_class` kept labeled by a single PU split.
    pub positive_fraction: f64,
    /// Which ground-truth class plays the positive-labeled role.
    pub positive_class: u8,
    pub folds: usize,
    /// Fractions evaluated by a sweep.
    pub fractions: Vec<f64>,
    pub forest: ForestConfig,
    pub classifier: MlpConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 0,
            positive_fraction: 0.1,
            positive_class: 1,
            folds: 5,
            fractions: DEFAULT_FRACTIONS.to_vec(),
            forest: ForestConfig::default(),
            classifier: MlpConfig::default(),
        }
    }
}

fn check_fraction(name: &str, f: f64) -> Result<()> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be in (0, 1], got {f}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        check_fraction("positive_fraction", self.positive_fraction)?;
        for &f in &self.fractions {
            check_fraction("fractions entry", f)?;
        }
        if self.positive_class > 1 {
            return Err(Error::Config(format!(
                "positive_class must be 0 or 1, got {}",
                self.positive_class
            )));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        self.forest.validate()?;
        self.classifier.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = RunConfig::from_json(r#"{"master_seed": 9, "forest": {"n_estimators": 10}}"#)
            .unwrap();
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.forest.n_estimators, 10);
        assert_eq!(cfg.forest.subsample_size, 256);
        assert_eq!(cfg.classifier.hidden_sizes, [256, 128]);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"sed": 1}"#), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_json(r#"{"folds": 1}"#), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::from_json(r#"{"fractions": [0.0]}"#),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_json(r#"{"classifier": {"dropout_rate": 1.0}}"#),
            Err(Error::Config(_))
        ));
    }
}
