use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use weakpu::data::LabeledDataset;
use weakpu::io::{load_feature_file, FileFormat};
use weakpu::synth::{gen_blobs, gen_planted_anomalies, BlobSpec, PlantedAnomalySpec};
use weakpu::RunConfig;

use crate::CliError;

/// Where experiment data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    File {
        path: PathBuf,
        #[serde(default)]
        format: Option<FileFormat>,
    },
    Blobs(BlobSpec),
    Anomalies(PlantedAnomalySpec),
}

impl DataSource {
    /// The default synthetic set for `--synth`, seeded from the master seed.
    pub fn synth(kind: &str, seed: u64) -> Result<Self, CliError> {
        match kind {
            "blobs" => Ok(DataSource::Blobs(BlobSpec {
                n_per_class: 500,
                d: 20,
                separation: 8.0,
                seed,
            })),
            "anomalies" => Ok(DataSource::Anomalies(PlantedAnomalySpec::new(1000, 50, 8, seed))),
            other => Err(CliError::config(format!(
                "unknown synthetic dataset `{other}` (expected blobs or anomalies)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            DataSource::File { .. } => Ok(()),
            DataSource::Blobs(s) => {
                if s.n_per_class < 1 || s.d < 1 || !(s.separation >= 0.0 && s.separation.is_finite()) {
                    return Err(CliError::config(
                        "blobs need n_per_class >= 1, d >= 1 and a finite separation >= 0",
                    ));
                }
                Ok(())
            }
            DataSource::Anomalies(s) => {
                if s.n_inliers < 1 || s.d < 1 {
                    return Err(CliError::config("anomalies need n_inliers >= 1 and d >= 1"));
                }
                if !(s.r_min > 3.0 && s.r_max >= s.r_min && s.r_max.is_finite()) {
                    return Err(CliError::config("anomalies need 3 < r_min <= r_max"));
                }
                Ok(())
            }
        }
    }

    /// Loads or generates the labeled dataset. Planted anomalies are
    /// labeled 1 for inliers and 0 for outliers.
    pub fn load(&self) -> Result<LabeledDataset, CliError> {
        self.validate()?;
        match self {
            DataSource::File { path, format } => {
                let format = format.unwrap_or_else(|| FileFormat::from_path(path));
                Ok(load_feature_file(path, format)?.into_labeled()?)
            }
            DataSource::Blobs(spec) => Ok(gen_blobs(spec)),
            DataSource::Anomalies(spec) => {
                let (features, outlier) = gen_planted_anomalies(spec);
                let labels = outlier.iter().map(|&o| u8::from(!o)).collect();
                Ok(LabeledDataset::new(features, labels)?)
            }
        }
    }
}

/// A JSON document holding every `RunConfig` key plus an optional `data`
/// entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub run: RunConfig,
    pub data: Option<DataSource>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| CliError::config("config: top level must be an object"))?;
        let data = obj
            .remove("data")
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| CliError::config(format!("config data: {e}")))?;
        let run: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::config(format!("config: {e}")))?;
        Ok(ConfigFile { run, data })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_entry_is_split_off() {
        let cfg = ConfigFile::parse(
            r#"{"master_seed": 3, "data": {"blobs": {"n_per_class": 5, "d": 2, "separation": 1.0, "seed": 1}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.run.master_seed, 3);
        assert!(matches!(cfg.data, Some(DataSource::Blobs(BlobSpec { n_per_class: 5, .. }))));
    }

    #[test]
    fn file_source_with_format() {
        let cfg = ConfigFile::parse(r#"{"data": {"file": {"path": "x.csv", "format": "csv"}}}"#)
            .unwrap();
        assert_eq!(
            cfg.data,
            Some(DataSource::File {
                path: "x.csv".into(),
                format: Some(FileFormat::Csv)
            })
        );
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        for text in [r#"{"seeed": 1}"#, r#"{"data": {"http": {}}}"#, "[1]", "{"] {
            assert_eq!(ConfigFile::parse(text).unwrap_err().code, 1, "{text}");
        }
    }
}
