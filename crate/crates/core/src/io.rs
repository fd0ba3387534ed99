//! Feature files: CSV and the binary `PUFV` format.
//!
//! `PUFV` layout, little-endian, no padding:
//!
//! | bytes    | content                                  |
//! |----------|------------------------------------------|
//! | 4        | magic `50 55 46 56` (`"PUFV"`)           |
//! | 4        | version, `u32` = 1                       |
//! | 8        | `n`, `u64`                               |
//! | 8        | `d`, `u64`                               |
//! | 1        | label flag, 0 or 1                       |
//! | 4·n·d    | features, `f32`, row-major               |
//! | n        | labels, `i8` in {−1, 0, 1} (flag = 1)    |
//!
//! CSV rows are `id,label,f0,…,f{d-1}` with an optional header line of the
//! same shape.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabeledDataset, PuDataset, SampleLabel};
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PUFV";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Csv,
    Pufv,
}

impl FileFormat {
    /// Guesses the format from a file extension; anything but `.csv` is `PUFV`.
    pub fn from_path(path: &Path) -> FileFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => FileFormat::Csv,
            _ => FileFormat::Pufv,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            FileFormat::Csv => "csv",
            FileFormat::Pufv => "pufv",
        }
    }
}

impl FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(FileFormat::Csv),
            "pufv" | "binary" => Ok(FileFormat::Pufv),
            other => Err(Error::Argument(format!("unknown file format `{other}`"))),
        }
    }
}

impl fmt::Display for FileFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

/// The contents of a feature file: features plus optional three-valued labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub features: FeatureMatrix,
    pub labels: Option<Vec<SampleLabel>>,
}

/// A feature file viewed as positive-unlabeled data.
#[derive(Debug, Clone, PartialEq)]
pub struct PuView {
    /// Rows labeled 1 become `positives`; rows labeled −1 become `unlabeled`.
    pub dataset: PuDataset,
    /// Rows explicitly labeled 0. The PU pipeline does not use them.
    pub labeled_negatives: FeatureMatrix,
}

impl FeatureFile {
    pub fn n(&self) -> usize {
        self.features.n()
    }

    /// Requires every row to carry a 0/1 label.
    pub fn into_labeled(self) -> Result<LabeledDataset> {
        let labels = self
            .labels
            .ok_or_else(|| Error::format(None, "file has no labels"))?;
        let mut out = Vec::with_capacity(labels.len());
        for (i, l) in labels.into_iter().enumerate() {
            match l {
                SampleLabel::Positive => out.push(1),
                SampleLabel::Negative => out.push(0),
                SampleLabel::Unlabeled => {
                    return Err(Error::format(Some(i), "unlabeled row in a labeled dataset"))
                }
            }
        }
        LabeledDataset::new(self.features, out)
    }

    /// Routes labeled-positive rows to P and unlabeled rows to U.
    pub fn into_pu(self) -> Result<PuView> {
        let labels = self
            .labels
            .ok_or_else(|| Error::format(None, "file has no labels"))?;
        let pick = |want: SampleLabel| -> Vec<usize> {
            (0..labels.len()).filter(|&i| labels[i] == want).collect()
        };
        let dataset = PuDataset::new(
            self.features.select(&pick(SampleLabel::Positive)),
            self.features.select(&pick(SampleLabel::Unlabeled)),
            None,
        )?;
        Ok(PuView {
            dataset,
            labeled_negatives: self.features.select(&pick(SampleLabel::Negative)),
        })
    }

    /// Positives labeled 1 followed by the unlabeled pool labeled −1.
    pub fn from_pu(pu: &PuDataset) -> Result<FeatureFile> {
        let features = pu.positives.concat(&pu.unlabeled)?;
        let mut labels = vec![SampleLabel::Positive; pu.positives.n()];
        labels.extend(std::iter::repeat_n(SampleLabel::Unlabeled, pu.unlabeled.n()));
        Ok(FeatureFile {
            features,
            labels: Some(labels),
        })
    }

    pub fn unlabeled(features: FeatureMatrix) -> FeatureFile {
        FeatureFile {
            features,
            labels: None,
        }
    }
}

impl From<LabeledDataset> for FeatureFile {
    fn from(ds: LabeledDataset) -> Self {
        FeatureFile {
            features: ds.features,
            labels: Some(ds.labels.into_iter().map(SampleLabel::from_class).collect()),
        }
    }
}

pub fn load_feature_file(path: impl AsRef<Path>, format: FileFormat) -> Result<FeatureFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        FileFormat::Pufv => decode_pufv(&bytes),
        FileFormat::Csv => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|e| Error::format(None, format!("not UTF-8: {e}")))?;
            parse_csv(text)
        }
    }
}

pub fn save_feature_file(
    file: &FeatureFile,
    path: impl AsRef<Path>,
    format: FileFormat,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        FileFormat::Pufv => encode_pufv(file),
        FileFormat::Csv => render_csv(file).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_pufv(file: &FeatureFile) -> Vec<u8> {
    let m = &file.features;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.as_slice().len() + m.n());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.n() as u64).to_le_bytes());
    out.extend_from_slice(&(m.d() as u64).to_le_bytes());
    out.push(u8::from(file.labels.is_some()));
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(labels) = &file.labels {
        out.extend(labels.iter().map(|l| l.code() as u8));
    }
    out
}

pub fn decode_pufv(bytes: &[u8]) -> Result<FeatureFile> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(None, "truncated header"));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::format(None, "bad magic, expected PUFV"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(None, format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let d = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let flag = bytes[24];
    if flag > 1 {
        return Err(Error::format(None, format!("label flag must be 0 or 1, got {flag}")));
    }
    if d == 0 {
        return Err(Error::format(None, "feature dimension is 0"));
    }
    let expected = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_mul(4))
        .and_then(|b| b.checked_add(if flag == 1 { n } else { 0 }))
        .and_then(|b| b.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| Error::format(None, "header sizes overflow"))?;
    if bytes.len() as u64 != expected {
        return Err(Error::format(
            None,
            format!("expected {expected} bytes for n={n}, d={d}, found {}", bytes.len()),
        ));
    }
    let (n, d) = (n as usize, d as usize);
    let body = &bytes[HEADER_LEN..HEADER_LEN + 4 * n * d];
    let values: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let features = FeatureMatrix::new(d, values)?;
    let labels = if flag == 1 {
        let raw = &bytes[HEADER_LEN + 4 * n * d..];
        let mut labels = Vec::with_capacity(n);
        for (i, &b) in raw.iter().enumerate() {
            let code = i64::from(b as i8);
            labels.push(SampleLabel::from_code(code).ok_or_else(|| {
                Error::format(Some(i), format!("label code {code} not in {{-1, 0, 1}}"))
            })?);
        }
        Some(labels)
    } else {
        None
    };
    Ok(FeatureFile { features, labels })
}

pub fn render_csv(file: &FeatureFile) -> String {
    let m = &file.features;
    let mut out = String::from("id,label");
    for j in 0..m.d() {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for (i, row) in m.rows().enumerate() {
        let code = file.labels.as_ref().map_or(-1, |l| l[i].code());
        out.push_str(&format!("{i},{code}"));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<FeatureFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut d: Option<usize> = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut row = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(Some(row), e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if line == 0 && record.get(0) == Some("id") {
            if record.get(1) != Some("label") || record.len() < 3 {
                return Err(Error::format(None, "header must be id,label,f0,..."));
            }
            d = Some(record.len() - 2);
            continue;
        }
        if record.len() < 3 {
            return Err(Error::format(Some(row), "need id, label and at least one feature"));
        }
        let width = record.len() - 2;
        match d {
            None => d = Some(width),
            Some(expected) if expected != width => {
                return Err(Error::Dimension {
                    row: Some(row),
                    expected,
                    actual: width,
                })
            }
            Some(_) => {}
        }
        let code: i64 = record[1]
            .parse()
            .map_err(|_| Error::format(Some(row), format!("bad label `{}`", &record[1])))?;
        labels.push(SampleLabel::from_code(code).ok_or_else(|| {
            Error::format(Some(row), format!("label code {code} not in {{-1, 0, 1}}"))
        })?);
        for (col, field) in record.iter().skip(2).enumerate() {
            let v: f32 = field
                .parse()
                .map_err(|_| Error::format(Some(row), format!("bad number `{field}`")))?;
            if !v.is_finite() {
                return Err(Error::Value {
                    row,
                    col,
                    value: f64::from(v),
                });
            }
            values.push(v);
        }
        row += 1;
    }
    let d = d.ok_or_else(|| Error::format(None, "empty CSV without header"))?;
    Ok(FeatureFile {
        features: FeatureMatrix::new(d, values)?,
        labels: Some(labels),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_way_labels_split_into_pu_view() {
        let text = "id,label,f0,f1\n0,1,0.5,1\n1,0,2,3\n2,-1,4,5\n";
        let view = parse_csv(text).unwrap().into_pu().unwrap();
        assert_eq!(view.dataset.positives.n(), 1);
        assert_eq!(view.dataset.unlabeled.n(), 1);
        assert_eq!(view.labeled_negatives.n(), 1);
        assert_eq!(view.dataset.unlabeled.row(0), &[4.0, 5.0]);
    }

    #[test]
    fn csv_without_header_is_accepted() {
        let f = parse_csv("7,1,0.25\n8,0,1e-3\n").unwrap();
        assert_eq!((f.n(), f.features.d()), (2, 1));
        assert_eq!(f.features.row(1), &[1e-3]);
    }

    #[test]
    fn csv_errors_name_the_row() {
        let e = parse_csv("id,label,f0,f1\n0,1,1,2\n1,1,3\n").unwrap_err();
        assert!(matches!(e, Error::Dimension { row: Some(1), expected: 2, actual: 1 }));
        let e = parse_csv("0,1,1\n1,1,NaN\n").unwrap_err();
        assert!(matches!(e, Error::Value { row: 1, .. }));
        let e = parse_csv("0,2,1\n").unwrap_err();
        assert!(matches!(e, Error::Format { row: Some(0), .. }));
        let e = parse_csv("0,1,abc\n").unwrap_err();
        assert!(matches!(e, Error::Format { row: Some(0), .. }));
    }

    #[test]
    fn all_unlabeled_csv_reloads_unlabeled() {
        let m = FeatureMatrix::from_rows(2, &[[1.0f32, 2.0], [3.0, 4.0]]).unwrap();
        let text = render_csv(&FeatureFile {
            features: m,
            labels: Some(vec![SampleLabel::Unlabeled; 2]),
        });
        let back = parse_csv(&text).unwrap();
        assert!(back.labels.unwrap().iter().all(|&l| l == SampleLabel::Unlabeled));
    }

    #[test]
    fn header_only_csv_is_empty() {
        let f = parse_csv("id,label,f0,f1,f2\n").unwrap();
        assert_eq!((f.n(), f.features.d()), (0, 3));
    }

    #[test]
    fn empty_binary_keeps_dimension() {
        let file = FeatureFile::unlabeled(FeatureMatrix::empty(8).unwrap());
        let bytes = encode_pufv(&file);
        assert_eq!(bytes.len(), HEADER_LEN);
        let back = decode_pufv(&bytes).unwrap();
        assert_eq!((back.n(), back.features.d()), (0, 8));
        assert!(back.labels.is_none());
    }

    #[test]
    fn binary_header_is_bit_exact() {
        let m = FeatureMatrix::from_rows(1, &[[0.5f32]]).unwrap();
        let bytes = encode_pufv(&FeatureFile {
            features: m,
            labels: Some(vec![SampleLabel::Unlabeled]),
        });
        let mut expected = vec![0x50, 0x55, 0x46, 0x56, 1, 0, 0, 0];
        expected.extend_from_slice(&1u64.to_le_bytes());
        expected.extend_from_slice(&1u64.to_le_bytes());
        expected.push(1);
        expected.extend_from_slice(&0.5f32.to_le_bytes());
        expected.push(0xff);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn binary_rejects_deviations() {
        let m = FeatureMatrix::from_rows(2, &[[1.0f32, 2.0]]).unwrap();
        let good = encode_pufv(&FeatureFile {
            features: m,
            labels: Some(vec![SampleLabel::Positive]),
        });
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        let mut bad_version = good.clone();
        bad_version[4] = 2;
        let mut bad_flag = good.clone();
        bad_flag[24] = 2;
        let mut trailing = good.clone();
        trailing.push(0);
        let mut bad_label = good.clone();
        *bad_label.last_mut().unwrap() = 5;
        let mut nan = good.clone();
        nan[25..29].copy_from_slice(&f32::NAN.to_le_bytes());
        for bytes in [bad_magic, bad_version, bad_flag, trailing, bad_label, good[..20].to_vec()] {
            assert!(matches!(decode_pufv(&bytes), Err(Error::Format { .. })));
        }
        assert!(matches!(decode_pufv(&nan), Err(Error::Value { row: 0, col: 0, .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        let e = load_feature_file("/nonexistent/x.pufv", FileFormat::Pufv).unwrap_err();
        assert!(matches!(e, Error::Io { .. }));
        assert!(e.is_data_error());
    }
}
