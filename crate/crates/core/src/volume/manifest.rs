//! Dataset manifests (CSV or JSON).
//!
//! CSV columns: `subject_id, timepoint, split, ground_truth_path,
//! model:<name>..., kl_grade, bmi, age, sex`. A leading comment line
//! `# through_plane_axis: x|y|z` declares the medial–lateral axis (z when
//! absent). The JSON form is either an array of row objects with the same
//! keys, or `{"through_plane_axis": "z", "scans": [...]}`.
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Axis, Timepoint};
use crate::error::{Error, Result};

const MODEL_PREFIX: &str = "model:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidInput(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Sex::Male),
            "female" | "f" => Ok(Sex::Female),
            other => Err(Error::InvalidInput(format!("unknown sex {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub subject_id: String,
    pub timepoint: Timepoint,
    pub split: Split,
    pub ground_truth_path: PathBuf,
    /// Model name to prediction path, ordered by name.
    pub prediction_paths: BTreeMap<String, PathBuf>,
    pub kl_grade: Option<u8>,
    pub bmi: Option<f64>,
    pub age: Option<f64>,
    pub sex: Option<Sex>,
}

impl ScanRecord {
    /// `subject/timepoint`, used in logs and exclusion reports.
    pub fn scan_id(&self) -> String {
        format!("{}/{}", self.subject_id, self.timepoint)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetManifest {
    pub scans: Vec<ScanRecord>,
    /// Codes the label maps may contain; fixed to 0..=4.
    pub label_alphabet: Vec<u8>,
    pub through_plane_axis: Axis,
    /// Model names across all rows, sorted.
    pub models: Vec<String>,
}

impl DatasetManifest {
    /// Parse and validate from memory. Paths are resolved against `base_dir`
    /// and must exist.
    pub fn from_rows(rows: Vec<RawRow>, axis: Axis, base_dir: &Path) -> Result<Self> {
        let mut scans = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            scans.push(row.into_record(i + 1, base_dir)?);
        }
        let mut seen = HashSet::new();
        for (i, s) in scans.iter().enumerate() {
            if !seen.insert((s.subject_id.clone(), s.timepoint)) {
                return Err(Error::Manifest {
                    row: i + 1,
                    reason: format!("duplicate scan identity {}", s.scan_id()),
                });
            }
        }
        let mut models: Vec<String> = scans
            .iter()
            .flat_map(|s| s.prediction_paths.keys().cloned())
            .collect();
        models.sort();
        models.dedup();
        let manifest = Self {
            scans,
            label_alphabet: vec![0, 1, 2, 3, 4],
            through_plane_axis: axis,
            models,
        };
        manifest.validate_paths()?;
        Ok(manifest)
    }

    fn validate_paths(&self) -> Result<()> {
        let mut problems = Vec::new();
        for s in &self.scans {
            if !s.ground_truth_path.is_file() {
                problems.push(format!(
                    "{}: ground truth file missing: {}",
                    s.scan_id(),
                    s.ground_truth_path.display()
                ));
            }
            for (model, path) in &s.prediction_paths {
                if !path.is_file() {
                    problems.push(format!(
                        "{}: prediction for model {model:?} missing: {}",
                        s.scan_id(),
                        path.display()
                    ));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ManifestValidation(problems))
        }
    }

    /// Subjects that have a year-1 scan but no baseline scan.
    pub fn unpaired_followups(&self) -> Vec<String> {
        let baseline: HashSet<&str> = self
            .scans
            .iter()
            .filter(|s| s.timepoint == Timepoint::Baseline)
            .map(|s| s.subject_id.as_str())
            .collect();
        self.scans
            .iter()
            .filter(|s| s.timepoint == Timepoint::Year1 && !baseline.contains(s.subject_id.as_str()))
            .map(|s| s.subject_id.clone())
            .collect()
    }

    /// Error if any year-1 scan lacks its baseline.
    pub fn check_longitudinal(&self) -> Result<()> {
        let missing = self.unpaired_followups();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::ManifestValidation(
                missing
                    .into_iter()
                    .map(|s| format!("subject {s} has year1 but no baseline scan"))
                    .collect(),
            ))
        }
    }

    pub fn scans_in<'a>(&'a self, splits: &'a [Split]) -> impl Iterator<Item = &'a ScanRecord> + 'a {
        self.scans
            .iter()
            .filter(move |s| splits.is_empty() || splits.contains(&s.split))
    }

    pub fn find(&self, subject_id: &str, timepoint: Timepoint) -> Option<&ScanRecord> {
        self.scans
            .iter()
            .find(|s| s.subject_id == subject_id && s.timepoint == timepoint)
    }
}

/// One manifest row before validation; all values are raw strings.
#[derive(Debug, Clone, Default)]
pub struct RawRow(pub BTreeMap<String, String>);

impl RawRow {
    fn required(&self, key: &str, row: usize) -> Result<&str> {
        match self.0.get(key).map(|s| s.trim()) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(Error::Manifest {
                row,
                reason: format!("missing required field {key:?}"),
            }),
        }
    }

    fn optional(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|s| s.trim()).filter(|s| !s.is_empty())
    }

    fn into_record(self, row: usize, base: &Path) -> Result<ScanRecord> {
        let bad = |reason: String| Error::Manifest { row, reason };
        let subject_id = self.required("subject_id", row)?.to_string();
        let timepoint = self.required("timepoint", row)?.parse().map_err(|e: Error| bad(e.to_string()))?;
        let split = self.required("split", row)?.parse().map_err(|e: Error| bad(e.to_string()))?;
        let ground_truth_path = base.join(self.required("ground_truth_path", row)?);
        let prediction_paths = self
            .0
            .iter()
            .filter_map(|(k, v)| {
                let name = k.strip_prefix(MODEL_PREFIX)?.trim();
                let v = v.trim();
                (!v.is_empty()).then(|| (name.to_string(), base.join(v)))
            })
            .collect();
        let kl_grade = match self.optional("kl_grade") {
            None => None,
            Some(v) => match v.parse::<u8>() {
                Ok(g @ 1..=4) => Some(g),
                _ => return Err(bad(format!("kl_grade {v:?} not in 1..=4"))),
            },
        };
        let real = |key: &str| -> Result<Option<f64>> {
            self.optional(key)
                .map(|v| v.parse::<f64>().map_err(|_| bad(format!("{key} {v:?} is not a number"))))
                .transpose()
        };
        let bmi = real("bmi")?;
        let age = real("age")?;
        let sex = self
            .optional("sex")
            .map(|v| v.parse::<Sex>().map_err(|e| bad(e.to_string())))
            .transpose()?;
        Ok(ScanRecord {
            subject_id,
            timepoint,
            split,
            ground_truth_path,
            prediction_paths,
            kl_grade,
            bmi,
            age,
            sex,
        })
    }
}

fn parse_axis_comment(text: &str) -> Result<Option<Axis>> {
    for line in text.lines() {
        let line = line.trim();
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        if let Some((key, value)) = rest.split_once([':', '=']) {
            if key.trim() == "through_plane_axis" {
                return value.parse().map(Some);
            }
        }
    }
    Ok(None)
}

fn parse_csv(text: &str) -> Result<(Vec<RawRow>, Axis)> {
    let axis = parse_axis_comment(text)?.unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.deserialize::<BTreeMap<String, String>>() {
        rows.push(RawRow(rec?));
    }
    Ok((rows, axis))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonManifest {
    Rows(Vec<BTreeMap<String, serde_json::Value>>),
    Object {
        #[serde(default)]
        through_plane_axis: Option<Axis>,
        scans: Vec<BTreeMap<String, serde_json::Value>>,
    },
}

fn json_row(map: BTreeMap<String, serde_json::Value>) -> RawRow {
    RawRow(
        map.into_iter()
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Null => String::new(),
                    other => other.to_string(),
                };
                (k, s)
            })
            .collect(),
    )
}

fn parse_json(text: &str) -> Result<(Vec<RawRow>, Axis)> {
    let (rows, axis) = match serde_json::from_str::<JsonManifest>(text)? {
        JsonManifest::Rows(rows) => (rows, Axis::default()),
        JsonManifest::Object {
            through_plane_axis,
            scans,
        } => (scans, through_plane_axis.unwrap_or_default()),
    };
    Ok((rows.into_iter().map(json_row).collect(), axis))
}

/// Read and validate a manifest; `.json` selects the JSON form, anything else CSV.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let (rows, axis) = if is_json {
        parse_json(&text)?
    } else {
        parse_csv(&text)?
    };
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    DatasetManifest::from_rows(rows, axis, base)
}
