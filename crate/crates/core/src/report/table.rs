use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Timepoint, Tissue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Dice,
    Voe,
    AssdMm,
    /// Per-scan coefficient of variation; aggregated as RMS.
    Cv,
    VolumeMm3,
    GtVolumeMm3,
    ThicknessMm,
    GtThicknessMm,
    /// `|thickness(pred) − thickness(gt)|`
    ThicknessErrorMm,
    /// `thickness(pred) − thickness(gt)`
    ThicknessDiffMm,
}

/// Which direction of a metric is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Better {
    Higher,
    Lower,
}

impl Metric {
    pub const ALL: [Metric; 10] = [
        Metric::Dice,
        Metric::Voe,
        Metric::AssdMm,
        Metric::Cv,
        Metric::VolumeMm3,
        Metric::GtVolumeMm3,
        Metric::ThicknessMm,
        Metric::GtThicknessMm,
        Metric::ThicknessErrorMm,
        Metric::ThicknessDiffMm,
    ];

    /// Pixel-wise metrics compared across models and correlated with thickness error.
    pub const PIXELWISE: [Metric; 4] = [Metric::Dice, Metric::Voe, Metric::Cv, Metric::AssdMm];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Dice => "dice",
            Metric::Voe => "voe",
            Metric::AssdMm => "assd_mm",
            Metric::Cv => "cv",
            Metric::VolumeMm3 => "volume_mm3",
            Metric::GtVolumeMm3 => "gt_volume_mm3",
            Metric::ThicknessMm => "thickness_mm",
            Metric::GtThicknessMm => "gt_thickness_mm",
            Metric::ThicknessErrorMm => "thickness_error_mm",
            Metric::ThicknessDiffMm => "thickness_diff_mm",
        }
    }

    pub fn better(self) -> Option<Better> {
        match self {
            Metric::Dice => Some(Better::Higher),
            Metric::Voe | Metric::AssdMm | Metric::Cv | Metric::ThicknessErrorMm => Some(Better::Lower),
            _ => None,
        }
    }

    pub fn applies_to(self, tissue: Tissue) -> bool {
        match self {
            Metric::ThicknessMm | Metric::GtThicknessMm | Metric::ThicknessErrorMm | Metric::ThicknessDiffMm => {
                tissue.is_cartilage()
            }
            _ => true,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub model: String,
    pub subject_id: String,
    pub timepoint: Timepoint,
    pub tissue: Tissue,
    pub metric: Metric,
    pub value: f64,
}

type RecordKey<'a> = (&'a str, &'a str, Timepoint, Tissue, Metric);

impl MetricRecord {
    fn key(&self) -> RecordKey<'_> {
        (&self.model, &self.subject_id, self.timepoint, self.tissue, self.metric)
    }
}

/// Long-format records sorted by model, subject, timepoint, tissue, metric.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricTable {
    records: Vec<MetricRecord>,
}

pub const CSV_HEADER: &str = "model,subject_id,timepoint,tissue,metric,value";

impl MetricTable {
    /// Sorts the records; duplicate keys are an error.
    pub fn new(mut records: Vec<MetricRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.key().cmp(&b.key()));
        if let Some(w) = records.windows(2).find(|w| w[0].key() == w[1].key()) {
            let r = &w[0];
            return Err(Error::InvalidInput(format!(
                "duplicate record {}/{}/{}/{}/{}",
                r.model, r.subject_id, r.timepoint, r.tissue, r.metric
            )));
        }
        if let Some(r) = records.iter().find(|r| !r.value.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value for {}/{}/{}/{}/{}",
                r.model, r.subject_id, r.timepoint, r.tissue, r.metric
            )));
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[MetricRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Models present, sorted.
    pub fn models(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.model.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    /// Records for one model, tissue and metric, in scan order.
    pub fn select<'a>(
        &'a self,
        model: &'a str,
        tissue: Tissue,
        metric: Metric,
    ) -> impl Iterator<Item = &'a MetricRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.model == model && r.tissue == tissue && r.metric == metric)
    }

    pub fn values(&self, model: &str, tissue: Tissue, metric: Metric) -> Vec<f64> {
        self.select(model, tissue, metric).map(|r| r.value).collect()
    }

    pub fn get(&self, model: &str, subject_id: &str, timepoint: Timepoint, tissue: Tissue, metric: Metric) -> Option<f64> {
        let key = (model, subject_id, timepoint, tissue, metric);
        self.records
            .binary_search_by(|r| r.key().cmp(&key))
            .ok()
            .map(|i| self.records[i].value)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                quote(&r.model),
                quote(&r.subject_id),
                r.timepoint,
                r.tissue,
                r.metric,
                r.value
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
        if header.join(",") != CSV_HEADER {
            return Err(Error::MalformedHeader {
                format: "metrics CSV",
                reason: format!("expected columns {CSV_HEADER}, got {}", header.join(",")),
            });
        }
        let mut records = Vec::new();
        for rec in reader.deserialize::<MetricRecord>() {
            records.push(rec?);
        }
        Self::new(records)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
