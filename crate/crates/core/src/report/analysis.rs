use std::collections::BTreeMap;

use serde::Serialize;

use super::table::{Metric, MetricTable};
use crate::error::{Error, Result};
use crate::stats::{dunn_posthoc, kruskal_wallis, pearson, KwResult, Strength, ALPHA};
use crate::thickness::{bland_altman, BlandAltman};
use crate::volume::{Timepoint, Tissue};

/// A result or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Outcome<T> {
    Ok(T),
    Err { error: String },
}

impl<T> From<Result<T>> for Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Err { error: e.to_string() },
        }
    }
}

impl<T> Outcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Err { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedDunnPair {
    pub a: String,
    pub b: String,
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub tissue: Tissue,
    pub metric: Metric,
    pub models: Vec<String>,
    pub alpha: f64,
    pub kruskal_wallis: KwResult,
    pub significant: bool,
    pub comparisons: usize,
    pub dunn: Vec<NamedDunnPair>,
}

/// Kruskal–Wallis across models' per-scan values, then Dunn with Bonferroni.
pub fn run_compare(table: &MetricTable, metric: Metric, tissue: Tissue, models: &[String]) -> Result<Comparison> {
    if models.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: models.len(),
        });
    }
    let groups: Vec<Vec<f64>> = models.iter().map(|m| table.values(m, tissue, metric)).collect();
    if let Some((m, _)) = models.iter().zip(&groups).find(|(_, g)| g.is_empty()) {
        return Err(Error::InvalidInput(format!("model {m:?} has no {metric} values for {tissue}")));
    }
    let kw = kruskal_wallis(&groups)?;
    let dunn = dunn_posthoc(&groups)?;
    Ok(Comparison {
        tissue,
        metric,
        models: models.to_vec(),
        alpha: ALPHA,
        significant: kw.significant(),
        kruskal_wallis: kw,
        comparisons: dunn.comparisons,
        dunn: dunn
            .pairs
            .iter()
            .map(|p| NamedDunnPair {
                a: models[p.i].clone(),
                b: models[p.j].clone(),
                z: p.z,
                p_raw: p.p_raw,
                p_adjusted: p.p_adjusted,
                significant: p.significant(),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonEntry {
    pub tissue: Tissue,
    pub metric: Metric,
    #[serde(flatten)]
    pub result: Outcome<Comparison>,
}

/// Every pixel-wise metric (and thickness error on cartilage) per tissue.
pub fn run_compare_all(table: &MetricTable, models: &[String]) -> Vec<ComparisonEntry> {
    let mut out = Vec::new();
    for tissue in Tissue::ALL {
        for metric in Metric::PIXELWISE.into_iter().chain([Metric::ThicknessErrorMm]) {
            if !metric.applies_to(tissue) {
                continue;
            }
            out.push(ComparisonEntry {
                tissue,
                metric,
                result: run_compare(table, metric, tissue, models).into(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThicknessAgreement {
    pub tissue: Tissue,
    pub model: String,
    /// Signed per-scan differences, prediction − ground truth.
    pub per_scan: Outcome<BlandAltman>,
    /// Per-subject (Δprediction − Δground truth), Δ = year1 − baseline.
    pub longitudinal: Outcome<BlandAltman>,
    /// Subjects without both timepoints.
    pub skipped_subjects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PixelwiseCorrelation {
    pub tissue: Tissue,
    pub metric: Metric,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strength: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThicknessReport {
    pub agreement: Vec<ThicknessAgreement>,
    pub correlations: Vec<PixelwiseCorrelation>,
}

fn longitudinal_differences(table: &MetricTable, model: &str, tissue: Tissue) -> (Vec<f64>, Vec<String>) {
    let mut by_subject: BTreeMap<&str, [Option<(f64, f64)>; 2]> = BTreeMap::new();
    for r in table.select(model, tissue, Metric::ThicknessMm) {
        let gt = table.get(model, &r.subject_id, r.timepoint, tissue, Metric::GtThicknessMm);
        let slot = match r.timepoint {
            Timepoint::Baseline => 0,
            Timepoint::Year1 => 1,
        };
        by_subject.entry(&r.subject_id).or_default()[slot] = gt.map(|g| (r.value, g));
    }
    let mut diffs = Vec::new();
    let mut skipped = Vec::new();
    for (subject, pair) in by_subject {
        match pair {
            [Some((p0, g0)), Some((p1, g1))] => diffs.push((p1 - p0) - (g1 - g0)),
            _ => skipped.push(subject.to_string()),
        }
    }
    (diffs, skipped)
}

/// Bland–Altman per model and Pearson of each pixel-wise metric against
/// thickness error, pooled over (non-diagnostic model, scan) pairs.
pub fn run_thickness_agreement(table: &MetricTable, tissue: Tissue, models: &[String], pooled: &[String]) -> Result<ThicknessReport> {
    if !tissue.is_cartilage() {
        return Err(Error::ThicknessUndefined("thickness is not computed for the meniscus"));
    }
    let mut agreement = Vec::new();
    for model in models {
        let diffs = table.values(model, tissue, Metric::ThicknessDiffMm);
        let (long, skipped) = longitudinal_differences(table, model, tissue);
        if !skipped.is_empty() {
            log::warn!("{model} / {tissue}: no longitudinal pair for {}", skipped.join(", "));
        }
        agreement.push(ThicknessAgreement {
            tissue,
            model: model.clone(),
            per_scan: bland_altman(&diffs).into(),
            longitudinal: bland_altman(&long).into(),
            skipped_subjects: skipped,
        });
    }
    let mut correlations = Vec::new();
    for metric in Metric::PIXELWISE {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for model in pooled {
            for r in table.select(model, tissue, metric) {
                if let Some(e) = table.get(model, &r.subject_id, r.timepoint, tissue, Metric::ThicknessErrorMm) {
                    x.push(r.value);
                    y.push(e);
                }
            }
        }
        let n = x.len();
        correlations.push(match pearson(&x, &y) {
            Ok(p) => PixelwiseCorrelation {
                tissue,
                metric,
                n,
                r: Some(p.r),
                strength: Some(Strength::from_r(p.r).label()),
                error: None,
            },
            Err(e) => PixelwiseCorrelation {
                tissue,
                metric,
                n,
                r: None,
                strength: None,
                error: Some(e.to_string()),
            },
        });
    }
    Ok(ThicknessReport { agreement, correlations })
}
