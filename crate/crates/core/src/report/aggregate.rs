use std::collections::BTreeMap;

use serde::Serialize;

use super::table::{Better, Metric, MetricTable};
use crate::error::{Error, Result};
use crate::volume::{DatasetManifest, Timepoint, Tissue};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryCell {
    pub model: String,
    pub tissue: Tissue,
    pub metric: Metric,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl_grade: Option<u8>,
    pub n: usize,
    pub mean: f64,
    /// n−1 denominator; 0 for a single value.
    pub sd: f64,
    /// Root-mean-square, reported for CV.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rms: Option<f64>,
    /// Best non-diagnostic model for this tissue, metric and stratum.
    pub best: bool,
    pub diagnostic: bool,
}

impl SummaryCell {
    /// The value ranked and reported in tables: RMS for CV, mean otherwise.
    pub fn headline(&self) -> f64 {
        self.rms.unwrap_or(self.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub cells: Vec<SummaryCell>,
}

impl Summary {
    pub fn cell(&self, model: &str, tissue: Tissue, metric: Metric) -> Option<&SummaryCell> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.tissue == tissue && c.metric == metric && c.kl_grade.is_none())
    }
}

/// KL grade per scan, from the manifest.
pub type KlGrades = BTreeMap<(String, Timepoint), u8>;

pub fn kl_grades(manifest: &DatasetManifest) -> KlGrades {
    manifest
        .scans
        .iter()
        .filter_map(|s| s.kl_grade.map(|g| ((s.subject_id.clone(), s.timepoint), g)))
        .collect()
}

fn stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn cell(model: &str, tissue: Tissue, metric: Metric, kl: Option<u8>, values: &[f64], diagnostic: bool) -> SummaryCell {
    let (mean, sd) = stats(values);
    let rms = (metric == Metric::Cv)
        .then(|| (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt());
    SummaryCell {
        model: model.to_string(),
        tissue,
        metric,
        kl_grade: kl,
        n: values.len(),
        mean,
        sd,
        rms,
        best: false,
        diagnostic,
    }
}

fn mark_best(cells: &mut [SummaryCell]) {
    let mut groups: BTreeMap<(Tissue, Metric, Option<u8>), Vec<usize>> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        if !c.diagnostic && c.metric.better().is_some() {
            groups.entry((c.tissue, c.metric, c.kl_grade)).or_default().push(i);
        }
    }
    for ((_, metric, _), idx) in groups {
        let better = metric.better().unwrap();
        let best = idx
            .iter()
            .map(|&i| cells[i].headline())
            .reduce(|a, b| match better {
                Better::Higher => a.max(b),
                Better::Lower => a.min(b),
            })
            .unwrap();
        for i in idx {
            cells[i].best = cells[i].headline() == best;
        }
    }
}

/// Mean ± sd per model × tissue × metric, RMS for CV, best model marked.
/// With `strata`, cells are also emitted per KL grade.
pub fn run_aggregate(table: &MetricTable, diagnostic: &[String], strata: Option<&KlGrades>) -> Result<Summary> {
    if table.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut groups: BTreeMap<(&str, Tissue, Metric, Option<u8>), Vec<f64>> = BTreeMap::new();
    let mut missing = Vec::new();
    for r in table.records() {
        groups
            .entry((&r.model, r.tissue, r.metric, None))
            .or_default()
            .push(r.value);
        if let Some(grades) = strata {
            match grades.get(&(r.subject_id.clone(), r.timepoint)) {
                Some(&g) => groups
                    .entry((&r.model, r.tissue, r.metric, Some(g)))
                    .or_default()
                    .push(r.value),
                None => missing.push(format!("{}_{}", r.subject_id, r.timepoint)),
            }
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::InvalidInput(format!(
            "KL-grade stratification requested but kl_grade is missing for: {}",
            missing.join(", ")
        )));
    }
    let mut cells: Vec<SummaryCell> = groups
        .into_iter()
        .map(|((model, tissue, metric, kl), values)| {
            cell(model, tissue, metric, kl, &values, diagnostic.iter().any(|d| d == model))
        })
        .collect();
    mark_best(&mut cells);
    Ok(Summary { cells })
}
