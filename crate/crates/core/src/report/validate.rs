use serde::Serialize;

use super::config::RunConfig;
use crate::error::Error;
use crate::volume::{load_manifest, load_volume};

/// Manifest and geometry audit.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub scans: usize,
    pub volumes_checked: usize,
    /// Fatal: the manifest cannot be evaluated as configured.
    pub problems: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Load the manifest, resolve the configuration, and read every listed
/// volume checking codes and geometry against its ground truth.
pub fn validate(config: &RunConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let manifest = match load_manifest(&config.manifest) {
        Ok(m) => m,
        Err(Error::ManifestValidation(list)) => {
            report.problems = list;
            return report;
        }
        Err(e) => {
            report.problems.push(e.to_string());
            return report;
        }
    };
    report.scans = manifest.scans.len();
    let plan = match config.plan(&manifest) {
        Ok(p) => Some(p),
        Err(Error::ManifestValidation(list)) => {
            report.problems.extend(list);
            None
        }
        Err(e) => {
            report.problems.push(e.to_string());
            None
        }
    };
    for subject in manifest.unpaired_followups() {
        report.warnings.push(format!("{subject}: year-1 scan without a baseline scan"));
    }
    if let Some(plan) = &plan {
        if manifest.scans_in(&plan.splits).next().is_none() {
            report.problems.push("no scans in the selected splits".into());
        }
    }
    for scan in &manifest.scans {
        let gt = match load_volume(&scan.ground_truth_path, None) {
            Ok(v) => v,
            Err(e) => {
                report.problems.push(format!("{}: ground truth: {e}", scan.scan_id()));
                continue;
            }
        };
        report.volumes_checked += 1;
        for (model, path) in &scan.prediction_paths {
            report.volumes_checked += 1;
            match load_volume(path, None) {
                Ok(v) => {
                    if let Err(e) = v.check_geometry(&gt) {
                        report.problems.push(format!("{} / {model}: {e}", scan.scan_id()));
                    }
                }
                Err(e) => report.problems.push(format!("{} / {model}: {e}", scan.scan_id())),
            }
        }
        if let Some(plan) = &plan {
            for model in &plan.models {
                if !scan.prediction_paths.contains_key(model) {
                    report.warnings.push(format!("{}: no prediction for model {model:?}", scan.scan_id()));
                }
            }
        }
    }
    report
}
