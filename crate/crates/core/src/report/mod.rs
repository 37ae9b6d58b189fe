//! Batch pipeline: manifest in, metric tables, summaries, statistics,
//! thickness agreement, depth profiles and Dice correlation out.
//!
//! Every output is a pure function of the manifest, the volumes it lists and
//! the configuration; nothing depends on the worker count or the clock.

pub mod aggregate;
pub mod analysis;
pub mod config;
pub mod pass;
pub mod svg;
pub mod table;
mod validate;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use aggregate::{kl_grades, run_aggregate, KlGrades, Summary, SummaryCell};
pub use analysis::{
    run_compare, run_compare_all, run_thickness_agreement, Comparison, ComparisonEntry, Outcome, ThicknessReport,
};
pub use config::{AssdPolicy, RunConfig, RunPlan};
pub use pass::{run_scan_pass, ConflictCount, Exclusion, PassOutputs, ScanPass};
pub use table::{Metric, MetricRecord, MetricTable};
pub use validate::{validate, ValidationReport};

use crate::droid::DepthProfile;
use crate::ensemble::EnsembleSpec;
use crate::error::{Error, Result};
use crate::overlap::DiceCorrelationMatrix;
use crate::volume::{load_manifest, DatasetManifest, Tissue};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Run provenance written next to the metric table. No timestamp is
/// recorded so that reruns are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata<'a> {
    pub tool_version: &'static str,
    pub manifest_sha256: &'a str,
    pub config: &'a RunConfig,
    pub evaluated_models: Vec<String>,
    pub diagnostic_models: Vec<String>,
    pub ensembles: &'a [EnsembleSpec],
    pub scans: usize,
}

/// A configuration bound to its loaded manifest.
#[derive(Debug, Clone)]
pub struct Session {
    pub config: RunConfig,
    pub manifest: DatasetManifest,
    pub plan: RunPlan,
    pub manifest_sha256: String,
}

impl Session {
    pub fn open(config: RunConfig) -> Result<Self> {
        let manifest = load_manifest(&config.manifest)?;
        let plan = config.plan(&manifest)?;
        let manifest_sha256 = file_sha256(&config.manifest)?;
        Ok(Self {
            config,
            manifest,
            plan,
            manifest_sha256,
        })
    }

    pub fn pass(&self, outputs: PassOutputs) -> Result<ScanPass> {
        run_scan_pass(&self.manifest, &self.plan, outputs)
    }

    /// Evaluated models that take part in ranking, statistics and pooling.
    pub fn ranked_models(&self) -> Vec<String> {
        let diagnostic = self.plan.diagnostic_models();
        self.plan
            .evaluated_models()
            .into_iter()
            .filter(|m| !diagnostic.contains(m))
            .collect()
    }

    pub fn summary(&self, table: &MetricTable) -> Result<Summary> {
        let grades = self.config.stratify_kl.then(|| kl_grades(&self.manifest));
        run_aggregate(table, &self.plan.diagnostic_models(), grades.as_ref())
    }

    pub fn stats(&self, table: &MetricTable) -> Vec<ComparisonEntry> {
        run_compare_all(table, &self.ranked_models())
    }

    pub fn thickness(&self, table: &MetricTable) -> Result<Vec<ThicknessReport>> {
        let models = self.plan.evaluated_models();
        let pooled = self.ranked_models();
        Tissue::CARTILAGE
            .iter()
            .map(|&t| run_thickness_agreement(table, t, &models, &pooled))
            .collect()
    }

    pub fn metadata(&self, scans: usize) -> RunMetadata<'_> {
        RunMetadata {
            tool_version: TOOL_VERSION,
            manifest_sha256: &self.manifest_sha256,
            config: &self.config,
            evaluated_models: self.plan.evaluated_models(),
            diagnostic_models: self.plan.diagnostic_models(),
            ensembles: &self.plan.ensembles,
            scans,
        }
    }
}

#[derive(Serialize)]
struct ExclusionsFile<'a> {
    exclusions: &'a [Exclusion],
    correlation_skipped_scans: &'a [String],
}

#[derive(Serialize)]
struct EnsemblesFile<'a> {
    ensembles: &'a [EnsembleSpec],
    conflicts: &'a [ConflictCount],
}

#[derive(Serialize)]
struct StatsFile<'a> {
    alpha: f64,
    comparisons: &'a [ComparisonEntry],
}

/// Writes the output files into one directory.
#[derive(Debug, Clone)]
pub struct OutputWriter {
    dir: PathBuf,
}

impl OutputWriter {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(name, &text)
    }

    pub fn metrics(&self, table: &MetricTable) -> Result<PathBuf> {
        self.text("metrics.csv", &table.to_csv())
    }

    pub fn run_metadata(&self, meta: &RunMetadata) -> Result<PathBuf> {
        self.json("run.json", meta)
    }

    pub fn exclusions(&self, pass: &ScanPass) -> Result<PathBuf> {
        self.json(
            "exclusions.json",
            &ExclusionsFile {
                exclusions: &pass.exclusions,
                correlation_skipped_scans: &pass.correlation_skipped,
            },
        )
    }

    pub fn ensembles(&self, specs: &[EnsembleSpec], conflicts: &[ConflictCount]) -> Result<PathBuf> {
        self.json("ensembles.json", &EnsemblesFile { ensembles: specs, conflicts })
    }

    pub fn summary(&self, summary: &Summary) -> Result<PathBuf> {
        self.json("summary.json", summary)
    }

    pub fn stats(&self, entries: &[ComparisonEntry]) -> Result<PathBuf> {
        self.json(
            "stats.json",
            &StatsFile {
                alpha: crate::stats::ALPHA,
                comparisons: entries,
            },
        )
    }

    pub fn thickness(&self, reports: &[ThicknessReport]) -> Result<PathBuf> {
        self.json("bland_altman.json", reports)
    }

    pub fn correlations(&self, matrices: &[DiceCorrelationMatrix]) -> Result<Vec<PathBuf>> {
        matrices
            .iter()
            .map(|m| self.text(&format!("dice_correlation_{}.csv", m.tissue), &m.to_csv()))
            .collect()
    }

    /// One CSV and one SVG per tissue, overlaying every model.
    pub fn droid(&self, profiles: &[DepthProfile]) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for tissue in Tissue::ALL {
            let selected: Vec<&DepthProfile> = profiles.iter().filter(|p| p.tissue == tissue).collect();
            if selected.is_empty() {
                continue;
            }
            let mut csv = String::from("model,bin_low,bin_high,mean_dice,n\n");
            for p in &selected {
                for line in p.to_csv().lines().skip(1) {
                    csv.push_str(&p.model);
                    csv.push(',');
                    csv.push_str(line);
                    csv.push('\n');
                }
            }
            written.push(self.text(&format!("droid_{tissue}.csv"), &csv)?);
            written.push(self.text(&format!("droid_{tissue}.svg"), &svg::droid_svg(tissue, &selected))?);
        }
        Ok(written)
    }
}
