use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleSpec;
use crate::error::{Error, Result};
use crate::overlap::CvVariant;
use crate::volume::{DatasetManifest, Split};

/// How to score ASSD when one side has no surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssdPolicy {
    /// Leave the record out and list it in the exclusions.
    #[default]
    Exclude,
    /// Score one-sided emptiness as the physical diagonal of the volume and a
    /// doubly empty pair as 0.
    MaxPenalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    /// Empty selects every model in the manifest.
    pub models: Vec<String>,
    /// Ensemble specs such as `vote:k=4` or `oracle:tp@a,b`.
    pub ensembles: Vec<String>,
    pub splits: Vec<Split>,
    pub droid_bins: usize,
    pub cv_variant: CvVariant,
    pub assd_policy: AssdPolicy,
    /// Also stratify the summary by KL grade.
    pub stratify_kl: bool,
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses the available parallelism.
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::new(),
            models: Vec::new(),
            ensembles: Vec::new(),
            splits: vec![Split::Test],
            droid_bins: crate::droid::DEFAULT_BINS,
            cv_variant: CvVariant::default(),
            assd_policy: AssdPolicy::default(),
            stratify_kl: false,
            out_dir: PathBuf::from("out"),
            jobs: None,
        }
    }
}

impl RunConfig {
    /// Read a JSON config. A relative `manifest` is taken relative to the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: Self = serde_json::from_str(&text)?;
        if config.manifest.is_relative() && !config.manifest.as_os_str().is_empty() {
            if let Some(dir) = path.parent() {
                config.manifest = dir.join(&config.manifest);
            }
        }
        Ok(config)
    }

    /// Check model references against the manifest and parse ensembles.
    pub fn plan(&self, manifest: &DatasetManifest) -> Result<RunPlan> {
        if self.splits.is_empty() {
            return Err(Error::InvalidInput("no splits selected".into()));
        }
        if self.droid_bins < 2 {
            return Err(Error::InvalidInput(format!("droid_bins must be at least 2, got {}", self.droid_bins)));
        }
        let models = if self.models.is_empty() {
            manifest.models.clone()
        } else {
            let mut m = self.models.clone();
            m.sort();
            m.dedup();
            m
        };
        let unknown: Vec<String> = models
            .iter()
            .filter(|m| !manifest.models.contains(m))
            .map(|m| format!("model {m:?} is not a prediction column of the manifest"))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::ManifestValidation(unknown));
        }
        let mut ensembles = Vec::new();
        for text in &self.ensembles {
            let spec = EnsembleSpec::parse(text, &models)?;
            if let Some(m) = spec.members.iter().find(|m| !manifest.models.contains(m)) {
                return Err(Error::EnsembleSpec {
                    spec: text.clone(),
                    reason: format!("member {m:?} is not in the manifest"),
                });
            }
            if models.contains(&spec.name) || ensembles.iter().any(|e: &EnsembleSpec| e.name == spec.name) {
                return Err(Error::EnsembleSpec {
                    spec: text.clone(),
                    reason: format!("name {:?} is already in use", spec.name),
                });
            }
            ensembles.push(spec);
        }
        Ok(RunPlan {
            models,
            ensembles,
            splits: self.splits.clone(),
            droid_bins: self.droid_bins,
            cv_variant: self.cv_variant,
            assd_policy: self.assd_policy,
            jobs: self.jobs,
        })
    }
}

/// A validated configuration bound to one manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    /// Sorted base model names.
    pub models: Vec<String>,
    pub ensembles: Vec<EnsembleSpec>,
    pub splits: Vec<Split>,
    pub droid_bins: usize,
    pub cv_variant: CvVariant,
    pub assd_policy: AssdPolicy,
    pub jobs: Option<usize>,
}

impl RunPlan {
    /// Base models followed by ensembles, in evaluation order.
    pub fn evaluated_models(&self) -> Vec<String> {
        self.models
            .iter()
            .cloned()
            .chain(self.ensembles.iter().map(|e| e.name.clone()))
            .collect()
    }

    /// Oracle ensembles: reported, but never ranked against real models.
    pub fn diagnostic_models(&self) -> Vec<String> {
        self.ensembles.iter().filter(|e| e.is_oracle()).map(|e| e.name.clone()).collect()
    }

    pub(crate) fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.unwrap_or(0))
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))
    }
}
