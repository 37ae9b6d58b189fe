use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{AssdPolicy, RunPlan};
use super::table::{Metric, MetricRecord, MetricTable};
use crate::droid::{slice_samples, DepthProfile, DepthProfileBuilder, SliceSample};
use crate::ensemble::{oracle_tn, oracle_tp, vote_label_maps, EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::overlap::{
    overlap_counts, pair_cv, pairwise_dice, volume_mm3, DiceCorrelationAccumulator, DiceCorrelationMatrix,
};
use crate::surface::{assd_mm, Assd, EmptySide};
use crate::thickness::{mean_thickness_mm, ThicknessEstimate};
use crate::volume::{load_volume, Axis, BinaryMask, DatasetManifest, LabelVolume, ScanRecord, Timepoint, Tissue};

/// A (model, scan[, tissue[, metric]]) entry left out of the metric table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Exclusion {
    pub model: String,
    pub subject_id: String,
    pub timepoint: Timepoint,
    /// `None` when the whole scan is excluded for this model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tissue: Option<Tissue>,
    /// `None` when every metric of the tissue is excluded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    pub reason: String,
}

impl Exclusion {
    /// Scan-level exclusions come from unreadable or mismatched inputs;
    /// the rest are metric policies such as undefined ASSD.
    pub fn is_scan_level(&self) -> bool {
        self.tissue.is_none()
    }
}

/// Voxels claimed by more than one tissue when recomposing a vote ensemble.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConflictCount {
    pub ensemble: String,
    pub subject_id: String,
    pub timepoint: Timepoint,
    pub conflicts: usize,
}

/// Which products a scan pass computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PassOutputs {
    pub metrics: bool,
    pub droid: bool,
    pub correlation: bool,
}

impl PassOutputs {
    pub const ALL: PassOutputs = PassOutputs {
        metrics: true,
        droid: true,
        correlation: true,
    };
}

#[derive(Debug, Clone, Default)]
pub struct ScanPass {
    pub table: MetricTable,
    pub exclusions: Vec<Exclusion>,
    pub conflicts: Vec<ConflictCount>,
    /// Evaluation-model order, then tissue order.
    pub droid: Vec<DepthProfile>,
    /// One matrix per tissue over the base models.
    pub correlations: Vec<DiceCorrelationMatrix>,
    /// Scans left out of the correlation because a base model was excluded.
    pub correlation_skipped: Vec<String>,
    pub scans: usize,
}

#[derive(Default)]
struct ScanResult {
    records: Vec<MetricRecord>,
    exclusions: Vec<Exclusion>,
    conflicts: Vec<ConflictCount>,
    /// (evaluation model index, tissue, samples)
    droid: Vec<(usize, Tissue, Option<Vec<SliceSample>>)>,
    /// Per tissue pairwise Dice over base models; `None` if a model is missing.
    pairwise: Option<Vec<(Tissue, Vec<f64>)>>,
}

struct ScanContext<'a> {
    scan: &'a ScanRecord,
    plan: &'a RunPlan,
    axis: Axis,
    outputs: PassOutputs,
}

impl ScanContext<'_> {
    fn exclude(&self, out: &mut ScanResult, model: &str, tissue: Option<Tissue>, metric: Option<Metric>, reason: String) {
        out.exclusions.push(Exclusion {
            model: model.to_string(),
            subject_id: self.scan.subject_id.clone(),
            timepoint: self.scan.timepoint,
            tissue,
            metric,
            reason,
        });
    }

    fn record(&self, out: &mut ScanResult, model: &str, tissue: Tissue, metric: Metric, value: f64) {
        out.records.push(MetricRecord {
            model: model.to_string(),
            subject_id: self.scan.subject_id.clone(),
            timepoint: self.scan.timepoint,
            tissue,
            metric,
            value,
        });
    }
}

/// Source of a model's per-tissue prediction for one scan.
enum Prediction<'a> {
    Labels(&'a LabelVolume),
    Composed(LabelVolume),
    Oracle(&'a EnsembleSpec, Vec<&'a LabelVolume>),
    Missing,
}

impl Prediction<'_> {
    fn mask(&self, tissue: Tissue, gt: &BinaryMask) -> Result<Option<BinaryMask>> {
        Ok(match self {
            Prediction::Labels(v) => Some(v.extract_mask(tissue)),
            Prediction::Composed(v) => Some(v.extract_mask(tissue)),
            Prediction::Oracle(spec, members) => {
                let masks: Vec<BinaryMask> = members.iter().map(|m| m.extract_mask(tissue)).collect();
                Some(match spec.kind {
                    EnsembleKind::OracleTp => oracle_tp(&masks, gt)?,
                    EnsembleKind::OracleTn => oracle_tn(&masks, gt)?,
                    EnsembleKind::Vote { .. } => unreachable!("vote ensembles are composed"),
                })
            }
            Prediction::Missing => None,
        })
    }
}

fn physical_diagonal(gt: &BinaryMask) -> f64 {
    let d = gt.dims().as_array();
    let s = gt.spacing().as_array();
    (0..3).map(|i| (d[i] as f64 * s[i]).powi(2)).sum::<f64>().sqrt()
}

fn evaluate_tissue(
    ctx: &ScanContext,
    out: &mut ScanResult,
    model: &str,
    pred: &BinaryMask,
    gt: &BinaryMask,
    gt_thickness: Option<&ThicknessEstimate>,
) -> Result<()> {
    let tissue = gt.tissue();
    let counts = overlap_counts(pred, gt)?;
    ctx.record(out, model, tissue, Metric::Dice, counts.dice());
    ctx.record(out, model, tissue, Metric::Voe, counts.voe());

    let vp = volume_mm3(pred);
    let vg = volume_mm3(gt);
    ctx.record(out, model, tissue, Metric::VolumeMm3, vp);
    ctx.record(out, model, tissue, Metric::GtVolumeMm3, vg);
    match pair_cv(vp, vg, ctx.plan.cv_variant) {
        Some(cv) => ctx.record(out, model, tissue, Metric::Cv, cv),
        None => ctx.exclude(out, model, Some(tissue), Some(Metric::Cv), "both volumes are zero".into()),
    }

    match (assd_mm(pred, gt)?, ctx.plan.assd_policy) {
        (Assd::Defined(v), _) => ctx.record(out, model, tissue, Metric::AssdMm, v),
        (Assd::Undefined(side), AssdPolicy::Exclude) => {
            let which = match side {
                EmptySide::First => "prediction",
                EmptySide::Second => "ground truth",
                EmptySide::Both => "prediction and ground truth",
            };
            ctx.exclude(out, model, Some(tissue), Some(Metric::AssdMm), format!("{which} empty; ASSD undefined"));
        }
        (Assd::Undefined(EmptySide::Both), AssdPolicy::MaxPenalty) => {
            ctx.record(out, model, tissue, Metric::AssdMm, 0.0)
        }
        (Assd::Undefined(_), AssdPolicy::MaxPenalty) => {
            ctx.record(out, model, tissue, Metric::AssdMm, physical_diagonal(gt))
        }
    }

    if let Some(g) = gt_thickness {
        let p = mean_thickness_mm(pred)?;
        ctx.record(out, model, tissue, Metric::ThicknessMm, p.mean_thickness_mm);
        ctx.record(out, model, tissue, Metric::GtThicknessMm, g.mean_thickness_mm);
        if g.empty {
            for m in [Metric::ThicknessErrorMm, Metric::ThicknessDiffMm] {
                ctx.exclude(out, model, Some(tissue), Some(m), "ground truth empty; thickness error undefined".into());
            }
        } else {
            let signed = p.mean_thickness_mm - g.mean_thickness_mm;
            ctx.record(out, model, tissue, Metric::ThicknessErrorMm, signed.abs());
            ctx.record(out, model, tissue, Metric::ThicknessDiffMm, signed);
        }
    }
    Ok(())
}

fn evaluate_scan(ctx: &ScanContext) -> ScanResult {
    let mut out = ScanResult::default();
    let plan = ctx.plan;
    let scan = ctx.scan;
    let evaluated = plan.evaluated_models();

    let gt = match load_volume(&scan.ground_truth_path, None) {
        Ok(v) => v,
        Err(e) => {
            log::error!("{}: ground truth unreadable: {e}", scan.scan_id());
            for m in &evaluated {
                ctx.exclude(&mut out, m, None, None, format!("ground truth unreadable: {e}"));
            }
            return out;
        }
    };

    let mut base: BTreeMap<&str, LabelVolume> = BTreeMap::new();
    for model in &plan.models {
        let loaded = match scan.prediction_paths.get(model) {
            None => Err("no prediction listed for this scan".to_string()),
            Some(path) => load_volume(path, None)
                .map_err(|e| format!("prediction unreadable: {e}"))
                .and_then(|v| {
                    v.check_geometry(&gt).map_err(|e| format!("geometry mismatch with ground truth: {e}"))?;
                    Ok(v)
                }),
        };
        match loaded {
            Ok(v) => {
                base.insert(model, v);
            }
            Err(reason) => {
                log::warn!("{} / {model}: {reason}", scan.scan_id());
                ctx.exclude(&mut out, model, None, None, reason);
            }
        }
    }

    let mut predictions: Vec<Prediction> = plan
        .models
        .iter()
        .map(|m| base.get(m.as_str()).map_or(Prediction::Missing, Prediction::Labels))
        .collect();
    for spec in &plan.ensembles {
        let members: Option<Vec<&LabelVolume>> = spec.members.iter().map(|m| base.get(m.as_str())).collect();
        let Some(members) = members else {
            ctx.exclude(&mut out, &spec.name, None, None, "an ensemble member is excluded for this scan".into());
            predictions.push(Prediction::Missing);
            continue;
        };
        predictions.push(match spec.kind {
            EnsembleKind::Vote { k } => {
                let owned: Vec<LabelVolume> = members.into_iter().cloned().collect();
                match vote_label_maps(&owned, k) {
                    Ok(c) => {
                        out.conflicts.push(ConflictCount {
                            ensemble: spec.name.clone(),
                            subject_id: scan.subject_id.clone(),
                            timepoint: scan.timepoint,
                            conflicts: c.conflicts,
                        });
                        Prediction::Composed(c.volume)
                    }
                    Err(e) => {
                        ctx.exclude(&mut out, &spec.name, None, None, format!("vote failed: {e}"));
                        Prediction::Missing
                    }
                }
            }
            _ => Prediction::Oracle(spec, members),
        });
    }

    let all_base = base.len() == plan.models.len();
    let mut pairwise = Vec::new();
    for tissue in Tissue::ALL {
        let gt_mask = gt.extract_mask(tissue);
        let gt_thickness = if ctx.outputs.metrics && tissue.is_cartilage() {
            match mean_thickness_mm(&gt_mask) {
                Ok(t) => Some(t),
                Err(e) => {
                    log::error!("{}: ground-truth thickness failed: {e}", scan.scan_id());
                    None
                }
            }
        } else {
            None
        };
        let mut base_masks = Vec::with_capacity(plan.models.len());
        for (idx, (name, pred)) in evaluated.iter().zip(&predictions).enumerate() {
            let mask = match pred.mask(tissue, &gt_mask) {
                Ok(Some(m)) => m,
                Ok(None) => continue,
                Err(e) => {
                    ctx.exclude(&mut out, name, Some(tissue), None, e.to_string());
                    continue;
                }
            };
            if ctx.outputs.metrics {
                if let Err(e) = evaluate_tissue(ctx, &mut out, name, &mask, &gt_mask, gt_thickness.as_ref()) {
                    ctx.exclude(&mut out, name, Some(tissue), None, e.to_string());
                }
            }
            if ctx.outputs.droid {
                match slice_samples(&mask, &gt_mask, ctx.axis) {
                    Ok(s) => out.droid.push((idx, tissue, s)),
                    Err(e) => log::warn!("{} / {name}: depth profile failed: {e}", scan.scan_id()),
                }
            }
            if ctx.outputs.correlation && idx < plan.models.len() {
                base_masks.push(mask);
            }
        }
        if ctx.outputs.correlation && all_base {
            let refs: Vec<&BinaryMask> = base_masks.iter().collect();
            match pairwise_dice(&refs) {
                Ok(p) => pairwise.push((tissue, p)),
                Err(e) => log::warn!("{}: dice correlation failed: {e}", scan.scan_id()),
            }
        }
    }
    if ctx.outputs.correlation && all_base && pairwise.len() == Tissue::ALL.len() {
        out.pairwise = Some(pairwise);
    }
    out
}

/// Evaluate every selected scan once and fold the results in manifest order.
pub fn run_scan_pass(manifest: &DatasetManifest, plan: &RunPlan, outputs: PassOutputs) -> Result<ScanPass> {
    let scans: Vec<&ScanRecord> = manifest.scans_in(&plan.splits).collect();
    if scans.is_empty() {
        return Err(Error::InvalidInput("no scans in the selected splits".into()));
    }
    let pool = plan.thread_pool()?;
    let results: Vec<ScanResult> = pool.install(|| {
        scans
            .par_iter()
            .map(|scan| {
                evaluate_scan(&ScanContext {
                    scan,
                    plan,
                    axis: manifest.through_plane_axis,
                    outputs,
                })
            })
            .collect()
    });

    let evaluated = plan.evaluated_models();
    let mut builders: BTreeMap<(usize, Tissue), DepthProfileBuilder> = BTreeMap::new();
    if outputs.droid {
        for idx in 0..evaluated.len() {
            for t in Tissue::ALL {
                builders.insert((idx, t), DepthProfileBuilder::new(manifest.through_plane_axis, plan.droid_bins)?);
            }
        }
    }
    let mut accumulators: Vec<DiceCorrelationAccumulator> = Tissue::ALL
        .iter()
        .map(|&t| DiceCorrelationAccumulator::new(t, plan.models.clone()))
        .collect();

    let mut pass = ScanPass {
        scans: scans.len(),
        ..ScanPass::default()
    };
    let mut records = Vec::new();
    for (scan, r) in scans.iter().zip(results) {
        records.extend(r.records);
        pass.exclusions.extend(r.exclusions);
        pass.conflicts.extend(r.conflicts);
        for (idx, t, samples) in r.droid {
            builders.get_mut(&(idx, t)).unwrap().add_samples(samples);
        }
        match r.pairwise {
            Some(per_tissue) => {
                for (t, values) in per_tissue {
                    accumulators[t as usize - 1].add_pairwise(&values)?;
                }
            }
            None if outputs.correlation => pass.correlation_skipped.push(scan.scan_id()),
            None => {}
        }
    }
    pass.table = MetricTable::new(records)?;
    pass.exclusions.sort();
    pass.droid = builders
        .into_iter()
        .map(|((idx, t), b)| b.finish(&evaluated[idx], t))
        .collect();
    if outputs.correlation && !plan.models.is_empty() {
        for acc in accumulators {
            match acc.finish() {
                Ok(m) => pass.correlations.push(m),
                Err(e) => log::warn!("dice correlation unavailable: {e}"),
            }
        }
    }
    Ok(pass)
}
