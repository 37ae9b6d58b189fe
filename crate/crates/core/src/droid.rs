//! Depth-wise region-of-interest distribution: slice-wise Dice along the
//! through-plane axis, with slice position normalized to 0–100% between the
//! first and last ground-truth slice of each scan.
//!
//! Binning is mirror-symmetric: positions below 50% use half-open bins
//! `[lo, hi)`, positions above 50% use `(lo, hi]`, and a position of exactly
//! 50% that falls on a bin edge is counted in both adjacent bins. Reversing
//! the axis therefore mirrors the profile bin for bin.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::volume::{Axis, BinaryMask, Tissue};

pub const DEFAULT_BINS: usize = 20;

/// One slice sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceSample {
    pub slice: usize,
    /// 0–100
    pub position: f64,
    pub dice: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthBin {
    pub low: f64,
    pub high: f64,
    /// `None` when no slice landed in the bin.
    pub mean_dice: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthProfile {
    pub model: String,
    pub tissue: Tissue,
    pub bins: Vec<DepthBin>,
    /// Indices of scans skipped because their ground truth was empty.
    pub skipped_scans: Vec<usize>,
}

impl DepthProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,mean_dice,n\n");
        for b in &self.bins {
            let mean = b.mean_dice.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", b.low, b.high, mean, b.n));
        }
        out
    }
}

/// Per-slice (pred, gt) foreground and intersection counts along `axis`.
fn slice_counts(pred: &BinaryMask, gt: &BinaryMask, axis: Axis) -> Vec<(usize, usize, usize)> {
    let dims = gt.dims();
    let mut counts = vec![(0, 0, 0); dims.along(axis)];
    for (i, (&p, &g)) in pred.voxels().iter().zip(gt.voxels()).enumerate() {
        let s = dims.coords(i)[axis.index()];
        let c = &mut counts[s];
        c.0 += p as usize;
        c.1 += g as usize;
        c.2 += (p && g) as usize;
    }
    counts
}

/// Slice-wise Dice for every slice with ground-truth foreground, with
/// normalized positions. `None` when the ground truth is empty.
pub fn slice_samples(pred: &BinaryMask, gt: &BinaryMask, axis: Axis) -> Result<Option<Vec<SliceSample>>> {
    pred.check_geometry(gt)?;
    let counts = slice_counts(pred, gt, axis);
    let occupied: Vec<usize> = (0..counts.len()).filter(|&s| counts[s].1 > 0).collect();
    let (Some(&first), Some(&last)) = (occupied.first(), occupied.last()) else {
        return Ok(None);
    };
    let span = last - first;
    Ok(Some(
        occupied
            .into_iter()
            .map(|s| {
                let (p, g, i) = counts[s];
                let position = if span == 0 {
                    50.0
                } else {
                    100.0 * (s - first) as f64 / span as f64
                };
                SliceSample {
                    slice: s,
                    position,
                    dice: 2.0 * i as f64 / (p + g) as f64,
                }
            })
            .collect(),
    ))
}

/// Bins receiving a sample at offset `offset` of a ground-truth extent `span`
/// slices long. Computed in integers so mirror symmetry holds exactly.
pub fn bins_for(offset: usize, span: usize, bins: usize) -> (usize, Option<usize>) {
    if span == 0 {
        return centre_bins(bins);
    }
    let twice = 2 * offset;
    if twice < span {
        ((offset * bins / span).min(bins - 1), None)
    } else if twice > span {
        let from_top = (span - offset) * bins / span;
        (bins - 1 - from_top.min(bins - 1), None)
    } else {
        centre_bins(bins)
    }
}

fn centre_bins(bins: usize) -> (usize, Option<usize>) {
    if bins.is_multiple_of(2) {
        (bins / 2 - 1, Some(bins / 2))
    } else {
        (bins / 2, None)
    }
}

/// Streaming form of [`depth_profile`]: feed one scan at a time.
#[derive(Debug, Clone)]
pub struct DepthProfileBuilder {
    axis: Axis,
    members: Vec<Vec<f64>>,
    scans: usize,
    skipped: Vec<usize>,
}

impl DepthProfileBuilder {
    pub fn new(axis: Axis, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 bins, got {bins}")));
        }
        Ok(Self {
            axis,
            members: vec![Vec::new(); bins],
            scans: 0,
            skipped: Vec::new(),
        })
    }

    pub fn add_scan(&mut self, pred: &BinaryMask, gt: &BinaryMask) -> Result<()> {
        let samples = slice_samples(pred, gt, self.axis)?;
        self.add_samples(samples);
        Ok(())
    }

    /// Add the output of [`slice_samples`] for one scan.
    pub fn add_samples(&mut self, samples: Option<Vec<SliceSample>>) {
        let idx = self.scans;
        self.scans += 1;
        let Some(samples) = samples else {
            log::warn!("depth profile: scan {idx} has empty ground truth; skipped");
            self.skipped.push(idx);
            return;
        };
        let bins = self.members.len();
        let first = samples[0].slice;
        let span = samples[samples.len() - 1].slice - first;
        for s in samples {
            let (a, b) = bins_for(s.slice - first, span, bins);
            for bin in std::iter::once(a).chain(b) {
                self.members[bin].push(s.dice);
            }
        }
    }

    pub fn finish(self, model: &str, tissue: Tissue) -> DepthProfile {
        let width = 100.0 / self.members.len() as f64;
        // sorted summation makes each mean independent of sample order
        let bins = self
            .members
            .into_iter()
            .enumerate()
            .map(|(b, mut values)| {
                values.sort_by(f64::total_cmp);
                let n = values.len();
                DepthBin {
                    low: b as f64 * width,
                    high: (b + 1) as f64 * width,
                    mean_dice: (n > 0).then(|| values.iter().sum::<f64>() / n as f64),
                    n,
                }
            })
            .collect();
        DepthProfile {
            model: model.to_string(),
            tissue,
            bins,
            skipped_scans: self.skipped,
        }
    }
}

/// Pooled slice-wise Dice profile over paired scans.
pub fn depth_profile(
    model: &str,
    pred: &[BinaryMask],
    gt: &[BinaryMask],
    axis: Axis,
    bins: usize,
) -> Result<DepthProfile> {
    let mut builder = DepthProfileBuilder::new(axis, bins)?;
    if pred.len() != gt.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} ground-truth scans",
            pred.len(),
            gt.len()
        )));
    }
    let tissue = gt
        .first()
        .map(|g| g.tissue())
        .ok_or_else(|| Error::InvalidInput("no scans for depth profile".into()))?;
    for (p, g) in pred.iter().zip(gt) {
        builder.add_scan(p, g)?;
    }
    Ok(builder.finish(model, tissue))
}
