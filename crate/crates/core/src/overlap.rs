//! Volume-overlap metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Tissue};

/// Voxel counts for a pair of masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapCounts {
    pub a: usize,
    pub b: usize,
    pub intersection: usize,
}

impl OverlapCounts {
    pub fn union(&self) -> usize {
        self.a + self.b - self.intersection
    }

    pub fn dice(&self) -> f64 {
        if self.a + self.b == 0 {
            return 1.0;
        }
        2.0 * self.intersection as f64 / (self.a + self.b) as f64
    }

    pub fn voe(&self) -> f64 {
        let union = self.union();
        if union == 0 {
            return 0.0;
        }
        1.0 - self.intersection as f64 / union as f64
    }
}

pub fn overlap_counts(a: &BinaryMask, b: &BinaryMask) -> Result<OverlapCounts> {
    a.check_geometry(b)?;
    let mut counts = OverlapCounts {
        a: 0,
        b: 0,
        intersection: 0,
    };
    for (&va, &vb) in a.voxels().iter().zip(b.voxels()) {
        counts.a += va as usize;
        counts.b += vb as usize;
        counts.intersection += (va && vb) as usize;
    }
    Ok(counts)
}

/// Dice overlap `2|A∩B| / (|A|+|B|)`. Two empty masks score 1.0.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let c = overlap_counts(a, b)?;
    if c.a + c.b == 0 {
        log::warn!("dice of two empty {} masks defined as 1.0", a.tissue());
    }
    Ok(c.dice())
}

/// Volumetric overlap error `1 − |A∩B| / |A∪B|`. Two empty masks score 0.0.
pub fn voe(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let c = overlap_counts(a, b)?;
    if c.union() == 0 {
        log::warn!("voe of two empty {} masks defined as 0.0", a.tissue());
    }
    Ok(c.voe())
}

/// Foreground volume in mm³.
pub fn volume_mm3(a: &BinaryMask) -> f64 {
    a.count() as f64 * a.spacing().voxel_volume()
}

/// Which standard deviation to use for a (prediction, ground truth) volume pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvVariant {
    /// n−1 denominator: `|a−b| / √2`.
    #[default]
    Sample,
    /// n denominator: `|a−b| / 2`.
    Population,
}

/// What to do with a pair whose volumes are both zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroPairPolicy {
    #[default]
    Error,
    Exclude,
}

/// Coefficient of variation of one (prediction, ground truth) pair. `None`
/// when both volumes are zero.
pub fn pair_cv(v_pred: f64, v_gt: f64, variant: CvVariant) -> Option<f64> {
    let mean = 0.5 * (v_pred + v_gt);
    if mean == 0.0 {
        return None;
    }
    let diff = (v_pred - v_gt).abs();
    let sd = match variant {
        CvVariant::Sample => diff / std::f64::consts::SQRT_2,
        CvVariant::Population => diff / 2.0,
    };
    Some(sd / mean)
}

/// Root-mean-square of per-pair coefficients of variation.
pub fn rms_cv(pairs: &[(f64, f64)], variant: CvVariant, zero_policy: ZeroPairPolicy) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut sum_sq = 0.0;
    let mut n = 0usize;
    for (i, &(p, g)) in pairs.iter().enumerate() {
        if !(p >= 0.0 && g >= 0.0) {
            return Err(Error::InvalidInput(format!("pair {i} has a negative volume ({p}, {g})")));
        }
        match pair_cv(p, g, variant) {
            Some(cv) => {
                sum_sq += cv * cv;
                n += 1;
            }
            None if zero_policy == ZeroPairPolicy::Exclude => {
                log::warn!("cv pair {i} has both volumes zero; excluded");
            }
            None => return Err(Error::UndefinedCv { index: i }),
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok((sum_sq / n as f64).sqrt())
}

/// Mean pairwise Dice between models for one tissue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiceCorrelationMatrix {
    pub tissue: Tissue,
    pub models: Vec<String>,
    /// Row-major `models.len()²` values.
    pub values: Vec<f64>,
}

impl DiceCorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.models.len() + j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model");
        for m in &self.models {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (i, m) in self.models.iter().enumerate() {
            out.push_str(m);
            for j in 0..self.models.len() {
                out.push_str(&format!(",{}", self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

/// Dice of every pair (i < j), row-major over the upper triangle.
pub fn pairwise_dice(masks: &[&BinaryMask]) -> Result<Vec<f64>> {
    let k = masks.len();
    let mut out = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            out.push(dice(masks[i], masks[j])?);
        }
    }
    Ok(out)
}

/// Streaming form of [`dice_correlation_matrix`]: feed one scan at a time.
#[derive(Debug, Clone)]
pub struct DiceCorrelationAccumulator {
    tissue: Tissue,
    models: Vec<String>,
    sums: Vec<f64>,
    scans: usize,
}

impl DiceCorrelationAccumulator {
    pub fn new(tissue: Tissue, models: Vec<String>) -> Self {
        let k = models.len();
        Self {
            tissue,
            models,
            sums: vec![0.0; k * k],
            scans: 0,
        }
    }

    /// `masks` holds one mask per model, in model order.
    pub fn add_scan(&mut self, masks: &[&BinaryMask]) -> Result<()> {
        let k = self.models.len();
        if masks.len() != k {
            return Err(Error::InvalidInput(format!("{} masks for {k} models", masks.len())));
        }
        if let Some((i, m)) = masks.iter().enumerate().find(|(_, m)| m.tissue() != self.tissue) {
            return Err(Error::InvalidInput(format!(
                "model {:?} mixes tissues ({} vs {})",
                self.models[i],
                m.tissue(),
                self.tissue
            )));
        }
        let pairs = pairwise_dice(masks)?;
        self.add_pairwise(&pairs)
    }

    /// Add one scan's output of [`pairwise_dice`].
    pub fn add_pairwise(&mut self, pairs: &[f64]) -> Result<()> {
        let k = self.models.len();
        if pairs.len() != k * k.saturating_sub(1) / 2 {
            return Err(Error::InvalidInput(format!("{} pair values for {k} models", pairs.len())));
        }
        let mut next = pairs.iter();
        for i in 0..k {
            for j in (i + 1)..k {
                self.sums[i * k + j] += next.next().unwrap();
            }
        }
        self.scans += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<DiceCorrelationMatrix> {
        if self.models.is_empty() {
            return Err(Error::InvalidInput("no models for dice correlation".into()));
        }
        if self.scans == 0 {
            return Err(Error::InvalidInput("dice correlation needs at least one scan".into()));
        }
        let k = self.models.len();
        let mut values = vec![0.0; k * k];
        for i in 0..k {
            values[i * k + i] = 1.0;
            for j in (i + 1)..k {
                let mean = self.sums[i * k + j] / self.scans as f64;
                values[i * k + j] = mean;
                values[j * k + i] = mean;
            }
        }
        Ok(DiceCorrelationMatrix {
            tissue: self.tissue,
            models: self.models,
            values,
        })
    }
}

/// Entry (i, j) is the mean over scans of `dice(mask_i, mask_j)`; every
/// model must supply the same number of scans, in the same order.
pub fn dice_correlation_matrix(masks: &[(String, Vec<BinaryMask>)]) -> Result<DiceCorrelationMatrix> {
    let (_, first) = masks
        .first()
        .ok_or_else(|| Error::InvalidInput("no models for dice correlation".into()))?;
    let n_scans = first.len();
    if n_scans == 0 {
        return Err(Error::InvalidInput("dice correlation needs at least one scan".into()));
    }
    for (name, list) in masks {
        if list.len() != n_scans {
            return Err(Error::InvalidInput(format!(
                "model {name:?} has {} scans, expected {n_scans}",
                list.len()
            )));
        }
    }
    let mut acc = DiceCorrelationAccumulator::new(first[0].tissue(), masks.iter().map(|(n, _)| n.clone()).collect());
    for s in 0..n_scans {
        let scan: Vec<&BinaryMask> = masks.iter().map(|(_, list)| &list[s]).collect();
        acc.add_scan(&scan)?;
    }
    acc.finish()
}
