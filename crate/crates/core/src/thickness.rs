//! Cartilage thickness, thickness error, longitudinal change and
//! Bland–Altman agreement.
//!
//! Local thickness is twice the distance from a voxel center to the tissue
//! boundary. The boundary sits between the last foreground and first
//! background voxel centers, so the inside distance is taken as the mean of
//! the distance to the nearest surface voxel and the distance to the nearest
//! background voxel (volume faces count as background). Scan thickness is the
//! mean of that local thickness over medial voxels: foreground voxels whose
//! inside distance is not exceeded by any of their 26 neighbors.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::surface::{squared_edt, surface_grid};
use crate::volume::{BinaryMask, Dims, Timepoint, Tissue};

/// Ties within this many mm count as equal when detecting medial voxels.
const PLATEAU_TOLERANCE_MM: f64 = 1e-9;

/// Limits-of-agreement multiplier.
pub const LOA_Z: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThicknessEstimate {
    pub mean_thickness_mm: f64,
    pub medial_voxel_count: usize,
    /// Set when the mask had no foreground and the thickness defaulted to 0.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThicknessResult {
    pub model: String,
    pub subject_id: String,
    pub timepoint: Timepoint,
    pub tissue: Tissue,
    pub mean_thickness_mm: f64,
    pub medial_voxel_count: usize,
}

impl ThicknessResult {
    pub fn new(model: &str, subject_id: &str, timepoint: Timepoint, tissue: Tissue, estimate: ThicknessEstimate) -> Self {
        Self {
            model: model.to_string(),
            subject_id: subject_id.to_string(),
            timepoint,
            tissue,
            mean_thickness_mm: estimate.mean_thickness_mm,
            medial_voxel_count: estimate.medial_voxel_count,
        }
    }
}

/// Per-voxel inside distance (mm) for every foreground voxel; 0 on background.
pub fn inside_distance(mask: &BinaryMask) -> Vec<f64> {
    let dims = mask.dims();
    let padded = Dims::new(dims.nx + 2, dims.ny + 2, dims.nz + 2).unwrap();
    let mut fg = vec![false; padded.len()];
    for (i, &on) in mask.voxels().iter().enumerate() {
        if on {
            let [x, y, z] = dims.coords(i);
            fg[padded.index(x + 1, y + 1, z + 1)] = true;
        }
    }
    let background: Vec<bool> = fg.iter().map(|&v| !v).collect();
    let surface = surface_grid(padded, &fg);
    let to_bg = squared_edt(padded, mask.spacing(), &background);
    let to_surface = squared_edt(padded, mask.spacing(), &surface);
    let mut out = vec![0.0; dims.len()];
    for (i, o) in out.iter_mut().enumerate() {
        if mask.voxels()[i] {
            let [x, y, z] = dims.coords(i);
            let j = padded.index(x + 1, y + 1, z + 1);
            *o = 0.5 * (to_bg[j].sqrt() + to_surface[j].sqrt());
        }
    }
    out
}

/// Foreground voxels whose inside distance is ≥ that of all 26 neighbors.
pub fn medial_voxels(mask: &BinaryMask, inside: &[f64]) -> Vec<usize> {
    let dims = mask.dims();
    let [nx, ny, nz] = dims.as_array().map(|n| n as i64);
    let mut out = Vec::new();
    for (i, &on) in mask.voxels().iter().enumerate() {
        if !on {
            continue;
        }
        let [x, y, z] = dims.coords(i).map(|c| c as i64);
        let value = inside[i];
        let mut is_max = true;
        'scan: for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (qx, qy, qz) = (x + dx, y + dy, z + dz);
                    if (dx, dy, dz) == (0, 0, 0) || qx < 0 || qy < 0 || qz < 0 || qx >= nx || qy >= ny || qz >= nz {
                        continue;
                    }
                    if inside[dims.index(qx as usize, qy as usize, qz as usize)] > value + PLATEAU_TOLERANCE_MM {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
        }
        if is_max {
            out.push(i);
        }
    }
    out
}

/// Mean medial thickness of a cartilage mask in mm.
pub fn mean_thickness_mm(mask: &BinaryMask) -> Result<ThicknessEstimate> {
    if !mask.tissue().is_cartilage() {
        return Err(Error::ThicknessUndefined(mask.tissue().name()));
    }
    if mask.is_empty() {
        log::warn!("thickness of an empty {} mask reported as 0", mask.tissue());
        return Ok(ThicknessEstimate {
            mean_thickness_mm: 0.0,
            medial_voxel_count: 0,
            empty: true,
        });
    }
    let inside = inside_distance(mask);
    let medial = medial_voxels(mask, &inside);
    let sum: f64 = medial.iter().map(|&i| 2.0 * inside[i]).sum();
    Ok(ThicknessEstimate {
        mean_thickness_mm: sum / medial.len() as f64,
        medial_voxel_count: medial.len(),
        empty: false,
    })
}

/// Signed and absolute thickness difference between prediction and ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThicknessError {
    pub pred: ThicknessEstimate,
    pub gt: ThicknessEstimate,
    /// pred − gt
    pub signed_mm: f64,
    pub abs_mm: f64,
}

impl ThicknessError {
    pub fn any_empty(&self) -> bool {
        self.pred.empty || self.gt.empty
    }
}

pub fn thickness_error(pred: &BinaryMask, gt: &BinaryMask) -> Result<ThicknessError> {
    pred.check_geometry(gt)?;
    if pred.tissue() != gt.tissue() {
        return Err(Error::InvalidInput(format!(
            "thickness error between different tissues ({} vs {})",
            pred.tissue(),
            gt.tissue()
        )));
    }
    let p = mean_thickness_mm(pred)?;
    let g = mean_thickness_mm(gt)?;
    let signed = p.mean_thickness_mm - g.mean_thickness_mm;
    Ok(ThicknessError {
        pred: p,
        gt: g,
        signed_mm: signed,
        abs_mm: signed.abs(),
    })
}

/// `|thickness(pred) − thickness(gt)|` in mm.
pub fn thickness_error_mm(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    Ok(thickness_error(pred, gt)?.abs_mm)
}

/// Signed change from baseline to year 1 (mm).
pub fn longitudinal_change_mm(t0: &ThicknessResult, t1: &ThicknessResult) -> Result<f64> {
    if t0.timepoint != Timepoint::Baseline {
        return Err(Error::TimepointMismatch {
            expected: Timepoint::Baseline,
            found: t0.timepoint,
        });
    }
    if t1.timepoint != Timepoint::Year1 {
        return Err(Error::TimepointMismatch {
            expected: Timepoint::Year1,
            found: t1.timepoint,
        });
    }
    if t0.subject_id != t1.subject_id || t0.tissue != t1.tissue || t0.model != t1.model {
        return Err(Error::InvalidInput(format!(
            "longitudinal pair mismatch: {}/{}/{} vs {}/{}/{}",
            t0.model, t0.subject_id, t0.tissue, t1.model, t1.subject_id, t1.tissue
        )));
    }
    Ok(t1.mean_thickness_mm - t0.mean_thickness_mm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlandAltman {
    pub bias: f64,
    pub sd: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    pub n: usize,
}

/// Sum positives and negatives separately, each in ascending magnitude, so
/// that a difference set and its negation cancel exactly.
fn mirrored_sum(values: &[f64]) -> f64 {
    let mut pos: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    let mut neg: Vec<f64> = values.iter().map(|v| -v).filter(|v| *v > 0.0).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    pos.iter().sum::<f64>() - neg.iter().sum::<f64>()
}

/// Bias and 95% limits of agreement (n−1 standard deviation).
pub fn bland_altman(differences: &[f64]) -> Result<BlandAltman> {
    let n = differences.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let bias = mirrored_sum(differences) / n as f64;
    let var = differences.iter().map(|d| (d - bias).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    Ok(BlandAltman {
        bias,
        sd,
        loa_low: bias - LOA_Z * sd,
        loa_high: bias + LOA_Z * sd,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::VoxelSpacing;

    fn slab(t: usize, dz: f64) -> BinaryMask {
        let d = Dims::new(16, 16, t + 6).unwrap();
        let sp = VoxelSpacing::new(0.31, 0.46, dz).unwrap();
        BinaryMask::from_fn(d, sp, Tissue::Femoral, |x, y, z| {
            (2..14).contains(&x) && (2..14).contains(&y) && (3..3 + t).contains(&z)
        })
    }

    #[test]
    fn slab_five_voxels() {
        let est = mean_thickness_mm(&slab(5, 0.70)).unwrap();
        assert!((est.mean_thickness_mm - 3.5).abs() <= 0.70, "{est:?}");
        assert!(est.medial_voxel_count > 0);
    }

    #[test]
    fn empty_mask_flagged() {
        let d = Dims::new(4, 4, 4).unwrap();
        let e = BinaryMask::empty(d, VoxelSpacing::unit(), Tissue::Tibial);
        let est = mean_thickness_mm(&e).unwrap();
        assert_eq!(est.mean_thickness_mm, 0.0);
        assert_eq!(est.medial_voxel_count, 0);
        assert!(est.empty);
    }

    #[test]
    fn meniscus_rejected() {
        let m = slab(3, 1.0).with_tissue(Tissue::Meniscus);
        assert!(matches!(mean_thickness_mm(&m), Err(Error::ThicknessUndefined(_))));
    }

    #[test]
    fn slab_difference() {
        let a = slab(5, 0.70);
        // same grid, one layer fewer
        let b = BinaryMask::from_fn(a.dims(), a.spacing(), Tissue::Femoral, |x, y, z| {
            (2..14).contains(&x) && (2..14).contains(&y) && (3..7).contains(&z)
        });
        let err = thickness_error_mm(&a, &b).unwrap();
        assert!((err - 0.70).abs() <= 0.70 + 1e-9, "{err}");
        assert_eq!(thickness_error_mm(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn translation_invariant() {
        let d = Dims::new(20, 20, 20).unwrap();
        let sp = VoxelSpacing::dess();
        let shape = |ox: usize, oz: usize| {
            BinaryMask::from_fn(d, sp, Tissue::Patellar, move |x, y, z| {
                (ox..ox + 8).contains(&x) && (4..12).contains(&y) && (oz..oz + 3 + (x - ox.min(x)) / 3).contains(&z)
            })
        };
        let a = mean_thickness_mm(&shape(2, 2)).unwrap().mean_thickness_mm;
        let b = mean_thickness_mm(&shape(9, 10)).unwrap().mean_thickness_mm;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn longitudinal() {
        let est = |v| ThicknessEstimate {
            mean_thickness_mm: v,
            medial_voxel_count: 1,
            empty: false,
        };
        let t0 = ThicknessResult::new("m", "s", Timepoint::Baseline, Tissue::Femoral, est(2.80));
        let t1 = ThicknessResult::new("m", "s", Timepoint::Year1, Tissue::Femoral, est(2.45));
        assert!((longitudinal_change_mm(&t0, &t1).unwrap() + 0.35).abs() < 1e-12);
        assert!(longitudinal_change_mm(&t0, &t0.clone()).is_err());
        let same = ThicknessResult::new("m", "s", Timepoint::Year1, Tissue::Femoral, est(2.80));
        assert_eq!(longitudinal_change_mm(&t0, &same).unwrap(), 0.0);
        assert!(matches!(
            longitudinal_change_mm(&t1, &t0),
            Err(Error::TimepointMismatch { .. })
        ));
    }

    #[test]
    fn bland_altman_examples() {
        let z = bland_altman(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!((z.bias, z.loa_low, z.loa_high), (0.0, 0.0, 0.0));

        let b = bland_altman(&[-0.1, 0.1]).unwrap();
        assert_eq!(b.bias, 0.0);
        assert!((b.sd - 0.1414213562373095).abs() < 1e-12);
        assert!((b.loa_high - 0.2771858582251266).abs() < 1e-9);
        assert!((b.loa_low + 0.2771858582251266).abs() < 1e-9);

        let c = bland_altman(&[0.02, 0.04, 0.06]).unwrap();
        assert!((c.bias - 0.04).abs() < 1e-12);
        assert!((c.sd - 0.02).abs() < 1e-12);
        assert!((c.loa_low - 0.0008).abs() < 1e-12);
        assert!((c.loa_high - 0.0792).abs() < 1e-12);
        assert!(((c.loa_high - c.loa_low) - 2.0 * LOA_Z * c.sd).abs() < 1e-12);

        assert!(matches!(bland_altman(&[1.0]), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn antisymmetric_differences_have_zero_bias() {
        let d = [0.3, -0.12, 0.07, -0.3, 0.12, -0.07];
        assert_eq!(bland_altman(&d).unwrap().bias, 0.0);
    }
}
