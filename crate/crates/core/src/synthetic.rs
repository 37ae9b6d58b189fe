//! Phantoms and the bundled synthetic dataset.
//!
//! The dataset is a set of knee-like label maps: flat cartilage plates
//! stacked along y, plus a meniscus blob, at DESS spacing. Three prediction
//! models accompany each scan:
//!
//! - `gt_copy`: identical to the ground truth
//! - `eroded`: the outer face layer removed from a fixed fraction of columns
//! - `noisy`: random boundary voxels flipped
//!
//! Everything is derived from a seeded ChaCha stream, so a given seed always
//! produces the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::surface::surface_grid;
use crate::volume::{save_volume, Axis, BinaryMask, Dims, LabelVolume, Sex, Timepoint, Tissue, VoxelSpacing};

pub const DEFAULT_SEED: u64 = 20_190_807;
pub const MODEL_GT_COPY: &str = "gt_copy";
pub const MODEL_ERODED: &str = "eroded";
pub const MODEL_NOISY: &str = "noisy";
pub const MODELS: [&str; 3] = [MODEL_GT_COPY, MODEL_ERODED, MODEL_NOISY];

/// Fraction of columns whose outer layer the eroded model drops.
pub const EROSION_FRACTION: f64 = 0.15;
/// Probability that the noisy model flips a given surface voxel.
pub const NOISE_FLIP_PROBABILITY: f64 = 0.2;

/// A slab `thickness` voxels thick across `axis`, centred, leaving `margin`
/// empty voxels on every lateral face.
pub fn slab(dims: Dims, spacing: VoxelSpacing, axis: Axis, thickness: usize, margin: usize) -> BinaryMask {
    let a = axis.index();
    let n = dims.as_array();
    let start = (n[a].saturating_sub(thickness)) / 2;
    BinaryMask::from_fn(dims, spacing, Tissue::Femoral, |x, y, z| {
        let c = [x, y, z];
        (0..3).all(|i| {
            if i == a {
                (start..start + thickness).contains(&c[i])
            } else {
                c[i] >= margin && c[i] + margin < n[i]
            }
        })
    })
}

/// Solid ball of `radius` voxels (in index space) centred in a cube just
/// large enough to hold it with two voxels of clearance.
pub fn ball(radius: usize, spacing: VoxelSpacing) -> BinaryMask {
    let n = 2 * radius + 5;
    let c = (radius + 2) as i64;
    let r2 = (radius * radius) as i64;
    let dims = Dims::new(n, n, n).unwrap();
    BinaryMask::from_fn(dims, spacing, Tissue::Femoral, |x, y, z| {
        let (a, b, d) = (x as i64 - c, y as i64 - c, z as i64 - c);
        a * a + b * b + d * d <= r2
    })
}

/// Ground truth occupying `occupied` slices along z, and a prediction that
/// matches it on the first `matched` of them and is empty elsewhere.
pub fn half_match(dims: Dims, occupied: std::ops::Range<usize>, matched: usize) -> (BinaryMask, BinaryMask) {
    let sp = VoxelSpacing::unit();
    let inside = |x: usize, y: usize| x >= 1 && y >= 1 && x + 1 < dims.nx && y + 1 < dims.ny;
    let gt = BinaryMask::from_fn(dims, sp, Tissue::Femoral, |x, y, z| inside(x, y) && occupied.contains(&z));
    let cut = occupied.start + matched;
    let pred = BinaryMask::from_fn(dims, sp, Tissue::Femoral, |x, y, z| {
        inside(x, y) && occupied.contains(&z) && z < cut
    });
    (pred, gt)
}

/// Random mask with roughly `density` foreground.
pub fn random_mask(rng: &mut impl Rng, dims: Dims, spacing: VoxelSpacing, density: f64) -> BinaryMask {
    let voxels = (0..dims.len()).map(|_| rng.random_bool(density)).collect();
    BinaryMask::new(dims, spacing, voxels, Tissue::Femoral).unwrap()
}

/// Per-subject anatomy parameters.
#[derive(Debug, Clone, Copy)]
struct Anatomy {
    femoral: usize,
    tibial: usize,
    patellar: usize,
    x0: usize,
    x1: usize,
    z0: usize,
    z1: usize,
    meniscus_radius: f64,
    /// First slice of the band that thins at follow-up.
    thin_z: usize,
}

pub const DATASET_DIMS: [usize; 3] = [48, 40, 16];
/// Plate thickness rises by one voxel every this many columns along x.
const THICKNESS_STEP_COLUMNS: usize = 10;
const THINNING_SLICES: usize = 5;

#[derive(Debug, Clone)]
pub struct SyntheticScan {
    pub subject_id: String,
    pub timepoint: Timepoint,
    pub kl_grade: u8,
    pub bmi: f64,
    pub age: f64,
    pub sex: Sex,
    pub ground_truth: LabelVolume,
    /// In [`MODELS`] order.
    pub predictions: Vec<(String, LabelVolume)>,
}

impl SyntheticScan {
    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.subject_id, self.timepoint)
    }
}

fn anatomy(rng: &mut ChaCha8Rng) -> Anatomy {
    let z0 = rng.random_range(1..=2);
    let z1 = DATASET_DIMS[2] - rng.random_range(1..=2);
    Anatomy {
        femoral: rng.random_range(4..=5),
        tibial: rng.random_range(3..=4),
        patellar: rng.random_range(4..=5),
        x0: rng.random_range(3..=5),
        x1: DATASET_DIMS[0] - rng.random_range(3..=5),
        z0,
        z1,
        meniscus_radius: rng.random_range(3.0..4.0),
        thin_z: rng.random_range(z0..=z1 - THINNING_SLICES),
    }
}

/// Cartilage plates stacked along y, thickening in steps along x. At
/// follow-up a band of slices loses its top layer.
fn label_map(a: &Anatomy, timepoint: Timepoint) -> LabelVolume {
    let dims = Dims::new(DATASET_DIMS[0], DATASET_DIMS[1], DATASET_DIMS[2]).unwrap();
    let mut vol = LabelVolume::zeros(dims, VoxelSpacing::dess());
    let plates = [
        (Tissue::Femoral, 2, a.femoral, a.x0, a.x1),
        (Tissue::Tibial, 12, a.tibial, a.x0, a.x1),
        (Tissue::Patellar, 21, a.patellar, a.x0 + 6, a.x1 - 6),
    ];
    let thinned = |z: usize| timepoint == Timepoint::Year1 && (a.thin_z..a.thin_z + THINNING_SLICES).contains(&z);
    for z in a.z0..a.z1 {
        for x in 0..dims.nx {
            for &(tissue, y0, base, x0, x1) in &plates {
                if !(x0..x1).contains(&x) {
                    continue;
                }
                let t = base + (x - x0) / THICKNESS_STEP_COLUMNS - thinned(z) as usize;
                for y in y0..y0 + t {
                    vol.set(x, y, z, tissue.code());
                }
            }
        }
    }
    let (cx, cy, cz) = (24.0, 34.0, 8.0);
    let sp = vol.spacing();
    let r = a.meniscus_radius * sp.dz();
    for z in 0..dims.nz {
        for y in 30..dims.ny {
            for x in 0..dims.nx {
                let d2 = ((x as f64 - cx) * sp.dx()).powi(2)
                    + ((y as f64 - cy) * sp.dy()).powi(2)
                    + ((z as f64 - cz) * sp.dz()).powi(2);
                if d2 <= r * r {
                    vol.set(x, y, z, Tissue::Meniscus.code());
                }
            }
        }
    }
    vol
}

/// Drop the top (highest y) voxel of every tissue column inside one
/// contiguous run of x covering [`EROSION_FRACTION`] of the grid width.
fn erode(gt: &LabelVolume, rng: &mut ChaCha8Rng) -> LabelVolume {
    let d = gt.dims();
    let mut out = gt.clone();
    let width = (EROSION_FRACTION * d.nx as f64).round() as usize;
    for t in Tissue::ALL {
        let start = rng.random_range(0..=d.nx - width);
        for z in 0..d.nz {
            for x in start..start + width {
                if let Some(y) = (0..d.ny).rev().find(|&y| gt.get(x, y, z) == t.code()) {
                    out.set(x, y, z, 0);
                }
            }
        }
    }
    out
}

/// Flip surface voxels of each tissue: remove foreground surface voxels or
/// grow into background neighbours of the surface.
fn add_noise(gt: &LabelVolume, rng: &mut ChaCha8Rng) -> LabelVolume {
    let d = gt.dims();
    let mut out = gt.clone();
    for t in Tissue::ALL {
        let mask = gt.extract_mask(t);
        let surface = surface_grid(d, mask.voxels());
        for (i, &on) in surface.iter().enumerate() {
            if !on || !rng.random_bool(NOISE_FLIP_PROBABILITY) {
                continue;
            }
            let [x, y, z] = d.coords(i);
            if rng.random_bool(0.5) {
                out.set(x, y, z, 0);
            } else if y + 1 < d.ny && gt.get(x, y + 1, z) == 0 && out.get(x, y + 1, z) == 0 {
                out.set(x, y + 1, z, t.code());
            }
        }
    }
    out
}

/// Generate the dataset for `subjects` subjects, two timepoints each.
pub fn generate(subjects: usize, seed: u64) -> Vec<SyntheticScan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scans = Vec::with_capacity(2 * subjects);
    for s in 0..subjects {
        let subject_id = format!("S{:02}", s + 1);
        let a = anatomy(&mut rng);
        let kl_grade = rng.random_range(1..=4u8);
        let bmi = (rng.random_range(200..=350) as f64) / 10.0;
        let age = rng.random_range(45..=79) as f64;
        let sex = if rng.random_bool(0.5) { Sex::Female } else { Sex::Male };
        for timepoint in [Timepoint::Baseline, Timepoint::Year1] {
            let gt = label_map(&a, timepoint);
            let eroded = erode(&gt, &mut rng);
            let noisy = add_noise(&gt, &mut rng);
            scans.push(SyntheticScan {
                subject_id: subject_id.clone(),
                timepoint,
                kl_grade,
                bmi,
                age,
                sex,
                predictions: vec![
                    (MODEL_GT_COPY.to_string(), gt.clone()),
                    (MODEL_ERODED.to_string(), eroded),
                    (MODEL_NOISY.to_string(), noisy),
                ],
                ground_truth: gt,
            });
        }
    }
    scans
}

/// Write volumes as SEGV plus a `manifest.csv`; returns the manifest path.
pub fn write_dataset(dir: &Path, scans: &[SyntheticScan]) -> Result<PathBuf> {
    let mut dirs = vec!["gt".to_string()];
    dirs.extend(MODELS.iter().map(|m| m.to_string()));
    for d in &dirs {
        fs::create_dir_all(dir.join(d)).map_err(|e| Error::io(dir.join(d), e))?;
    }
    let mut csv = String::from("# through_plane_axis: z\nsubject_id,timepoint,split,kl_grade,bmi,age,sex,ground_truth_path");
    for m in MODELS {
        write!(csv, ",model:{m}").unwrap();
    }
    csv.push('\n');
    for scan in scans {
        let stem = scan.file_stem();
        let gt_rel = format!("gt/{stem}.segv");
        save_volume(&scan.ground_truth, dir.join(&gt_rel))?;
        write!(
            csv,
            "{},{},test,{},{},{},{},{}",
            scan.subject_id,
            scan.timepoint,
            scan.kl_grade,
            scan.bmi,
            scan.age,
            match scan.sex {
                Sex::Female => "F",
                Sex::Male => "M",
            },
            gt_rel
        )
        .unwrap();
        for (model, vol) in &scan.predictions {
            let rel = format!("{model}/{stem}.segv");
            save_volume(vol, dir.join(&rel))?;
            write!(csv, ",{rel}").unwrap();
        }
        csv.push('\n');
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
