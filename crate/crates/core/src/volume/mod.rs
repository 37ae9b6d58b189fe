//! Voxel data model, mask file formats and dataset manifests.

mod manifest;
mod nifti_io;
mod segv;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use manifest::{load_manifest, DatasetManifest, ScanRecord, Sex, Split};
pub use segv::{read_segv, write_segv, write_segv_one_hot, SegvEncoding};

/// Spacing tolerance used when comparing geometries of two volumes (mm).
pub const SPACING_TOLERANCE_MM: f64 = 1e-6;

/// Millimeters per voxel along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelSpacing {
    dx: f64,
    dy: f64,
    dz: f64,
}

impl VoxelSpacing {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(dx) && ok(dy) && ok(dz) {
            Ok(Self { dx, dy, dz })
        } else {
            Err(Error::InvalidSpacing { dx, dy, dz })
        }
    }

    pub fn unit() -> Self {
        Self {
            dx: 1.0,
            dy: 1.0,
            dz: 1.0,
        }
    }

    /// Sagittal DESS spacing of the OAI knee scans.
    pub fn dess() -> Self {
        Self {
            dx: 0.31,
            dy: 0.46,
            dz: 0.70,
        }
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    pub fn along(&self, axis: Axis) -> f64 {
        self.as_array()[axis.index()]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    /// Multiply every component by `factor` (must be positive).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.dx * factor, self.dy * factor, self.dz * factor)
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .all(|(a, b)| (a - b).abs() <= SPACING_TOLERANCE_MM)
    }
}

/// Grid dimensions. Linear index is x-fastest, then y, then z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidDims([nx, ny, nz]));
        }
        Ok(Self { nx, ny, nz })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn along(&self, axis: Axis) -> usize {
        self.as_array()[axis.index()]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.nx;
        let rest = index / self.nx;
        [x, rest % self.ny, rest / self.ny]
    }

    /// Linear strides for x, y, z.
    pub fn strides(&self) -> [usize; 3] {
        [1, self.nx, self.nx * self.ny]
    }
}

/// One of the three grid axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" | "0" => Ok(Axis::X),
            "y" | "1" => Ok(Axis::Y),
            "z" | "2" => Ok(Axis::Z),
            other => Err(Error::InvalidInput(format!("unknown axis {other:?}"))),
        }
    }
}

/// Foreground tissue classes, coded 1..=4 in the label map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tissue {
    Femoral = 1,
    Tibial = 2,
    Patellar = 3,
    Meniscus = 4,
}

impl Tissue {
    pub const ALL: [Tissue; 4] = [
        Tissue::Femoral,
        Tissue::Tibial,
        Tissue::Patellar,
        Tissue::Meniscus,
    ];

    pub const CARTILAGE: [Tissue; 3] = [Tissue::Femoral, Tissue::Tibial, Tissue::Patellar];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(Tissue::Femoral),
            2 => Ok(Tissue::Tibial),
            3 => Ok(Tissue::Patellar),
            4 => Ok(Tissue::Meniscus),
            other => Err(Error::InvalidTissue(other)),
        }
    }

    pub fn is_cartilage(self) -> bool {
        self != Tissue::Meniscus
    }

    pub fn name(self) -> &'static str {
        match self {
            Tissue::Femoral => "femoral_cartilage",
            Tissue::Tibial => "tibial_cartilage",
            Tissue::Patellar => "patellar_cartilage",
            Tissue::Meniscus => "meniscus",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let name = name.trim().to_ascii_lowercase();
        Tissue::ALL
            .into_iter()
            .find(|t| t.name() == name || t.name().starts_with(&format!("{name}_")) || name == t.code().to_string())
            .ok_or_else(|| Error::InvalidInput(format!("unknown tissue {name:?}")))
    }
}

impl fmt::Display for Tissue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Tissue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Tissue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Tissue::from_name(&s).map_err(serde::de::Error::custom)
    }
}

/// Acquisition timepoint of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timepoint {
    Baseline,
    Year1,
}

impl Timepoint {
    pub fn as_str(self) -> &'static str {
        match self {
            Timepoint::Baseline => "baseline",
            Timepoint::Year1 => "year1",
        }
    }
}

impl fmt::Display for Timepoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Timepoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" | "v00" | "0" => Ok(Timepoint::Baseline),
            "year1" | "v01" | "1" => Ok(Timepoint::Year1),
            other => Err(Error::InvalidInput(format!("unknown timepoint {other:?}"))),
        }
    }
}

/// Dense multi-class label map. Codes are restricted to 0 (background)
/// and the four [`Tissue`] codes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    dims: Dims,
    spacing: VoxelSpacing,
    voxels: Vec<u8>,
    through_plane_axis: Axis,
}

impl LabelVolume {
    pub fn new(dims: Dims, spacing: VoxelSpacing, voxels: Vec<u8>) -> Result<Self> {
        if voxels.len() != dims.len() {
            return Err(Error::PayloadLength {
                expected: dims.len(),
                actual: voxels.len(),
            });
        }
        if let Some((index, &code)) = voxels.iter().enumerate().find(|(_, &c)| c > 4) {
            return Err(Error::UnknownCode {
                code: code as i64,
                index,
            });
        }
        Ok(Self {
            dims,
            spacing,
            voxels,
            through_plane_axis: Axis::Z,
        })
    }

    pub fn zeros(dims: Dims, spacing: VoxelSpacing) -> Self {
        Self {
            dims,
            spacing,
            voxels: vec![0; dims.len()],
            through_plane_axis: Axis::Z,
        }
    }

    pub fn with_through_plane_axis(mut self, axis: Axis) -> Self {
        self.through_plane_axis = axis;
        self
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn spacing(&self) -> VoxelSpacing {
        self.spacing
    }
    pub fn voxels(&self) -> &[u8] {
        &self.voxels
    }
    pub fn through_plane_axis(&self) -> Axis {
        self.through_plane_axis
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.voxels[self.dims.index(x, y, z)]
    }

    /// Set a voxel; panics on out-of-alphabet codes.
    pub fn set(&mut self, x: usize, y: usize, z: usize, code: u8) {
        assert!(code <= 4, "label code {code} outside alphabet");
        let i = self.dims.index(x, y, z);
        self.voxels[i] = code;
    }

    pub fn extract_mask(&self, tissue: Tissue) -> BinaryMask {
        let code = tissue.code();
        BinaryMask {
            dims: self.dims,
            spacing: self.spacing,
            voxels: self.voxels.iter().map(|&c| c == code).collect(),
            tissue,
        }
    }

    /// Build a label map from per-tissue masks; where masks overlap the
    /// lowest tissue code wins. Returns the volume and the overlap count.
    pub fn from_masks(masks: &[BinaryMask]) -> Result<(Self, usize)> {
        let first = masks
            .first()
            .ok_or_else(|| Error::InvalidInput("no masks to compose".into()))?;
        let mut voxels = vec![0u8; first.dims.len()];
        let mut overlap = 0;
        let mut sorted: Vec<&BinaryMask> = masks.iter().collect();
        sorted.sort_by_key(|m| m.tissue);
        for mask in sorted {
            first.check_geometry(mask)?;
            for (v, &on) in voxels.iter_mut().zip(&mask.voxels) {
                if on {
                    if *v == 0 {
                        *v = mask.tissue.code();
                    } else {
                        overlap += 1;
                    }
                }
            }
        }
        Ok((
            Self {
                dims: first.dims,
                spacing: first.spacing,
                voxels,
                through_plane_axis: Axis::Z,
            },
            overlap,
        ))
    }

    pub fn check_geometry(&self, other: &LabelVolume) -> Result<()> {
        check_geometry(self.dims, self.spacing, other.dims, other.spacing)
    }

    pub fn count_nonzero(&self) -> usize {
        self.voxels.iter().filter(|&&c| c != 0).count()
    }
}

/// Validated wrapper for [`LabelVolume::extract_mask`] that accepts a raw code.
pub fn extract_mask(volume: &LabelVolume, tissue_code: u8) -> Result<BinaryMask> {
    Ok(volume.extract_mask(Tissue::from_code(tissue_code)?))
}

/// Boolean single-tissue grid sharing the geometry of its source volume.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    dims: Dims,
    spacing: VoxelSpacing,
    voxels: Vec<bool>,
    tissue: Tissue,
}

impl BinaryMask {
    pub fn new(dims: Dims, spacing: VoxelSpacing, voxels: Vec<bool>, tissue: Tissue) -> Result<Self> {
        if voxels.len() != dims.len() {
            return Err(Error::PayloadLength {
                expected: dims.len(),
                actual: voxels.len(),
            });
        }
        Ok(Self {
            dims,
            spacing,
            voxels,
            tissue,
        })
    }

    pub fn empty(dims: Dims, spacing: VoxelSpacing, tissue: Tissue) -> Self {
        Self {
            dims,
            spacing,
            voxels: vec![false; dims.len()],
            tissue,
        }
    }

    pub fn from_fn(
        dims: Dims,
        spacing: VoxelSpacing,
        tissue: Tissue,
        mut f: impl FnMut(usize, usize, usize) -> bool,
    ) -> Self {
        let mut voxels = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    voxels.push(f(x, y, z));
                }
            }
        }
        Self {
            dims,
            spacing,
            voxels,
            tissue,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn spacing(&self) -> VoxelSpacing {
        self.spacing
    }
    pub fn voxels(&self) -> &[bool] {
        &self.voxels
    }
    pub fn tissue(&self) -> Tissue {
        self.tissue
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.voxels[self.dims.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, on: bool) {
        let i = self.dims.index(x, y, z);
        self.voxels[i] = on;
    }

    pub fn count(&self) -> usize {
        self.voxels.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.voxels.iter().any(|&v| v)
    }

    pub fn with_tissue(mut self, tissue: Tissue) -> Self {
        self.tissue = tissue;
        self
    }

    pub fn with_spacing(mut self, spacing: VoxelSpacing) -> Self {
        self.spacing = spacing;
        self
    }

    /// Same geometry, voxels replaced.
    pub fn map_voxels(&self, voxels: Vec<bool>) -> Result<Self> {
        Self::new(self.dims, self.spacing, voxels, self.tissue)
    }

    /// Checks that `other` has identical dims and spacing.
    pub fn check_geometry(&self, other: &BinaryMask) -> Result<()> {
        check_geometry(self.dims, self.spacing, other.dims, other.spacing)
    }
}

pub(crate) fn check_geometry(
    left_dims: Dims,
    left_spacing: VoxelSpacing,
    right_dims: Dims,
    right_spacing: VoxelSpacing,
) -> Result<()> {
    if left_dims != right_dims {
        return Err(Error::ShapeMismatch {
            left: left_dims,
            right: right_dims,
        });
    }
    if !left_spacing.approx_eq(&right_spacing) {
        return Err(Error::SpacingMismatch(format!(
            "{:?} vs {:?}",
            left_spacing.as_array(),
            right_spacing.as_array()
        )));
    }
    Ok(())
}

/// On-disk format of a label volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeFormat {
    Segv,
    Nifti,
}

impl VolumeFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let name = path.file_name()?.to_str()?.to_ascii_lowercase();
        if name.ends_with(".segv") {
            Some(VolumeFormat::Segv)
        } else if name.ends_with(".nii") || name.ends_with(".nii.gz") {
            Some(VolumeFormat::Nifti)
        } else {
            None
        }
    }
}

/// Read a label volume. Without a hint the format is taken from the file
/// extension, falling back to sniffing the SEGV magic.
pub fn load_volume(path: impl AsRef<Path>, format_hint: Option<VolumeFormat>) -> Result<LabelVolume> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = format_hint
        .or_else(|| VolumeFormat::from_path(path))
        .unwrap_or(if bytes.starts_with(segv::MAGIC) {
            VolumeFormat::Segv
        } else {
            VolumeFormat::Nifti
        });
    match format {
        VolumeFormat::Segv => read_segv(&bytes),
        VolumeFormat::Nifti => nifti_io::read_nifti(path),
    }
}

/// Write a label volume; format follows the extension (SEGV by default).
pub fn save_volume(volume: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match VolumeFormat::from_path(path).unwrap_or(VolumeFormat::Segv) {
        VolumeFormat::Segv => {
            let bytes = write_segv(volume);
            std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
        }
        VolumeFormat::Nifti => nifti_io::write_nifti(volume, path),
    }
}
