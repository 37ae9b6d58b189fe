//! Mask boundaries, exact anisotropic Euclidean distance transform and
//! average symmetric surface distance (ASSD).
//!
//! Surfaces are 6-connected: a true voxel is on the surface when at least one
//! face neighbor is false or lies outside the grid. Distances are measured
//! between voxel centers in millimeters.
//!
//! The transform is the separable lower-envelope-of-parabolas algorithm run
//! once per axis, with each axis weighted by its squared spacing, so the
//! result is the exact Euclidean distance on the anisotropic grid rather than
//! a chamfer approximation.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Dims, VoxelSpacing};

/// Surface voxels of a mask, in linear-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceVoxelSet {
    dims: Dims,
    spacing: VoxelSpacing,
    coords: Vec<[usize; 3]>,
}

impl SurfaceVoxelSet {
    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn spacing(&self) -> VoxelSpacing {
        self.spacing
    }
    pub fn coords(&self) -> &[[usize; 3]] {
        &self.coords
    }
    pub fn len(&self) -> usize {
        self.coords.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Dense boolean grid with the surface voxels set.
    pub fn to_grid(&self) -> Vec<bool> {
        let mut grid = vec![false; self.dims.len()];
        for &[x, y, z] in &self.coords {
            grid[self.dims.index(x, y, z)] = true;
        }
        grid
    }
}

/// True where a voxel is set and has at least one unset (or out-of-grid) face neighbor.
pub(crate) fn surface_grid(dims: Dims, voxels: &[bool]) -> Vec<bool> {
    let [nx, ny, nz] = dims.as_array();
    let [sx, sy, sz] = dims.strides();
    let mut out = vec![false; voxels.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = dims.index(x, y, z);
                if !voxels[i] {
                    continue;
                }
                out[i] = x == 0
                    || x + 1 == nx
                    || y == 0
                    || y + 1 == ny
                    || z == 0
                    || z + 1 == nz
                    || !voxels[i - sx]
                    || !voxels[i + sx]
                    || !voxels[i - sy]
                    || !voxels[i + sy]
                    || !voxels[i - sz]
                    || !voxels[i + sz];
            }
        }
    }
    out
}

pub fn extract_surface(mask: &BinaryMask) -> SurfaceVoxelSet {
    let dims = mask.dims();
    let grid = surface_grid(dims, mask.voxels());
    let coords = grid
        .iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .map(|(i, _)| dims.coords(i))
        .collect();
    SurfaceVoxelSet {
        dims,
        spacing: mask.spacing(),
        coords,
    }
}

/// Distance in mm from each voxel center to the nearest reference voxel center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceField {
    dims: Dims,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.dims.index(x, y, z)]
    }
}

pub fn distance_field(reference: &SurfaceVoxelSet) -> Result<DistanceField> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let sq = squared_edt(reference.dims, reference.spacing, &reference.to_grid());
    Ok(DistanceField {
        dims: reference.dims,
        values: sq.into_iter().map(f64::sqrt).collect(),
    })
}

/// Squared distance (mm²) from every voxel to the nearest `seed` voxel.
/// Voxels are `f64::INFINITY` when there are no seeds.
pub fn squared_edt(dims: Dims, spacing: VoxelSpacing, seeds: &[bool]) -> Vec<f64> {
    assert_eq!(seeds.len(), dims.len());
    let mut field: Vec<f64> = seeds
        .iter()
        .map(|&s| if s { 0.0 } else { f64::INFINITY })
        .collect();
    let shape = dims.as_array();
    let strides = dims.strides();
    let sp = spacing.as_array();
    for axis in 0..3 {
        let n = shape[axis];
        if n == 1 {
            continue;
        }
        let stride = strides[axis];
        let weight = sp[axis] * sp[axis];
        let starts: Vec<usize> = (0..dims.len())
            .filter(|&i| (i / stride).is_multiple_of(n))
            .collect();
        let lines: Vec<Vec<f64>> = starts
            .par_iter()
            .map(|&start| {
                let line: Vec<f64> = (0..n).map(|k| field[start + k * stride]).collect();
                lower_envelope(&line, weight)
            })
            .collect();
        for (start, line) in starts.into_iter().zip(lines) {
            for (k, v) in line.into_iter().enumerate() {
                field[start + k * stride] = v;
            }
        }
    }
    field
}

/// One-dimensional squared distance transform: `min_p w·(q−p)² + f(p)`.
fn lower_envelope(f: &[f64], weight: f64) -> Vec<f64> {
    let n = f.len();
    // parabola apexes and the boundaries between them
    let mut apex: Vec<usize> = Vec::with_capacity(n);
    let mut bound: Vec<f64> = Vec::with_capacity(n + 1);
    let key = |q: usize| f[q] + weight * (q * q) as f64;
    for (q, fq) in f.iter().enumerate() {
        if !fq.is_finite() {
            continue;
        }
        loop {
            let Some(&v) = apex.last() else {
                apex.push(q);
                bound.clear();
                bound.push(f64::NEG_INFINITY);
                break;
            };
            let s = (key(q) - key(v)) / (2.0 * weight * (q - v) as f64);
            if s <= *bound.last().unwrap() {
                apex.pop();
                bound.pop();
                continue;
            }
            apex.push(q);
            bound.push(s);
            break;
        }
    }
    if apex.is_empty() {
        return vec![f64::INFINITY; n];
    }
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for q in 0..n {
        while k + 1 < apex.len() && bound[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - apex[k] as f64;
        out.push(weight * d * d + f[apex[k]]);
    }
    out
}

/// Which operand of an ASSD computation was empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptySide {
    First,
    Second,
    Both,
}

/// ASSD result. Empty operands produce `Undefined` so callers choose how to
/// count them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Assd {
    Defined(f64),
    Undefined(EmptySide),
}

impl Assd {
    pub fn value(self) -> Option<f64> {
        match self {
            Assd::Defined(v) => Some(v),
            Assd::Undefined(_) => None,
        }
    }
}

/// Average symmetric surface distance in mm.
pub fn assd_mm(a: &BinaryMask, b: &BinaryMask) -> Result<Assd> {
    a.check_geometry(b)?;
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(Assd::Undefined(EmptySide::Both)),
        (true, false) => return Ok(Assd::Undefined(EmptySide::First)),
        (false, true) => return Ok(Assd::Undefined(EmptySide::Second)),
        _ => {}
    }
    let sa = extract_surface(a);
    let sb = extract_surface(b);
    let to_b = distance_field(&sb)?;
    let to_a = distance_field(&sa)?;
    let dims = a.dims();
    let sum_a: f64 = sa.coords.iter().map(|&[x, y, z]| to_b.values[dims.index(x, y, z)]).sum();
    let sum_b: f64 = sb.coords.iter().map(|&[x, y, z]| to_a.values[dims.index(x, y, z)]).sum();
    Ok(Assd::Defined((sum_a + sum_b) / (sa.len() + sb.len()) as f64))
}
