use std::path::Path;

use ndarray::Array3;
use nifti::{IntoNdArray, NiftiHeader, NiftiObject, NiftiType, NiftiVolume, ReaderOptions};
use nifti::writer::WriterOptions;

use super::{Dims, LabelVolume, VoxelSpacing};
use crate::error::{Error, Result};

fn is_integer(t: NiftiType) -> bool {
    matches!(
        t,
        NiftiType::Uint8
            | NiftiType::Int8
            | NiftiType::Int16
            | NiftiType::Uint16
            | NiftiType::Int32
            | NiftiType::Uint32
            | NiftiType::Int64
            | NiftiType::Uint64
    )
}

pub(super) fn read_nifti(path: &Path) -> Result<LabelVolume> {
    let obj = ReaderOptions::new().read_file(path)?;
    let header = obj.header().clone();
    let dtype = header.data_type()?;
    if !is_integer(dtype) {
        return Err(Error::MalformedHeader {
            format: "NIfTI-1",
            reason: format!("datatype {dtype:?} is not an integer type"),
        });
    }
    let vol = obj.into_volume();
    let shape = vol.dim().to_vec();
    let extra: usize = shape.iter().skip(3).map(|&d| d as usize).product();
    if shape.len() < 3 || extra != 1 {
        return Err(Error::MalformedHeader {
            format: "NIfTI-1",
            reason: format!("expected a single 3D volume, got dims {shape:?}"),
        });
    }
    let dims = Dims::new(shape[0] as usize, shape[1] as usize, shape[2] as usize)?;
    let spacing = VoxelSpacing::new(
        header.pixdim[1] as f64,
        header.pixdim[2] as f64,
        header.pixdim[3] as f64,
    )?;
    let data = vol.into_ndarray::<i64>()?;
    let mut voxels = Vec::with_capacity(dims.len());
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                let idx: Vec<usize> = std::iter::once(x)
                    .chain([y, z])
                    .chain(std::iter::repeat_n(0, shape.len() - 3))
                    .collect();
                let code = data[idx.as_slice()];
                if !(0..=4).contains(&code) {
                    return Err(Error::UnknownCode {
                        code,
                        index: voxels.len(),
                    });
                }
                voxels.push(code as u8);
            }
        }
    }
    LabelVolume::new(dims, spacing, voxels)
}

pub(super) fn write_nifti(volume: &LabelVolume, path: &Path) -> Result<()> {
    let d = volume.dims();
    let s = volume.spacing();
    let array = Array3::from_shape_fn((d.nx, d.ny, d.nz), |(x, y, z)| volume.get(x, y, z));
    let header = NiftiHeader {
        pixdim: [1.0, s.dx() as f32, s.dy() as f32, s.dz() as f32, 1.0, 1.0, 1.0, 1.0],
        ..NiftiHeader::default()
    };
    WriterOptions::new(path).reference_header(&header).write_nifti(&array)?;
    Ok(())
}
