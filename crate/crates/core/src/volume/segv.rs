//! Native SEGV container.
//!
//! Little-endian layout:
//!
//! | offset | type    | field                                     |
//! |--------|---------|-------------------------------------------|
//! | 0      | [u8; 4] | magic `SEGV`                              |
//! | 4      | u16     | version (1)                               |
//! | 6      | u8      | encoding: 0 label map, 1 one-hot stack    |
//! | 7      | u8      | reserved (0)                              |
//! | 8      | u32 × 3 | nx, ny, nz                                |
//! | 20     | u32     | nchannels (1 for a label map)             |
//! | 24     | f32 × 3 | dx, dy, dz in mm                          |
//! | 36     | bytes   | payload, x fastest, then y, z, channel    |
//!
//! One-hot channel `c` (0-based) carries tissue code `c + 1`.

use std::io::{Cursor, Read};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Dims, LabelVolume, VoxelSpacing};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SEGV";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 36;

/// Overlapping one-hot voxels above this fraction of foreground are fatal.
pub const MAX_OVERLAP_FRACTION: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegvEncoding {
    LabelMap = 0,
    OneHot = 1,
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        format: "SEGV",
        reason: reason.into(),
    }
}

struct Header {
    encoding: SegvEncoding,
    dims: Dims,
    channels: usize,
    spacing: VoxelSpacing,
}

fn read_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_LEN {
        return Err(malformed(format!("file is {} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(|e| malformed(e.to_string()))?;
    if &magic != MAGIC {
        return Err(malformed(format!("bad magic {magic:?}")));
    }
    let rd = |r: std::io::Result<u32>| r.map_err(|e| malformed(e.to_string()));
    let version = cur.read_u16::<LittleEndian>().map_err(|e| malformed(e.to_string()))?;
    if version != VERSION {
        return Err(malformed(format!("unsupported version {version}")));
    }
    let encoding = match cur.read_u8().map_err(|e| malformed(e.to_string()))? {
        0 => SegvEncoding::LabelMap,
        1 => SegvEncoding::OneHot,
        other => return Err(malformed(format!("unknown encoding {other}"))),
    };
    let reserved = cur.read_u8().map_err(|e| malformed(e.to_string()))?;
    if reserved != 0 {
        return Err(malformed(format!("reserved byte is {reserved}, expected 0")));
    }
    let nx = rd(cur.read_u32::<LittleEndian>())? as usize;
    let ny = rd(cur.read_u32::<LittleEndian>())? as usize;
    let nz = rd(cur.read_u32::<LittleEndian>())? as usize;
    let channels = rd(cur.read_u32::<LittleEndian>())? as usize;
    let mut sp = [0f32; 3];
    for s in &mut sp {
        *s = cur.read_f32::<LittleEndian>().map_err(|e| malformed(e.to_string()))?;
    }
    let dims = Dims::new(nx, ny, nz).map_err(|e| malformed(e.to_string()))?;
    match encoding {
        SegvEncoding::LabelMap if channels != 1 => {
            return Err(malformed(format!("label map with {channels} channels")))
        }
        SegvEncoding::OneHot if !(1..=4).contains(&channels) => {
            return Err(malformed(format!("one-hot stack with {channels} channels (1..=4 allowed)")))
        }
        _ => {}
    }
    let spacing = VoxelSpacing::new(sp[0] as f64, sp[1] as f64, sp[2] as f64)?;
    Ok(Header {
        encoding,
        dims,
        channels,
        spacing,
    })
}

/// Decode a SEGV byte buffer.
pub fn read_segv(bytes: &[u8]) -> Result<LabelVolume> {
    let header = read_header(bytes)?;
    let n = header.dims.len();
    let payload = &bytes[HEADER_LEN..];
    let expected = n * header.channels;
    if payload.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            actual: payload.len(),
        });
    }
    let voxels = match header.encoding {
        SegvEncoding::LabelMap => payload.to_vec(),
        SegvEncoding::OneHot => collapse_one_hot(payload, n, header.channels)?,
    };
    LabelVolume::new(header.dims, header.spacing, voxels)
}

fn collapse_one_hot(payload: &[u8], n: usize, channels: usize) -> Result<Vec<u8>> {
    let mut voxels = vec![0u8; n];
    let mut overlap = 0usize;
    for c in 0..channels {
        let code = (c + 1) as u8;
        for (i, &b) in payload[c * n..(c + 1) * n].iter().enumerate() {
            match b {
                0 => {}
                1 => {
                    // channels are visited in code order, so the first writer is the lowest code
                    if voxels[i] == 0 {
                        voxels[i] = code;
                    } else {
                        overlap += 1;
                    }
                }
                other => {
                    return Err(Error::UnknownCode {
                        code: other as i64,
                        index: c * n + i,
                    })
                }
            }
        }
    }
    if overlap > 0 {
        let foreground = voxels.iter().filter(|&&v| v != 0).count().max(1);
        let fraction = overlap as f64 / foreground as f64;
        if fraction > MAX_OVERLAP_FRACTION {
            return Err(Error::ChannelOverlap {
                voxels: overlap,
                fraction: fraction * 100.0,
            });
        }
        log::warn!("one-hot channels overlap on {overlap} voxels; lowest tissue code kept");
    }
    Ok(voxels)
}

fn write_header(out: &mut Vec<u8>, volume: &LabelVolume, encoding: SegvEncoding, channels: u32) {
    let d = volume.dims();
    let s = volume.spacing();
    out.extend_from_slice(MAGIC);
    out.write_u16::<LittleEndian>(VERSION).unwrap();
    out.push(encoding as u8);
    out.push(0);
    for v in [d.nx, d.ny, d.nz] {
        out.write_u32::<LittleEndian>(v as u32).unwrap();
    }
    out.write_u32::<LittleEndian>(channels).unwrap();
    for v in s.as_array() {
        out.write_f32::<LittleEndian>(v as f32).unwrap();
    }
}

/// Encode as a label map (encoding 0).
pub fn write_segv(volume: &LabelVolume) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + volume.voxels().len());
    write_header(&mut out, volume, SegvEncoding::LabelMap, 1);
    out.extend_from_slice(volume.voxels());
    out
}

/// Encode as a four-channel one-hot stack (encoding 1).
pub fn write_segv_one_hot(volume: &LabelVolume) -> Vec<u8> {
    let n = volume.voxels().len();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n);
    write_header(&mut out, volume, SegvEncoding::OneHot, 4);
    for code in 1..=4u8 {
        out.extend(volume.voxels().iter().map(|&v| u8::from(v == code)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_bytes(encoding: u8, dims: [u32; 3], channels: u32, spacing: [f32; 3]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.write_u16::<LittleEndian>(1).unwrap();
        out.push(encoding);
        out.push(0);
        for d in dims {
            out.write_u32::<LittleEndian>(d).unwrap();
        }
        out.write_u32::<LittleEndian>(channels).unwrap();
        for s in spacing {
            out.write_f32::<LittleEndian>(s).unwrap();
        }
        out
    }

    #[test]
    fn all_zero_label_map() {
        let mut bytes = header_bytes(0, [4, 4, 4], 1, [0.31, 0.46, 0.70]);
        bytes.extend(std::iter::repeat_n(0u8, 64));
        let vol = read_segv(&bytes).unwrap();
        assert_eq!(vol.voxels().len(), 64);
        assert_eq!(vol.count_nonzero(), 0);
        assert!((vol.spacing().dx() - 0.31).abs() < 1e-6);
    }

    #[test]
    fn one_hot_single_voxel() {
        let mut bytes = header_bytes(1, [4, 4, 4], 2, [1.0, 1.0, 1.0]);
        let mut payload = vec![0u8; 128];
        payload[21] = 1; // channel 0 -> code 1
        bytes.extend(payload);
        let vol = read_segv(&bytes).unwrap();
        assert_eq!(vol.count_nonzero(), 1);
        assert_eq!(vol.voxels()[21], 1);
    }

    #[test]
    fn one_hot_overlap_lowest_code_wins_or_errors() {
        // 2000 foreground voxels, 1 overlap: 0.05% -> accepted with warning
        let mut bytes = header_bytes(1, [20, 10, 10], 2, [1.0, 1.0, 1.0]);
        let mut payload = vec![0u8; 4000];
        payload[..2000].fill(1);
        payload[2000 + 7] = 1;
        bytes.extend(payload);
        let vol = read_segv(&bytes).unwrap();
        assert_eq!(vol.voxels()[7], 1);

        // 10 overlaps on 2000 foreground: 0.5% -> error with the count
        let mut bytes = header_bytes(1, [20, 10, 10], 2, [1.0, 1.0, 1.0]);
        let mut payload = vec![0u8; 4000];
        payload[..2000].fill(1);
        payload[2000..2010].fill(1);
        bytes.extend(payload);
        match read_segv(&bytes) {
            Err(Error::ChannelOverlap { voxels, .. }) => assert_eq!(voxels, 10),
            other => panic!("expected overlap error, got {other:?}"),
        }
    }

    #[test]
    fn header_errors() {
        assert!(matches!(read_segv(b"SEGV"), Err(Error::MalformedHeader { .. })));
        let mut bad = header_bytes(0, [2, 2, 2], 1, [1.0, 1.0, 1.0]);
        bad[0] = b'X';
        assert!(matches!(read_segv(&bad), Err(Error::MalformedHeader { .. })));

        let mut short = header_bytes(0, [2, 2, 2], 1, [1.0, 1.0, 1.0]);
        short.extend([0u8; 7]);
        assert!(matches!(read_segv(&short), Err(Error::PayloadLength { expected: 8, actual: 7 })));

        let mut neg = header_bytes(0, [2, 2, 2], 1, [1.0, 0.0, 1.0]);
        neg.extend([0u8; 8]);
        assert!(matches!(read_segv(&neg), Err(Error::InvalidSpacing { .. })));

        let mut code = header_bytes(0, [2, 2, 2], 1, [1.0, 1.0, 1.0]);
        code.extend([0, 0, 9, 0, 0, 0, 0, 0]);
        assert!(matches!(read_segv(&code), Err(Error::UnknownCode { code: 9, index: 2 })));
    }

    #[test]
    fn one_hot_roundtrip() {
        let dims = Dims::new(3, 2, 2).unwrap();
        let voxels: Vec<u8> = (0..12).map(|i| (i % 5) as u8).collect();
        let vol = LabelVolume::new(dims, VoxelSpacing::dess(), voxels).unwrap();
        let back = read_segv(&write_segv_one_hot(&vol)).unwrap();
        assert_eq!(back.voxels(), vol.voxels());
    }
}
