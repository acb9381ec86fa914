//! Minimal NIfTI-1 single-file (`.nii` / `.nii.gz`) reader and writer.
//!
//! Only what the pipeline needs is honoured: dims, pixdim, datatype,
//! scl_slope/scl_inter and the orientation affine (sform, then qform,
//! then plain pixdim scaling). Loaded data is reordered into the canonical
//! LPS voxel order (see [`CANONICAL_AXES`](super::CANONICAL_AXES)).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::grid::{CtVolume, Grid, LiverMask, Provenance};
use crate::{Error, Result};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;

/// NIfTI datatype codes the reader understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    Uint8,
    Int8,
    Int16,
    Uint16,
    Int32,
    Uint32,
    Int64,
    Uint64,
    Float32,
    Float64,
}

impl Datatype {
    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Datatype::Uint8,
            256 => Datatype::Int8,
            4 => Datatype::Int16,
            512 => Datatype::Uint16,
            8 => Datatype::Int32,
            768 => Datatype::Uint32,
            1024 => Datatype::Int64,
            1280 => Datatype::Uint64,
            16 => Datatype::Float32,
            64 => Datatype::Float64,
            other => return Err(Error::UnsupportedFormat(other)),
        })
    }

    pub fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int8 => 256,
            Datatype::Int16 => 4,
            Datatype::Uint16 => 512,
            Datatype::Int32 => 8,
            Datatype::Uint32 => 768,
            Datatype::Int64 => 1024,
            Datatype::Uint64 => 1280,
            Datatype::Float32 => 16,
            Datatype::Float64 => 64,
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            Datatype::Uint8 | Datatype::Int8 => 1,
            Datatype::Int16 | Datatype::Uint16 => 2,
            Datatype::Int32 | Datatype::Uint32 | Datatype::Float32 => 4,
            Datatype::Int64 | Datatype::Uint64 | Datatype::Float64 => 8,
        }
    }
}

/// Header fields that survive parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub dims: [usize; 3],
    pub pixdim: [f64; 3],
    pub datatype: Datatype,
    pub scl_slope: f64,
    pub scl_inter: f64,
    /// Voxel-to-RAS affine of the file as stored (before canonicalization).
    pub affine: [[f64; 4]; 3],
}

struct Cursor<'a> {
    bytes: &'a [u8],
    big_endian: bool,
}

impl Cursor<'_> {
    fn array<const N: usize>(&self, at: usize) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[at..at + N]);
        if self.big_endian {
            out.reverse();
        }
        out
    }

    fn i16(&self, at: usize) -> i16 {
        i16::from_le_bytes(self.array(at))
    }

    fn i32(&self, at: usize) -> i32 {
        i32::from_le_bytes(self.array(at))
    }

    fn f32(&self, at: usize) -> f64 {
        f32::from_le_bytes(self.array(at)) as f64
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Parses a header and returns it with the byte offset of the voxel data.
pub fn parse_header(bytes: &[u8]) -> Result<(Header, usize, bool)> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::parse(
            "sizeof_hdr",
            format!("file holds {} bytes, header needs {HEADER_SIZE}", bytes.len()),
        ));
    }
    let le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let big_endian = match (le, be) {
        (348, _) => false,
        (_, 348) => true,
        _ => {
            return Err(Error::parse(
                "sizeof_hdr",
                format!("expected 348, found {le}"),
            ))
        }
    };
    let c = Cursor { bytes, big_endian };

    if &bytes[344..348] != b"n+1\0" {
        return Err(Error::parse(
            "magic",
            format!(
                "expected single-file \"n+1\", found {:?}",
                String::from_utf8_lossy(&bytes[344..348])
            ),
        ));
    }

    let mut dim = [0i16; 8];
    for (n, d) in dim.iter_mut().enumerate() {
        *d = c.i16(40 + 2 * n);
    }
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::parse("dim", format!("dim[0] = {ndim} outside 1..=7")));
    }
    let ndim = ndim as usize;
    if let Some(bad) = dim[1..=ndim].iter().find(|&&d| d < 1) {
        return Err(Error::parse("dim", format!("axis length {bad} < 1")));
    }
    if ndim < 3 {
        return Err(Error::Dimensionality(ndim));
    }
    let extra = dim[4..=ndim].iter().filter(|&&d| d > 1).count();
    if extra > 0 {
        return Err(Error::Dimensionality(3 + extra));
    }
    let dims = [dim[1] as usize, dim[2] as usize, dim[3] as usize];

    let datatype = Datatype::from_code(c.i16(70))?;
    let bitpix = c.i16(72);
    if bitpix as usize != datatype.bytes() * 8 {
        return Err(Error::parse(
            "bitpix",
            format!("{bitpix} does not match datatype {:?}", datatype),
        ));
    }

    let mut pixdim = [0f64; 8];
    for (n, p) in pixdim.iter_mut().enumerate() {
        *p = c.f32(76 + 4 * n);
    }
    let spacing = [pixdim[1].abs(), pixdim[2].abs(), pixdim[3].abs()];
    if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::parse(
            "pixdim",
            format!("spatial pixdim must be > 0, found {:?}", &pixdim[1..4]),
        ));
    }

    let vox_offset = c.f32(108);
    if !(vox_offset.is_finite() && vox_offset >= HEADER_SIZE as f64) {
        return Err(Error::parse("vox_offset", format!("{vox_offset} < {HEADER_SIZE}")));
    }

    let mut scl_slope = c.f32(112);
    let mut scl_inter = c.f32(116);
    if !scl_slope.is_finite() || scl_slope == 0.0 {
        scl_slope = 1.0;
        scl_inter = 0.0;
    }
    if !scl_inter.is_finite() {
        return Err(Error::parse("scl_inter", "non-finite intercept"));
    }

    let qform_code = c.i16(252);
    let sform_code = c.i16(254);
    let affine = if sform_code > 0 {
        let mut a = [[0.0; 4]; 3];
        for (r, row) in a.iter_mut().enumerate() {
            for (col, v) in row.iter_mut().enumerate() {
                *v = c.f32(280 + 16 * r + 4 * col);
            }
        }
        a
    } else if qform_code > 0 {
        let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        quatern_to_affine(
            [c.f32(256), c.f32(260), c.f32(264)],
            [c.f32(268), c.f32(272), c.f32(276)],
            [spacing[0], spacing[1], spacing[2] * qfac],
        )
    } else {
        [
            [spacing[0], 0.0, 0.0, 0.0],
            [0.0, spacing[1], 0.0, 0.0],
            [0.0, 0.0, spacing[2], 0.0],
        ]
    };
    if affine.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::parse("srow", "non-finite affine entry"));
    }

    Ok((
        Header {
            dims,
            pixdim: spacing,
            datatype,
            scl_slope,
            scl_inter,
            affine,
        },
        vox_offset as usize,
        big_endian,
    ))
}

fn quatern_to_affine(bcd: [f64; 3], offset: [f64; 3], scale: [f64; 3]) -> [[f64; 4]; 3] {
    let [b, c, d] = bcd;
    let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
    let r = [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - b * b - c * c],
    ];
    let mut out = [[0.0; 4]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = r[i][j] * scale[j];
        }
        out[i][3] = offset[i];
    }
    out
}

fn decode_payload(bytes: &[u8], header: &Header, big_endian: bool) -> Vec<f64> {
    let width = header.datatype.bytes();
    let c = Cursor { bytes, big_endian };
    let n = bytes.len() / width;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let at = i * width;
        let v = match header.datatype {
            Datatype::Uint8 => bytes[at] as f64,
            Datatype::Int8 => bytes[at] as i8 as f64,
            Datatype::Int16 => c.i16(at) as f64,
            Datatype::Uint16 => u16::from_le_bytes(c.array(at)) as f64,
            Datatype::Int32 => c.i32(at) as f64,
            Datatype::Uint32 => u32::from_le_bytes(c.array(at)) as f64,
            Datatype::Int64 => i64::from_le_bytes(c.array(at)) as f64,
            Datatype::Uint64 => u64::from_le_bytes(c.array(at)) as f64,
            Datatype::Float32 => f32::from_le_bytes(c.array(at)) as f64,
            Datatype::Float64 => f64::from_le_bytes(c.array(at)),
        };
        out.push(v);
    }
    out
}

/// Parsed file: header plus stored (unscaled) values in file voxel order.
fn read_raw(path: &Path) -> Result<(Header, Vec<f64>)> {
    let bytes = read_bytes(path)?;
    let (header, offset, big_endian) = parse_header(&bytes)?;
    let n: usize = header.dims.iter().product();
    let expected = n * header.datatype.bytes();
    let payload = bytes.get(offset..).unwrap_or(&[]);
    if payload.len() != expected {
        return Err(Error::parse(
            "dim",
            format!(
                "dims {:?} need {expected} payload bytes, file has {}",
                header.dims,
                payload.len()
            ),
        ));
    }
    let values = decode_payload(payload, &header, big_endian);
    Ok((header, values))
}

/// How file voxel axes map onto canonical axes.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AxisMap {
    /// `target[a]`: canonical axis receiving file axis `a`.
    target: [usize; 3],
    /// Whether file axis `a` runs opposite to its canonical direction.
    flip: [bool; 3],
}

/// Canonical world direction sign per RAS axis: -x (left), -y (posterior), +z.
const CANONICAL_SIGN: [f64; 3] = [-1.0, -1.0, 1.0];

fn axis_map(affine: &[[f64; 4]; 3]) -> AxisMap {
    // Greedy assignment on the largest remaining rotation component.
    let mut target = [usize::MAX; 3];
    let mut flip = [false; 3];
    let mut used_world = [false; 3];
    for _ in 0..3 {
        let mut best: Option<(f64, usize, usize)> = None;
        for (a, &t) in target.iter().enumerate() {
            if t != usize::MAX {
                continue;
            }
            for (w, used) in used_world.iter().enumerate() {
                if *used {
                    continue;
                }
                let v = affine[w][a].abs();
                if best.is_none_or(|(b, _, _)| v > b) {
                    best = Some((v, a, w));
                }
            }
        }
        let (_, a, w) = best.expect("an unassigned axis remains");
        target[a] = w;
        used_world[w] = true;
        flip[a] = affine[w][a] * CANONICAL_SIGN[w] < 0.0;
    }
    AxisMap { target, flip }
}

fn canonicalize<T: Copy>(
    header: &Header,
    values: &[T],
) -> Result<(Grid, Vec<T>)> {
    let map = axis_map(&header.affine);
    let src = header.dims;
    let mut dims = [0usize; 3];
    let mut spacing = [0f64; 3];
    let mut affine = [[0f64; 4]; 3];
    let mut origin = [header.affine[0][3], header.affine[1][3], header.affine[2][3]];
    for a in 0..3 {
        let t = map.target[a];
        dims[t] = src[a];
        spacing[t] = header.pixdim[a];
        let sign = if map.flip[a] { -1.0 } else { 1.0 };
        for (w, row) in affine.iter_mut().enumerate() {
            row[t] = sign * header.affine[w][a];
        }
        if map.flip[a] {
            for (w, o) in origin.iter_mut().enumerate() {
                *o += header.affine[w][a] * (src[a] - 1) as f64;
            }
        }
    }
    for (w, row) in affine.iter_mut().enumerate() {
        row[3] = origin[w];
    }
    let grid = Grid::from_affine(dims, spacing, affine)?;

    let identity = map.target == [0, 1, 2] && map.flip == [false; 3];
    if identity {
        return Ok((grid, values.to_vec()));
    }
    let mut out = values.to_vec();
    let mut src_idx = 0usize;
    for k in 0..src[2] {
        for j in 0..src[1] {
            for i in 0..src[0] {
                let file = [i, j, k];
                let mut dst = [0usize; 3];
                for a in 0..3 {
                    dst[map.target[a]] = if map.flip[a] {
                        src[a] - 1 - file[a]
                    } else {
                        file[a]
                    };
                }
                out[grid.index(dst[0], dst[1], dst[2])] = values[src_idx];
                src_idx += 1;
            }
        }
    }
    Ok((grid, out))
}

/// Loads a CT volume in HU (slope/intercept applied) in canonical order.
pub fn load_volume(path: impl AsRef<Path>) -> Result<CtVolume> {
    let (header, stored) = read_raw(path.as_ref())?;
    let hu: Vec<f64> = stored
        .iter()
        .map(|&v| v * header.scl_slope + header.scl_inter)
        .collect();
    if hu.iter().any(|v| !v.is_finite()) {
        return Err(Error::parse("data", "non-finite voxel value after scaling"));
    }
    let (grid, data) = canonicalize(&header, &hu)?;
    CtVolume::new(grid, data)
}

/// Loads a binary mask; any stored value other than 0 or 1 is rejected.
pub fn load_mask(path: impl AsRef<Path>, provenance: Provenance) -> Result<LiverMask> {
    let (header, stored) = read_raw(path.as_ref())?;
    let mut bits = Vec::with_capacity(stored.len());
    for &v in &stored {
        let v = v * header.scl_slope + header.scl_inter;
        if v == 0.0 {
            bits.push(false);
        } else if v == 1.0 {
            bits.push(true);
        } else {
            return Err(Error::parse("data", format!("mask value {v} is not 0 or 1")));
        }
    }
    let (grid, data) = canonicalize(&header, &bits)?;
    LiverMask::new(grid, data, provenance)
}

fn encode_header(grid: &Grid, datatype: Datatype) -> Vec<u8> {
    let mut h = vec![0u8; VOX_OFFSET];
    let put = |h: &mut Vec<u8>, at: usize, b: &[u8]| h[at..at + b.len()].copy_from_slice(b);
    put(&mut h, 0, &(HEADER_SIZE as i32).to_le_bytes());
    let dims = grid.dims();
    let dim: [i16; 8] = [3, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1];
    for (n, d) in dim.iter().enumerate() {
        put(&mut h, 40 + 2 * n, &d.to_le_bytes());
    }
    put(&mut h, 70, &datatype.code().to_le_bytes());
    put(&mut h, 72, &((datatype.bytes() * 8) as i16).to_le_bytes());
    let s = grid.spacing();
    let pixdim = [1.0f32, s[0] as f32, s[1] as f32, s[2] as f32, 0.0, 0.0, 0.0, 0.0];
    for (n, p) in pixdim.iter().enumerate() {
        put(&mut h, 76 + 4 * n, &p.to_le_bytes());
    }
    put(&mut h, 108, &(VOX_OFFSET as f32).to_le_bytes());
    put(&mut h, 112, &1.0f32.to_le_bytes());
    put(&mut h, 116, &0.0f32.to_le_bytes());
    // xyzt_units: millimetres
    h[123] = 2;
    put(&mut h, 254, &1i16.to_le_bytes());
    for (r, row) in grid.affine().iter().enumerate() {
        for (col, v) in row.iter().enumerate() {
            put(&mut h, 280 + 16 * r + 4 * col, &(*v as f32).to_le_bytes());
        }
    }
    put(&mut h, 344, b"n+1\0");
    h
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let gz = path
        .file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.ends_with(".gz"));
    let out = if gz {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes.to_vec()
    };
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a volume as FLOAT32; gzip when the file name ends in `.gz`.
/// Geometry is stored as float32 sform, so it round-trips exactly only
/// when it is representable in single precision.
pub fn save_volume(path: impl AsRef<Path>, vol: &CtVolume) -> Result<()> {
    let mut bytes = encode_header(vol.grid(), Datatype::Float32);
    bytes.reserve(vol.data().len() * 4);
    for &v in vol.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_bytes(path.as_ref(), &bytes)
}

/// Writes a mask as UINT8 with the grid's affine.
pub fn save_mask(path: impl AsRef<Path>, mask: &LiverMask) -> Result<()> {
    let mut bytes = encode_header(mask.grid(), Datatype::Uint8);
    bytes.extend(mask.data().iter().map(|&b| b as u8));
    write_bytes(path.as_ref(), &bytes)
}
