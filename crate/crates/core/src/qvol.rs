//! QVOL: the little-endian binary volume format shared by every tool here.
//!
//! Layout:
//! - bytes 0..8   magic `QVOL`, version byte 0x01, three zero bytes
//! - bytes 8..20  nx, ny, nz as u32
//! - bytes 20..24 dtype u32 (0 = f32, 1 = f64, 2 = complex-f32 interleaved)
//! - bytes 24..36 voxel size, 3 x f32, mm
//! - bytes 36..48 orientation, 3 x f32 (NaN triplet = absent)
//! - bytes 48..52 B0 in tesla, f32 (NaN = absent)
//! - bytes 52..56 TE in seconds, f32 (NaN = absent)
//! - bytes 56..64 reserved zeros
//! - bytes 64..   payload, x-fastest

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::volume::{AcquisitionMeta, CVolume3, OrientationVector, Volume3};

const MAGIC: [u8; 4] = *b"QVOL";
const VERSION: u8 = 0x01;
const HEADER_LEN: usize = 64;

/// Payload sample type codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QvolDtype {
    F32,
    F64,
    ComplexF32,
}

impl QvolDtype {
    fn code(self) -> u32 {
        match self {
            QvolDtype::F32 => 0,
            QvolDtype::F64 => 1,
            QvolDtype::ComplexF32 => 2,
        }
    }

    fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(QvolDtype::F32),
            1 => Ok(QvolDtype::F64),
            2 => Ok(QvolDtype::ComplexF32),
            _ => Err(Error::DtypeMismatch { code }),
        }
    }

    fn bytes_per_sample(self) -> usize {
        match self {
            QvolDtype::F32 => 4,
            QvolDtype::F64 => 8,
            QvolDtype::ComplexF32 => 8,
        }
    }
}

/// Decoded header fields; orientation/B0/TE may be absent (NaN sentinel).
#[derive(Debug, Clone, PartialEq)]
pub struct QvolHeader {
    pub dims: [usize; 3],
    pub dtype: QvolDtype,
    pub voxel_size: [f64; 3],
    pub orientation: Option<OrientationVector>,
    pub b0: Option<f64>,
    pub te: Option<f64>,
}

impl QvolHeader {
    /// Full acquisition metadata when orientation, B0 and TE are all present.
    pub fn acquisition_meta(&self) -> Option<AcquisitionMeta> {
        match (self.orientation, self.b0, self.te) {
            (Some(orientation), Some(b0), Some(te)) => {
                AcquisitionMeta::new(b0, te, orientation, self.voxel_size).ok()
            }
            _ => None,
        }
    }
}

/// Decoded payload: real volumes for dtypes 0/1, complex for dtype 2.
#[derive(Debug, Clone)]
pub enum QvolData {
    Real(Volume3),
    Complex(CVolume3),
}

impl QvolData {
    pub fn into_real(self) -> Result<Volume3> {
        match self {
            QvolData::Real(v) => Ok(v),
            QvolData::Complex(_) => Err(Error::InvalidArgument(
                "expected a real-valued volume, file holds complex samples".into(),
            )),
        }
    }
}

fn encode_header(
    dims: [usize; 3],
    dtype: QvolDtype,
    voxel_size: [f64; 3],
    meta: Option<&AcquisitionMeta>,
) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&MAGIC);
    h[4] = VERSION;
    for (i, &d) in dims.iter().enumerate() {
        h[8 + 4 * i..12 + 4 * i].copy_from_slice(&(d as u32).to_le_bytes());
    }
    h[20..24].copy_from_slice(&dtype.code().to_le_bytes());
    for i in 0..3 {
        h[24 + 4 * i..28 + 4 * i].copy_from_slice(&(voxel_size[i] as f32).to_le_bytes());
    }
    let (ori, b0, te) = match meta {
        Some(m) => {
            let c = m.orientation.components();
            ([c[0] as f32, c[1] as f32, c[2] as f32], m.b0 as f32, m.te as f32)
        }
        None => ([f32::NAN; 3], f32::NAN, f32::NAN),
    };
    for i in 0..3 {
        h[36 + 4 * i..40 + 4 * i].copy_from_slice(&ori[i].to_le_bytes());
    }
    h[48..52].copy_from_slice(&b0.to_le_bytes());
    h[52..56].copy_from_slice(&te.to_le_bytes());
    h
}

/// Writes a real volume; `dtype` must be `F32` or `F64`.
pub fn write_qvol(
    path: impl AsRef<Path>,
    volume: &Volume3,
    meta: Option<&AcquisitionMeta>,
    dtype: QvolDtype,
) -> Result<()> {
    if dtype == QvolDtype::ComplexF32 {
        return Err(Error::InvalidArgument(
            "complex dtype requires write_qvol_complex".into(),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_header(volume.dims(), dtype, volume.voxel_size(), meta))?;
    match dtype {
        QvolDtype::F32 => {
            for &v in volume.data() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        QvolDtype::F64 => {
            for &v in volume.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        QvolDtype::ComplexF32 => unreachable!(),
    }
    w.flush()?;
    Ok(())
}

/// Writes a complex volume as interleaved f32 (re, im) pairs.
pub fn write_qvol_complex(
    path: impl AsRef<Path>,
    volume: &CVolume3,
    meta: Option<&AcquisitionMeta>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_header(
        volume.dims(),
        QvolDtype::ComplexF32,
        volume.voxel_size(),
        meta,
    ))?;
    for v in volume.data() {
        w.write_all(&(v.re as f32).to_le_bytes())?;
        w.write_all(&(v.im as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_f32_le(bytes: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Reads a QVOL file: payload plus decoded header.
pub fn read_qvol(path: impl AsRef<Path>) -> Result<(QvolData, QvolHeader)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let mut found = [0u8; 4];
    found.copy_from_slice(&bytes[0..4]);
    if found != MAGIC {
        return Err(Error::BadMagic { found });
    }
    if bytes[4] != VERSION {
        return Err(Error::BadVersion(bytes[4]));
    }
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        *d = u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
    }
    let dtype = QvolDtype::from_code(u32::from_le_bytes(bytes[20..24].try_into().unwrap()))?;
    let voxel_size = [
        read_f32_le(&bytes, 24) as f64,
        read_f32_le(&bytes, 28) as f64,
        read_f32_le(&bytes, 32) as f64,
    ];
    let ori = [
        read_f32_le(&bytes, 36),
        read_f32_le(&bytes, 40),
        read_f32_le(&bytes, 44),
    ];
    // f32 headers drift off exact unit norm; renormalize on load.
    let orientation = if ori.iter().all(|v| v.is_finite()) {
        Some(OrientationVector::normalized(
            ori[0] as f64,
            ori[1] as f64,
            ori[2] as f64,
        )?)
    } else {
        None
    };
    let b0_raw = read_f32_le(&bytes, 48);
    let te_raw = read_f32_le(&bytes, 52);
    let header = QvolHeader {
        dims,
        dtype,
        voxel_size,
        orientation,
        b0: b0_raw.is_finite().then_some(b0_raw as f64),
        te: te_raw.is_finite().then_some(te_raw as f64),
    };

    let n = dims[0]
        .checked_mul(dims[1])
        .and_then(|n| n.checked_mul(dims[2]))
        .ok_or(Error::DimsOverflow {
            nx: dims[0],
            ny: dims[1],
            nz: dims[2],
        })?;
    let expected = HEADER_LEN + n * dtype.bytes_per_sample();
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            expected: expected - HEADER_LEN,
            found: bytes.len() - HEADER_LEN,
        });
    }
    let payload = &bytes[HEADER_LEN..expected];

    let data = match dtype {
        QvolDtype::F32 => {
            let samples: Vec<f64> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            QvolData::Real(Volume3::from_data(dims, voxel_size, samples)?)
        }
        QvolDtype::F64 => {
            let samples: Vec<f64> = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            QvolData::Real(Volume3::from_data(dims, voxel_size, samples)?)
        }
        QvolDtype::ComplexF32 => {
            let samples: Vec<Complex64> = payload
                .chunks_exact(8)
                .map(|c| {
                    Complex64::new(
                        f32::from_le_bytes(c[0..4].try_into().unwrap()) as f64,
                        f32::from_le_bytes(c[4..8].try_into().unwrap()) as f64,
                    )
                })
                .collect();
            QvolData::Complex(CVolume3::from_data(dims, voxel_size, samples)?)
        }
    };
    Ok((data, header))
}

/// Convenience wrapper for files known to hold real samples.
pub fn read_qvol_real(path: impl AsRef<Path>) -> Result<(Volume3, QvolHeader)> {
    let (data, header) = read_qvol(path)?;
    Ok((data.into_real()?, header))
}
