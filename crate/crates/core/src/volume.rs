//! Dense 3D scalar fields and acquisition metadata.
//!
//! All volumes use an x-fastest memory layout: the sample at voxel
//! (x, y, z) lives at linear index `x + nx*(y + ny*z)`. Every module in
//! this workspace, including the binary file format, shares this layout.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A dense real-valued 3D volume with voxel-size metadata (millimetres).
///
/// Values are immutable after construction; build new volumes with
/// [`Volume3::from_fn`] or [`Volume3::from_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3 {
    dims: [usize; 3],
    voxel_size: [f64; 3],
    data: Vec<f64>,
}

impl Volume3 {
    /// Builds a volume from raw samples. Validates dims, voxel size and finiteness.
    pub fn from_data(dims: [usize; 3], voxel_size: [f64; 3], data: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        check_voxel_size(voxel_size)?;
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::DimsMismatch(format!(
                "data length {} does not match dims {}x{}x{}",
                data.len(),
                dims[0],
                dims[1],
                dims[2]
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Self { dims, voxel_size, data })
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel.
    pub fn from_fn(
        dims: [usize; 3],
        voxel_size: [f64; 3],
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(dims)?;
        check_voxel_size(voxel_size)?;
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::from_data(dims, voxel_size, data)
    }

    /// All-zero volume.
    pub fn zeros(dims: [usize; 3], voxel_size: [f64; 3]) -> Result<Self> {
        check_dims(dims)?;
        check_voxel_size(voxel_size)?;
        Ok(Self {
            dims,
            voxel_size,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        })
    }

    /// Internal constructor for values already known to be valid.
    pub(crate) fn from_parts(dims: [usize; 3], voxel_size: [f64; 3], data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims[0] * dims[1] * dims[2]);
        Self { dims, voxel_size, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> [f64; 3] {
        self.voxel_size
    }

    /// Physical field of view per axis, in mm.
    pub fn fov(&self) -> [f64; 3] {
        [
            self.dims[0] as f64 * self.voxel_size[0],
            self.dims[1] as f64 * self.voxel_size[1],
            self.dims[2] as f64 * self.voxel_size[2],
        ]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index_of(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index_of(x, y, z)]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Applies `f` elementwise, keeping dims and voxel size.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Volume3 {
        Volume3::from_parts(
            self.dims,
            self.voxel_size,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Elementwise combination of two same-shaped volumes.
    pub fn zip(&self, other: &Volume3, f: impl Fn(f64, f64) -> f64) -> Result<Volume3> {
        if self.dims != other.dims {
            return Err(Error::DimsMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Volume3::from_parts(
            self.dims,
            self.voxel_size,
            self.data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scale(&self, s: f64) -> Volume3 {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Volume3) -> Result<Volume3> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Volume3) -> Result<Volume3> {
        self.zip(other, |a, b| a - b)
    }

    /// L2 norm over all samples.
    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Inner product over all samples.
    pub fn dot(&self, other: &Volume3) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Lifts the real volume into a complex one with zero imaginary part.
    pub fn to_complex(&self) -> CVolume3 {
        CVolume3 {
            dims: self.dims,
            voxel_size: self.voxel_size,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    /// True when every sample is exactly 0.0 or 1.0.
    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Number of nonzero samples (mask voxel count).
    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }
}

/// A dense complex-valued 3D volume sharing [`Volume3`]'s layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CVolume3 {
    dims: [usize; 3],
    voxel_size: [f64; 3],
    data: Vec<Complex64>,
}

impl CVolume3 {
    pub fn from_data(dims: [usize; 3], voxel_size: [f64; 3], data: Vec<Complex64>) -> Result<Self> {
        check_dims(dims)?;
        check_voxel_size(voxel_size)?;
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::DimsMismatch(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Self { dims, voxel_size, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> [f64; 3] {
        self.voxel_size
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Complex volumes serve as spectral scratch buffers; unlike [`Volume3`]
    /// they stay mutable.
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Real part as a volume.
    pub fn real(&self) -> Volume3 {
        Volume3::from_parts(
            self.dims,
            self.voxel_size,
            self.data.iter().map(|v| v.re).collect(),
        )
    }

    /// Largest imaginary magnitude, used to check results expected to be real.
    pub fn max_imag_abs(&self) -> f64 {
        self.data.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }
}

fn check_dims(dims: [usize; 3]) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::DimsMismatch(format!("zero-sized axis in {:?}", dims)));
    }
    let n = dims[0]
        .checked_mul(dims[1])
        .and_then(|n| n.checked_mul(dims[2]));
    match n {
        Some(n) if n.checked_mul(16).is_some() => Ok(()),
        _ => Err(Error::DimsOverflow {
            nx: dims[0],
            ny: dims[1],
            nz: dims[2],
        }),
    }
}

fn check_voxel_size(voxel_size: [f64; 3]) -> Result<()> {
    if voxel_size.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "voxel size must be strictly positive, got {:?}",
            voxel_size
        )));
    }
    Ok(())
}

/// Unit dipole/acquisition orientation vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationVector {
    px: f64,
    py: f64,
    pz: f64,
}

impl OrientationVector {
    /// Tolerance on the unit-norm invariant.
    pub const UNIT_TOL: f64 = 1e-9;

    /// Pure-axial orientation [0, 0, 1].
    pub fn axial() -> Self {
        Self { px: 0.0, py: 0.0, pz: 1.0 }
    }

    /// Accepts a vector already unit-length to within [`Self::UNIT_TOL`].
    pub fn new(px: f64, py: f64, pz: f64) -> Result<Self> {
        let norm = (px * px + py * py + pz * pz).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > Self::UNIT_TOL {
            return Err(Error::NonUnitOrientation { norm });
        }
        Ok(Self { px, py, pz })
    }

    /// Normalizes an arbitrary nonzero vector to unit length.
    pub fn normalized(px: f64, py: f64, pz: f64) -> Result<Self> {
        let norm = (px * px + py * py + pz * pz).sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::NonUnitOrientation { norm });
        }
        Ok(Self {
            px: px / norm,
            py: py / norm,
            pz: pz / norm,
        })
    }

    pub fn components(&self) -> [f64; 3] {
        [self.px, self.py, self.pz]
    }

    pub fn px(&self) -> f64 {
        self.px
    }

    pub fn py(&self) -> f64 {
        self.py
    }

    pub fn pz(&self) -> f64 {
        self.pz
    }

    pub fn dot(&self, v: [f64; 3]) -> f64 {
        self.px * v[0] + self.py * v[1] + self.pz * v[2]
    }

    pub fn norm(&self) -> f64 {
        (self.px * self.px + self.py * self.py + self.pz * self.pz).sqrt()
    }
}

/// Everything needed to scale a field in ppm to a phase in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionMeta {
    pub b0: f64,
    pub te: f64,
    pub orientation: OrientationVector,
    pub voxel_size: [f64; 3],
}

impl AcquisitionMeta {
    pub fn new(b0: f64, te: f64, orientation: OrientationVector, voxel_size: [f64; 3]) -> Result<Self> {
        if !(b0 > 0.0) || !b0.is_finite() {
            return Err(Error::InvalidArgument(format!("B0 must be positive, got {b0}")));
        }
        if !(te > 0.0) || !te.is_finite() {
            return Err(Error::InvalidArgument(format!("TE must be positive, got {te}")));
        }
        check_voxel_size(voxel_size)?;
        Ok(Self { b0, te, orientation, voxel_size })
    }
}
