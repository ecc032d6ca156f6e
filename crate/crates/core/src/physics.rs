//! The acquisition simulator: dipole kernel, forward field, exterior-source
//! background fields, phase evolution and wrapping.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft::{fft3, ifft3, kgrid_for};
use crate::volume::{AcquisitionMeta, OrientationVector, Volume3};

/// Proton gyromagnetic ratio over 2*pi, in Hz per tesla.
pub const GAMMA_BAR_HZ_PER_T: f64 = 42.5774785e6;

/// Radians of phase per ppm of field: 2*pi * gamma_bar * B0 * TE * 1e-6.
pub fn phase_scale(meta: &AcquisitionMeta) -> f64 {
    2.0 * PI * GAMMA_BAR_HZ_PER_T * meta.b0 * meta.te * 1e-6
}

/// The unit dipole kernel sampled on the discrete frequency grid.
///
/// D(k) = 1/3 - (p.k)^2 / |k|^2 with k in integer cycles per field of view;
/// the undefined DC value is set to 0, which pins uniform susceptibility to
/// zero field.
#[derive(Debug, Clone)]
pub struct DipoleKernel {
    dims: [usize; 3],
    orientation: OrientationVector,
    values: Vec<f64>,
}

impl DipoleKernel {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn orientation(&self) -> OrientationVector {
        self.orientation
    }

    /// Kernel samples in the volume's linear order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Multiplies the spectrum of `chi` by the kernel and returns the real
    /// part of the inverse transform.
    pub fn apply(&self, chi: &Volume3) -> Result<Volume3> {
        if chi.dims() != self.dims {
            return Err(Error::DimsMismatch(format!(
                "kernel dims {:?} vs volume dims {:?}",
                self.dims,
                chi.dims()
            )));
        }
        let mut spec = fft3(&chi.to_complex());
        for (s, &d) in spec.data_mut().iter_mut().zip(self.values.iter()) {
            *s *= d;
        }
        let field = ifft3(&spec);
        debug_assert!(field.max_imag_abs() <= 1e-10 * chi.norm_l2().max(1.0));
        Ok(field.real())
    }
}

/// Builds the dipole kernel for `dims` and orientation `p`.
pub fn dipole_kernel(dims: [usize; 3], p: OrientationVector) -> Result<DipoleKernel> {
    let grid = kgrid_for(dims)?;
    let values = grid.map(|kx, ky, kz| {
        let k_sq = kx * kx + ky * ky + kz * kz;
        if k_sq == 0.0 {
            0.0
        } else {
            let pk = p.dot([kx, ky, kz]);
            1.0 / 3.0 - (pk * pk) / k_sq
        }
    });
    Ok(DipoleKernel {
        dims,
        orientation: p,
        values,
    })
}

/// Local field (ppm) induced by the susceptibility map `chi` (ppm) at
/// acquisition orientation `p`.
pub fn forward_field(chi: &Volume3, p: OrientationVector) -> Result<Volume3> {
    dipole_kernel(chi.dims(), p)?.apply(chi)
}

/// Orientation from spherical coordinates:
/// p = [sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)].
pub fn random_orientation(theta: f64, phi: f64) -> Result<OrientationVector> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::InvalidArgument(format!(
            "theta must lie in [0, pi], got {theta}"
        )));
    }
    if !(0.0..=2.0 * PI).contains(&phi) {
        return Err(Error::InvalidArgument(format!(
            "phi must lie in [0, 2*pi], got {phi}"
        )));
    }
    OrientationVector::normalized(
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    )
}

/// Draws spherical coordinates theta ~ U[0, pi], phi ~ U[0, 2*pi] and maps
/// them through [`random_orientation`].
pub fn sample_orientation(rng: &mut ChaCha8Rng) -> OrientationVector {
    let theta = rng.gen_range(0.0..=PI);
    let phi = rng.gen_range(0.0..=2.0 * PI);
    random_orientation(theta, phi).expect("angles sampled in range")
}

/// Exterior-source background simulator parameters. Source magnitudes are
/// capped at 9 ppm; the range is exposed here rather than hard-coded.
#[derive(Debug, Clone)]
pub struct BackgroundConfig {
    pub min_sources: usize,
    pub max_sources: usize,
    pub min_radius_vox: f64,
    pub max_radius_vox: f64,
    pub max_abs_chi: f64,
    /// Orientation used for the background dipole convolution.
    pub orientation: OrientationVector,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self {
            min_sources: 1,
            max_sources: 4,
            min_radius_vox: 2.0,
            max_radius_vox: 5.0,
            max_abs_chi: 9.0,
            orientation: OrientationVector::axial(),
        }
    }
}

/// Places random strong sphere sources strictly outside `mask` (no overlap
/// with mask voxels) and returns their susceptibility volume in ppm.
pub fn exterior_source_chi(
    mask: &Volume3,
    rng: &mut ChaCha8Rng,
    cfg: &BackgroundConfig,
) -> Result<Volume3> {
    if mask.count_nonzero() == 0 {
        return Err(Error::EmptyMask);
    }
    let [nx, ny, nz] = mask.dims();
    let n_sources = rng.gen_range(cfg.min_sources..=cfg.max_sources);
    let mut chi = vec![0.0; mask.len()];
    let mut placed = 0;
    let mut attempts = 0;
    while placed < n_sources && attempts < 200 {
        attempts += 1;
        let r = rng.gen_range(cfg.min_radius_vox..=cfg.max_radius_vox);
        let cx = rng.gen_range(0.0..nx as f64);
        let cy = rng.gen_range(0.0..ny as f64);
        let cz = rng.gen_range(0.0..nz as f64);
        let value = rng.gen_range(-cfg.max_abs_chi..=cfg.max_abs_chi);

        // The source sphere must not touch any mask voxel.
        let mut touches_mask = false;
        let mut voxels = Vec::new();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let dx = x as f64 + 0.5 - cx;
                    let dy = y as f64 + 0.5 - cy;
                    let dz = z as f64 + 0.5 - cz;
                    if dx * dx + dy * dy + dz * dz <= r * r {
                        let idx = mask.index_of(x, y, z);
                        if mask.data()[idx] != 0.0 {
                            touches_mask = true;
                        }
                        voxels.push(idx);
                    }
                }
            }
        }
        if touches_mask || voxels.is_empty() {
            continue;
        }
        for idx in voxels {
            chi[idx] += value;
        }
        placed += 1;
    }
    Ok(Volume3::from_parts(mask.dims(), mask.voxel_size(), chi))
}

/// Forward field of `sources`, kept inside `mask` and zeroed outside.
pub fn background_from_sources(
    sources: &Volume3,
    mask: &Volume3,
    orientation: OrientationVector,
) -> Result<Volume3> {
    let field = forward_field(sources, orientation)?;
    field.zip(mask, |f, m| if m != 0.0 { f } else { 0.0 })
}

/// Background field in ppm from random exterior sources, zero outside `mask`.
pub fn background_field(mask: &Volume3, rng: &mut ChaCha8Rng) -> Result<Volume3> {
    let cfg = BackgroundConfig::default();
    let sources = exterior_source_chi(mask, rng, &cfg)?;
    background_from_sources(&sources, mask, cfg.orientation)
}

/// Unwrapped phase in radians: phi = phase_scale(meta) * field_ppm.
pub fn phase_evolve(field: &Volume3, meta: &AcquisitionMeta) -> Result<Volume3> {
    // AcquisitionMeta construction already enforces positive B0/TE.
    let scale = phase_scale(meta);
    Ok(field.scale(scale))
}

/// Wraps phase elementwise into [-pi, pi).
pub fn wrap_phase(phi: &Volume3) -> Volume3 {
    phi.map(wrap_scalar)
}

/// ((phi + pi) mod 2*pi) - pi, with the mod taken into [0, 2*pi).
#[inline]
pub fn wrap_scalar(phi: f64) -> f64 {
    (phi + PI).rem_euclid(2.0 * PI) - PI
}
