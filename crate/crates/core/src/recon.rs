//! Non-learned dipole inversion baselines: thresholded k-space division,
//! closed-form Tikhonov inversion, and a conjugate-gradient solver for the
//! regularized normal equations of the single-step operator.

use crate::error::{Error, Result};
use crate::fft::{fft3, ifft3, kgrid_for};
use crate::operators::laplacian_grid;
use crate::physics::{dipole_kernel, forward_field, phase_scale};
use crate::volume::{AcquisitionMeta, OrientationVector, Volume3};

/// Solver parameters shared by the classical baselines.
#[derive(Debug, Clone)]
pub struct InversionConfig {
    pub tkd_threshold: f64,
    pub tikhonov_lambda: f64,
    pub cg_max_iters: usize,
    pub cg_tolerance: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            tkd_threshold: 0.2,
            tikhonov_lambda: 1e-2,
            cg_max_iters: 100,
            cg_tolerance: 1e-6,
        }
    }
}

impl InversionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tkd_threshold > 0.0 && self.tkd_threshold <= 2.0 / 3.0) {
            return Err(Error::InvalidArgument(format!(
                "TKD threshold must lie in (0, 2/3], got {}",
                self.tkd_threshold
            )));
        }
        if self.tikhonov_lambda < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "lambda must be nonnegative, got {}",
                self.tikhonov_lambda
            )));
        }
        if self.cg_max_iters < 1 {
            return Err(Error::InvalidArgument("cg_max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which forward operator the CG normal equations invert.
///
/// Both operators are dimensionless O(1)-per-mode multipliers so the ridge
/// parameter means the same thing for either: `Dipole` is D(k) itself,
/// `SingleStep` is the integer-frequency Laplacian of the dipole field,
/// -|k|^2 D(k). Build a matching right-hand side with
/// [`single_step_rhs_from_field`] or [`single_step_rhs_from_phase`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalOperator {
    /// Dipole convolution: rhs is a local field map in ppm.
    Dipole,
    /// Single-step operator in integer-frequency units.
    SingleStep,
}

/// Right-hand side for [`NormalOperator::SingleStep`] from a local field map:
/// the integer-frequency Laplacian of the field. Exactly equals the
/// single-step operator applied to the underlying susceptibility.
pub fn single_step_rhs_from_field(field: &Volume3) -> Result<Volume3> {
    laplacian_grid(field)
}

/// Right-hand side for [`NormalOperator::SingleStep`] from a wrapped phase
/// volume: the trigonometric Laplacian in integer-frequency units, divided
/// by the ppm-to-radians scale.
pub fn single_step_rhs_from_phase(phi_w: &Volume3, meta: &AcquisitionMeta) -> Result<Volume3> {
    let sin = phi_w.map(f64::sin);
    let cos = phi_w.map(f64::cos);
    let lap_sin = laplacian_grid(&sin)?;
    let lap_cos = laplacian_grid(&cos)?;
    let scale = phase_scale(meta);
    let data: Vec<f64> = (0..phi_w.len())
        .map(|i| (cos.data()[i] * lap_sin.data()[i] - sin.data()[i] * lap_cos.data()[i]) / scale)
        .collect();
    Ok(Volume3::from_data(phi_w.dims(), phi_w.voxel_size(), data)?)
}

/// Per-solve convergence record.
#[derive(Debug, Clone)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub residual_history: Vec<f64>,
}

/// Thresholded k-space division: divide where |D| >= t, clamp elsewhere.
pub fn tkd_inversion(
    field: &Volume3,
    p: OrientationVector,
    cfg: &InversionConfig,
) -> Result<Volume3> {
    cfg.validate()?;
    let t = cfg.tkd_threshold;
    let kernel = dipole_kernel(field.dims(), p)?;
    let mut spec = fft3(&field.to_complex());
    for (s, &d) in spec.data_mut().iter_mut().zip(kernel.values().iter()) {
        if d.abs() >= t {
            *s /= d;
        } else {
            *s *= d.signum() / t;
        }
    }
    spec.data_mut()[0] = Default::default(); // chi(0) pinned to zero
    Ok(ifft3(&spec).real())
}

/// Closed-form Tikhonov-regularized inversion:
/// chi(k) = D(k) * field(k) / (D(k)^2 + lambda).
pub fn tikhonov_inversion(
    field: &Volume3,
    p: OrientationVector,
    cfg: &InversionConfig,
) -> Result<Volume3> {
    if cfg.tikhonov_lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be nonnegative".into()));
    }
    let lambda = cfg.tikhonov_lambda;
    let kernel = dipole_kernel(field.dims(), p)?;
    let mut spec = fft3(&field.to_complex());
    for (s, &d) in spec.data_mut().iter_mut().zip(kernel.values().iter()) {
        let denom = d * d + lambda;
        if denom > 0.0 {
            *s *= d / denom;
        } else {
            *s = Default::default();
        }
    }
    Ok(ifft3(&spec).real())
}

/// Conjugate-direction solve of the regularized normal equations
/// (A^T A + lambda I) chi = A^T rhs, with A symmetric, so A^T = A.
///
/// Runs a preconditioned conjugate-residual iteration. Both operators are
/// diagonal in k-space, so the spectral diagonal of the normal matrix is the
/// natural preconditioner; the iteration itself stays a general symmetric
/// Krylov solve with a per-iteration residual report. Residual norms are
/// checked against growth: 10 consecutive increases abort with
/// [`Error::Divergence`].
pub fn cg_normal_solve(
    rhs: &Volume3,
    p: OrientationVector,
    cfg: &InversionConfig,
    operator: NormalOperator,
) -> Result<(Volume3, CgReport)> {
    cfg.validate()?;
    let multiplier: Vec<f64> = match operator {
        NormalOperator::SingleStep => {
            let grid = kgrid_for(rhs.dims())?;
            let dip = dipole_kernel(rhs.dims(), p)?;
            let lap = grid.map(|kx, ky, kz| -(kx * kx + ky * ky + kz * kz));
            lap.iter()
                .zip(dip.values().iter())
                .map(|(&l, &d)| l * d)
                .collect()
        }
        NormalOperator::Dipole => dipole_kernel(rhs.dims(), p)?.values().to_vec(),
    };
    let lambda = cfg.tikhonov_lambda;

    let spectral_apply = |v: &Volume3, f: &dyn Fn(f64) -> f64| -> Volume3 {
        let mut spec = fft3(&v.to_complex());
        for (s, &m) in spec.data_mut().iter_mut().zip(multiplier.iter()) {
            *s *= f(m);
        }
        ifft3(&spec).real()
    };
    let apply_a = |v: &Volume3| spectral_apply(v, &|m| m);
    let normal = |v: &Volume3| spectral_apply(v, &|m| m * m + lambda);
    let precondition = |v: &Volume3| spectral_apply(v, &|m| 1.0 / (m * m + lambda).max(f64::MIN_POSITIVE));

    let b = apply_a(rhs); // A^T rhs
    let b_norm = b.norm_l2();
    if b_norm == 0.0 {
        let report = CgReport {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            residual_history: vec![0.0],
        };
        return Ok((Volume3::zeros(rhs.dims(), rhs.voxel_size())?, report));
    }

    let mut x = Volume3::zeros(rhs.dims(), rhs.voxel_size())?;
    let mut r = b.clone();
    let mut z = precondition(&r);
    let mut mz = normal(&z);
    let mut d = z.clone();
    let mut md = mz.clone();
    let mut z_dot_mz = z.dot(&mz);
    let mut history = vec![1.0f64];
    let mut grew = 0usize;

    let mut iterations = 0;
    for iter in 1..=cfg.cg_max_iters {
        iterations = iter;
        let pmd = precondition(&md);
        let denom = md.dot(&pmd);
        if denom == 0.0 || z_dot_mz == 0.0 {
            break;
        }
        let alpha = z_dot_mz / denom;
        x = x.add(&d.scale(alpha))?;
        r = r.sub(&md.scale(alpha))?;
        let rel = r.norm_l2() / b_norm;
        if rel > *history.last().unwrap() {
            grew += 1;
            if grew >= 10 {
                return Err(Error::Divergence {
                    iter,
                    residual: rel,
                });
            }
        } else {
            grew = 0;
        }
        history.push(rel);
        if rel <= cfg.cg_tolerance {
            break;
        }
        z = precondition(&r);
        mz = normal(&z);
        let z_dot_mz_new = z.dot(&mz);
        let beta = z_dot_mz_new / z_dot_mz;
        d = z.add(&d.scale(beta))?;
        md = mz.add(&md.scale(beta))?;
        z_dot_mz = z_dot_mz_new;
    }

    let relative_residual = *history.last().unwrap();
    let report = CgReport {
        iterations,
        relative_residual,
        converged: relative_residual <= cfg.cg_tolerance,
        residual_history: history,
    };
    Ok((x, report))
}
