//! Discrete Laplacian, the trigonometric-Laplacian (LoT) operator, and the
//! orientation-dependent single-step operator, each in spectral and
//! finite-difference stencil form.
//!
//! Stencil convolutions zero-pad at the volume boundary (matching network
//! convolutions); spectral operators are periodic. The mismatch is confined
//! to the boundary shell and excluded from comparisons by mask erosion.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft::{fft3, ifft3, kgrid_for};
use crate::physics::dipole_kernel;
use crate::volume::{OrientationVector, Volume3};

/// Differentiation backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivMode {
    Spectral,
    Stencil,
}

impl DerivMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(DerivMode::Spectral),
            "stencil" => Ok(DerivMode::Stencil),
            other => Err(Error::InvalidArgument(format!(
                "unknown derivative mode `{other}` (expected spectral|stencil)"
            ))),
        }
    }
}

/// A 3x3x3 finite-difference stencil. Weights are stored x-fastest, i.e.
/// `weights[dx+1 + 3*(dy+1 + 3*(dz+1))]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil27 {
    weights: [f64; 27],
}

impl Stencil27 {
    pub fn from_weights(weights: [f64; 27]) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[f64; 27] {
        &self.weights
    }

    #[inline]
    fn w(&self, dx: i64, dy: i64, dz: i64) -> f64 {
        self.weights[(dx + 1) as usize + 3 * ((dy + 1) as usize + 3 * (dz + 1) as usize)]
    }

    fn w_mut(&mut self, dx: i64, dy: i64, dz: i64) -> &mut f64 {
        &mut self.weights[(dx + 1) as usize + 3 * ((dy + 1) as usize + 3 * (dz + 1) as usize)]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// The pinned 27-point Laplacian: face 3/13, edge 3/26, corner 1/13,
    /// center -44/13, all divided by h^2 (isotropic spacing).
    pub fn laplacian(h: f64) -> Self {
        let inv_h2 = 1.0 / (h * h);
        let mut weights = [0.0; 27];
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let order = dx.abs() + dy.abs() + dz.abs();
                    let w = match order {
                        0 => -44.0 / 13.0,
                        1 => 3.0 / 13.0,
                        2 => 3.0 / 26.0,
                        _ => 1.0 / 13.0,
                    };
                    weights[(dx + 1) as usize + 3 * ((dy + 1) as usize + 3 * (dz + 1) as usize)] =
                        w * inv_h2;
                }
            }
        }
        Self { weights }
    }

    /// Builds the single-step operator stencil for orientation `p`:
    /// axial second differences weighted by (1/3 - p_i^2) plus centered
    /// cross differences weighted by -2 p_i p_j.
    pub fn single_step(p: OrientationVector, voxel_size: [f64; 3]) -> Self {
        let [hx, hy, hz] = voxel_size;
        let [px, py, pz] = p.components();
        let ax = 1.0 / 3.0 - px * px;
        let ay = 1.0 / 3.0 - py * py;
        let az = 1.0 / 3.0 - pz * pz;
        let mut s = Self { weights: [0.0; 27] };

        // Axial 3-point second differences.
        *s.w_mut(0, 0, 0) += -2.0 * (ax / (hx * hx) + ay / (hy * hy) + az / (hz * hz));
        for d in [-1i64, 1] {
            *s.w_mut(d, 0, 0) += ax / (hx * hx);
            *s.w_mut(0, d, 0) += ay / (hy * hy);
            *s.w_mut(0, 0, d) += az / (hz * hz);
        }
        // Cross terms via 4-point diagonal differences.
        for sa in [-1i64, 1] {
            for sb in [-1i64, 1] {
                let sign = (sa * sb) as f64;
                *s.w_mut(sa, sb, 0) += -2.0 * px * py * sign / (4.0 * hx * hy);
                *s.w_mut(sa, 0, sb) += -2.0 * px * pz * sign / (4.0 * hx * hz);
                *s.w_mut(0, sa, sb) += -2.0 * py * pz * sign / (4.0 * hy * hz);
            }
        }
        s
    }

    /// Zero-padded correlation of the stencil with `v`.
    pub fn apply(&self, v: &Volume3) -> Volume3 {
        let [nx, ny, nz] = v.dims();
        let data = v.data();
        let mut out = vec![0.0; data.len()];
        for z in 0..nz as i64 {
            for y in 0..ny as i64 {
                for x in 0..nx as i64 {
                    let mut acc = 0.0;
                    for dz in -1i64..=1 {
                        let zz = z + dz;
                        if zz < 0 || zz >= nz as i64 {
                            continue;
                        }
                        for dy in -1i64..=1 {
                            let yy = y + dy;
                            if yy < 0 || yy >= ny as i64 {
                                continue;
                            }
                            for dx in -1i64..=1 {
                                let xx = x + dx;
                                if xx < 0 || xx >= nx as i64 {
                                    continue;
                                }
                                acc += self.w(dx, dy, dz)
                                    * data[xx as usize
                                        + nx * (yy as usize + ny * zz as usize)];
                            }
                        }
                    }
                    out[x as usize + nx * (y as usize + ny * z as usize)] = acc;
                }
            }
        }
        Volume3::from_parts(v.dims(), v.voxel_size(), out)
    }
}

/// Spectral Laplacian multiplier -(2*pi)^2 * sum_i (k_i / L_i)^2 on the grid,
/// with L the physical field of view in mm.
fn spectral_laplacian_multiplier(v: &Volume3) -> Result<Vec<f64>> {
    let grid = kgrid_for(v.dims())?;
    let fov = v.fov();
    let c = -(2.0 * PI) * (2.0 * PI);
    Ok(grid.map(|kx, ky, kz| {
        c * ((kx / fov[0]).powi(2) + (ky / fov[1]).powi(2) + (kz / fov[2]).powi(2))
    }))
}

fn apply_spectral_multiplier(v: &Volume3, multiplier: &[f64]) -> Volume3 {
    let mut spec = fft3(&v.to_complex());
    for (s, &m) in spec.data_mut().iter_mut().zip(multiplier.iter()) {
        *s *= m;
    }
    ifft3(&spec).real()
}

/// Discrete Laplacian of a real volume, in 1/mm^2 units.
///
/// Stencil mode assumes isotropic voxels and uses the x spacing.
pub fn laplacian(v: &Volume3, mode: DerivMode) -> Result<Volume3> {
    match mode {
        DerivMode::Spectral => {
            let m = spectral_laplacian_multiplier(v)?;
            Ok(apply_spectral_multiplier(v, &m))
        }
        DerivMode::Stencil => Ok(Stencil27::laplacian(v.voxel_size()[0]).apply(v)),
    }
}

/// Laplacian of the unwrapped phase computed from the wrapped phase:
/// cos(phi) * lap(sin(phi)) - sin(phi) * lap(cos(phi)).
pub fn lot(phi_w: &Volume3, mode: DerivMode) -> Result<Volume3> {
    let sin = phi_w.map(f64::sin);
    let cos = phi_w.map(f64::cos);
    let lap_sin = laplacian(&sin, mode)?;
    let lap_cos = laplacian(&cos, mode)?;
    let data: Vec<f64> = (0..phi_w.len())
        .map(|i| cos.data()[i] * lap_sin.data()[i] - sin.data()[i] * lap_cos.data()[i])
        .collect();
    Ok(Volume3::from_parts(phi_w.dims(), phi_w.voxel_size(), data))
}

/// Laplacian in integer-frequency units: multiplies the spectrum by
/// -(kx^2 + ky^2 + kz^2) with k in cycles per field of view.
///
/// On a cubic isotropic grid this equals the physical [`laplacian`]
/// times (L / 2*pi)^2. The normal-equation solver works in these units so
/// its ridge parameter is dimensionless: the smallest off-cone singular
/// value of the single-step operator is then O(|D|) independent of grid
/// size.
pub fn laplacian_grid(v: &Volume3) -> Result<Volume3> {
    let grid = kgrid_for(v.dims())?;
    let m = grid.map(|kx, ky, kz| -(kx * kx + ky * ky + kz * kz));
    Ok(apply_spectral_multiplier(v, &m))
}

/// The orientation-dependent single-step operator applied to chi.
///
/// Spectral mode multiplies the spectrum by -(2*pi*|k/L|)^2 * D_p(k), i.e. the
/// Laplacian of the dipole field; stencil mode applies the combined
/// finite-difference stencil from [`Stencil27::single_step`].
pub fn apply_single_step(v: &Volume3, p: OrientationVector, mode: DerivMode) -> Result<Volume3> {
    match mode {
        DerivMode::Spectral => {
            let lap = spectral_laplacian_multiplier(v)?;
            let dip = dipole_kernel(v.dims(), p)?;
            let multiplier: Vec<f64> = lap
                .iter()
                .zip(dip.values().iter())
                .map(|(&l, &d)| l * d)
                .collect();
            Ok(apply_spectral_multiplier(v, &multiplier))
        }
        DerivMode::Stencil => Ok(Stencil27::single_step(p, v.voxel_size()).apply(v)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{forward_field, wrap_phase};
    use crate::synth::bandlimited_volume;

    fn rel_l2(a: &Volume3, b: &Volume3) -> f64 {
        a.sub(b).unwrap().norm_l2() / b.norm_l2()
    }

    #[test]
    fn stencil_annihilates_constants() {
        let s = Stencil27::laplacian(1.0);
        assert!(s.sum().abs() < 1e-12);
        let c = Volume3::from_fn([8, 8, 8], [1.0; 3], |_, _, _| 3.7).unwrap();
        let out = s.apply(&c);
        // Interior voxels see the full stencil and must vanish exactly.
        assert!(out.at(4, 4, 4).abs() < 1e-12);
        for mode in [DerivMode::Spectral, DerivMode::Stencil] {
            let l = laplacian(&c, mode).unwrap();
            assert!(l.at(4, 4, 4).abs() < 1e-10);
        }
    }

    #[test]
    fn stencil_is_second_order_laplacian() {
        // On f = x^2 + 2y^2 - z^2 the continuum Laplacian is 4; quadratics
        // are reproduced exactly by the pinned weights.
        let v = Volume3::from_fn([9, 9, 9], [1.0; 3], |x, y, z| {
            let (x, y, z) = (x as f64 - 4.0, y as f64 - 4.0, z as f64 - 4.0);
            x * x + 2.0 * y * y - z * z
        })
        .unwrap();
        let lap = Stencil27::laplacian(1.0).apply(&v);
        assert!((lap.at(4, 4, 4) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_laplacian_eigenfunction() {
        // v = sin(2*pi*x/L) is an eigenfunction with eigenvalue -(2*pi/L)^2.
        let n = 16;
        let l = n as f64;
        let v = Volume3::from_fn([n, n, n], [1.0; 3], |x, _, _| {
            (2.0 * PI * x as f64 / l).sin()
        })
        .unwrap();
        let lap = laplacian(&v, DerivMode::Spectral).unwrap();
        let expected = v.scale(-(2.0 * PI / l).powi(2));
        assert!(rel_l2(&lap, &expected) < 1e-12);
    }

    #[test]
    fn stencil_matches_spectral_on_bandlimited_volume() {
        let v = bandlimited_volume([64, 64, 64], [1.0; 3], 42, 0.25);
        let a = laplacian(&v, DerivMode::Stencil).unwrap();
        let b = laplacian(&v, DerivMode::Spectral).unwrap();
        // Compare away from the zero-padded boundary.
        let diff = interior_rel_l2(&a, &b, 2);
        assert!(diff <= 0.05, "stencil vs spectral Laplacian: {diff}");
    }

    fn interior_rel_l2(a: &Volume3, b: &Volume3, margin: usize) -> f64 {
        let [nx, ny, nz] = a.dims();
        let mut err = 0.0;
        let mut norm = 0.0;
        for z in margin..nz - margin {
            for y in margin..ny - margin {
                for x in margin..nx - margin {
                    let d = a.at(x, y, z) - b.at(x, y, z);
                    err += d * d;
                    norm += b.at(x, y, z) * b.at(x, y, z);
                }
            }
        }
        (err / norm).sqrt()
    }

    #[test]
    fn lot_constant_phase_is_zero() {
        let c = Volume3::from_fn([8, 8, 8], [1.0; 3], |_, _, _| 0.9).unwrap();
        for mode in [DerivMode::Spectral, DerivMode::Stencil] {
            let out = lot(&c, mode).unwrap();
            assert!(out.at(4, 4, 4).abs() < 1e-12);
        }
    }

    #[test]
    fn lot_wrap_invariance() {
        let phi = bandlimited_volume([16, 16, 16], [1.0; 3], 3, 0.3).scale(14.0);
        let wrapped = wrap_phase(&phi);
        for mode in [DerivMode::Spectral, DerivMode::Stencil] {
            let a = lot(&phi, mode).unwrap();
            let b = lot(&wrapped, mode).unwrap();
            let scale = a.norm_l2().max(1.0);
            assert!(a.sub(&b).unwrap().norm_l2() / scale < 1e-12);
        }
    }

    #[test]
    fn lot_approximates_laplacian_for_small_smooth_phase() {
        let phi = bandlimited_volume([48, 48, 48], [1.0; 3], 5, 0.2);
        let max = phi.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let phi = phi.scale(0.7 / max); // |phi| < pi/4
        let a = lot(&phi, DerivMode::Spectral).unwrap();
        let b = laplacian(&phi, DerivMode::Spectral).unwrap();
        let err = rel_l2(&a, &b);
        assert!(err <= 0.05, "LoT vs Laplacian: {err}");
    }

    #[test]
    fn single_step_uniform_is_zero() {
        let c = Volume3::from_fn([8, 8, 8], [1.0; 3], |_, _, _| 1.0).unwrap();
        let p = OrientationVector::normalized(0.1, 0.3, 0.9).unwrap();
        for mode in [DerivMode::Spectral, DerivMode::Stencil] {
            let out = apply_single_step(&c, p, mode).unwrap();
            assert!(out.at(4, 4, 4).abs() < 1e-10);
        }
    }

    #[test]
    fn spectral_single_step_equals_laplacian_of_forward_field() {
        let chi = bandlimited_volume([32, 32, 32], [1.0; 3], 8, 0.4);
        let p = OrientationVector::normalized(0.25, -0.4, 0.88).unwrap();
        let lhs = apply_single_step(&chi, p, DerivMode::Spectral).unwrap();
        let rhs = laplacian(&forward_field(&chi, p).unwrap(), DerivMode::Spectral).unwrap();
        let err = rel_l2(&lhs, &rhs);
        assert!(err <= 1e-12, "exact k-space identity violated: {err}");
    }

    #[test]
    fn stencil_single_step_close_to_spectral() {
        let chi = bandlimited_volume([64, 64, 64], [1.0; 3], 21, 0.25);
        let p = OrientationVector::normalized(0.0, 0.707, 0.707).unwrap();
        let a = apply_single_step(&chi, p, DerivMode::Stencil).unwrap();
        let b = apply_single_step(&chi, p, DerivMode::Spectral).unwrap();
        let err = interior_rel_l2(&a, &b, 2);
        assert!(err <= 0.08, "stencil vs spectral single-step: {err}");
    }

    #[test]
    fn single_step_is_symmetric() {
        let a = bandlimited_volume([16, 16, 16], [1.0; 3], 1, 0.4);
        let b = bandlimited_volume([16, 16, 16], [1.0; 3], 2, 0.4);
        let p = OrientationVector::normalized(0.3, 0.4, 0.87).unwrap();
        let lhs = apply_single_step(&a, p, DerivMode::Spectral).unwrap().dot(&b);
        let rhs = a.dot(&apply_single_step(&b, p, DerivMode::Spectral).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}
