//! Quantitative volume metrics: NRMSE, 3D SSIM, the high-frequency error
//! norm, and ROI statistics.
//!
//! Window/filter conventions pinned here: SSIM uses a Gaussian window of
//! sigma 1.5 and radius 5, HFEN a Laplacian-of-Gaussian of sigma 1.5 and
//! radius 7; both filters replicate edge samples at volume boundaries, which
//! keeps local statistics unbiased and annihilates constants exactly.
//! Metrics are evaluated over a mask, typically eroded beforehand to exclude
//! boundary artifacts.

use crate::error::{Error, Result};
use crate::volume::Volume3;

/// One evaluation row: error metrics plus the erosion applied to the mask.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub nrmse_percent: f64,
    pub ssim: f64,
    pub hfen_percent: f64,
    pub mask_voxels: usize,
    pub erosion_voxels: usize,
}

fn check_same_dims(a: &Volume3, b: &Volume3) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimsMismatch(format!(
            "{:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// 100 * ||pred - truth||_2 / ||truth||_2 over masked voxels.
pub fn nrmse(pred: &Volume3, truth: &Volume3, mask: &Volume3) -> Result<f64> {
    check_same_dims(pred, truth)?;
    check_same_dims(pred, mask)?;
    let mut err = 0.0;
    let mut norm = 0.0;
    let mut n = 0usize;
    for i in 0..pred.len() {
        if mask.data()[i] != 0.0 {
            let d = pred.data()[i] - truth.data()[i];
            err += d * d;
            norm += truth.data()[i] * truth.data()[i];
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    if norm == 0.0 {
        return Err(Error::InvalidArgument(
            "NRMSE undefined: reference is zero over the mask".into(),
        ));
    }
    Ok(100.0 * (err / norm).sqrt())
}

/// 1D Gaussian taps on [-radius, radius], normalized to sum 1.
fn gaussian_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let mut taps: Vec<f64> = (-(radius as i64)..=radius as i64)
        .map(|t| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable convolution with per-axis taps, replicating edge samples.
fn conv_separable(v: &Volume3, taps: [&[f64]; 3]) -> Volume3 {
    let [nx, ny, nz] = v.dims();
    let mut cur = v.data().to_vec();
    let mut next = vec![0.0; cur.len()];
    let strides = [1usize, nx, nx * ny];
    let lens = [nx, ny, nz];

    for axis in 0..3 {
        let t = taps[axis];
        let radius = (t.len() - 1) / 2;
        let stride = strides[axis];
        let len = lens[axis];
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let pos = [x, y, z][axis];
                    let base = x + nx * (y + ny * z);
                    let line_start = base - pos * stride;
                    let mut acc = 0.0;
                    for (ti, &w) in t.iter().enumerate() {
                        let offset = ti as i64 - radius as i64;
                        let q = (pos as i64 + offset).clamp(0, len as i64 - 1) as usize;
                        acc += w * cur[line_start + q * stride];
                    }
                    next[base] = acc;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Volume3::from_parts(v.dims(), v.voxel_size(), cur)
}

/// Mean local SSIM over masked voxels; 3D Gaussian windows.
///
/// `k1`/`k2` follow the standard definition; the dynamic range is
/// max - min of `truth` over the mask.
pub fn ssim(pred: &Volume3, truth: &Volume3, mask: &Volume3) -> Result<f64> {
    ssim_with(pred, truth, mask, 0.01, 0.03, 1.5, 5)
}

pub fn ssim_with(
    pred: &Volume3,
    truth: &Volume3,
    mask: &Volume3,
    k1: f64,
    k2: f64,
    sigma: f64,
    radius: usize,
) -> Result<f64> {
    check_same_dims(pred, truth)?;
    check_same_dims(pred, mask)?;
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    let mut n = 0usize;
    for i in 0..truth.len() {
        if mask.data()[i] != 0.0 {
            lo = lo.min(truth.data()[i]);
            hi = hi.max(truth.data()[i]);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let range = hi - lo;
    if range <= 0.0 {
        return Err(Error::InvalidArgument(
            "SSIM undefined: degenerate dynamic range over the mask".into(),
        ));
    }
    let c1 = (k1 * range).powi(2);
    let c2 = (k2 * range).powi(2);

    let taps = gaussian_taps(sigma, radius);
    let t3 = [taps.as_slice(), taps.as_slice(), taps.as_slice()];
    let mu_x = conv_separable(pred, t3);
    let mu_y = conv_separable(truth, t3);
    let xx = conv_separable(&pred.zip(pred, |a, b| a * b)?, t3);
    let yy = conv_separable(&truth.zip(truth, |a, b| a * b)?, t3);
    let xy = conv_separable(&pred.zip(truth, |a, b| a * b)?, t3);

    let mut acc = 0.0;
    for i in 0..pred.len() {
        if mask.data()[i] == 0.0 {
            continue;
        }
        let mx = mu_x.data()[i];
        let my = mu_y.data()[i];
        let vx = xx.data()[i] - mx * mx;
        let vy = yy.data()[i] - my * my;
        let cov = xy.data()[i] - mx * my;
        let s = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
            / ((mx * mx + my * my + c1) * (vx + vy + c2));
        acc += s;
    }
    Ok(acc / n as f64)
}

/// Laplacian-of-Gaussian response, decomposed into three separable passes
/// (one second-derivative axis each). The derivative taps are shifted to a
/// zero sum so constants are annihilated exactly.
pub fn log_filter(v: &Volume3, sigma: f64, radius: usize) -> Volume3 {
    let g = gaussian_taps(sigma, radius);
    let mut gxx: Vec<f64> = (-(radius as i64)..=radius as i64)
        .zip(g.iter())
        .map(|(t, &gv)| gv * ((t * t) as f64 - sigma * sigma) / sigma.powi(4))
        .collect();
    let mean = gxx.iter().sum::<f64>() / gxx.len() as f64;
    for t in &mut gxx {
        *t -= mean;
    }

    let mut out = conv_separable(v, [gxx.as_slice(), g.as_slice(), g.as_slice()]);
    let v2 = conv_separable(v, [g.as_slice(), gxx.as_slice(), g.as_slice()]);
    let v3 = conv_separable(v, [g.as_slice(), g.as_slice(), gxx.as_slice()]);
    out = out.add(&v2).unwrap().add(&v3).unwrap();
    out
}

/// High-frequency error norm:
/// 100 * ||LoG(pred) - LoG(truth)||_2 / ||LoG(truth)||_2 over the mask.
pub fn hfen(pred: &Volume3, truth: &Volume3, mask: &Volume3) -> Result<f64> {
    hfen_with(pred, truth, mask, 1.5, 7)
}

pub fn hfen_with(
    pred: &Volume3,
    truth: &Volume3,
    mask: &Volume3,
    log_sigma: f64,
    log_radius: usize,
) -> Result<f64> {
    check_same_dims(pred, truth)?;
    check_same_dims(pred, mask)?;
    let lp = log_filter(pred, log_sigma, log_radius);
    let lt = log_filter(truth, log_sigma, log_radius);
    let mut err = 0.0;
    let mut norm = 0.0;
    let mut n = 0usize;
    for i in 0..pred.len() {
        if mask.data()[i] != 0.0 {
            let d = lp.data()[i] - lt.data()[i];
            err += d * d;
            norm += lt.data()[i] * lt.data()[i];
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    if norm == 0.0 {
        return Err(Error::InvalidArgument(
            "HFEN undefined: LoG of reference is zero over the mask".into(),
        ));
    }
    Ok(100.0 * (err / norm).sqrt())
}

/// Mean and population standard deviation over a region of interest.
pub fn roi_stats(v: &Volume3, roi_mask: &Volume3) -> Result<(f64, f64)> {
    check_same_dims(v, roi_mask)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..v.len() {
        if roi_mask.data()[i] != 0.0 {
            sum += v.data()[i];
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let mean = sum / n as f64;
    let var = v
        .data()
        .iter()
        .zip(roi_mask.data())
        .filter(|(_, &m)| m != 0.0)
        .map(|(&x, _)| (x - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    Ok((mean, var.sqrt()))
}

/// Computes all metrics over an eroded copy of `mask`.
pub fn evaluate(
    pred: &Volume3,
    truth: &Volume3,
    mask: &Volume3,
    erosion_voxels: usize,
) -> Result<MetricReport> {
    let eroded = crate::mask::erode_mask(mask, erosion_voxels);
    let mask_voxels = eroded.count_nonzero();
    Ok(MetricReport {
        nrmse_percent: nrmse(pred, truth, &eroded)?,
        ssim: ssim(pred, truth, &eroded)?,
        hfen_percent: hfen(pred, truth, &eroded)?,
        mask_voxels,
        erosion_voxels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::ellipsoid_mask;
    use crate::synth::bandlimited_volume;

    fn ones_mask(dims: [usize; 3]) -> Volume3 {
        Volume3::from_fn(dims, [1.0; 3], |_, _, _| 1.0).unwrap()
    }

    #[test]
    fn nrmse_identities() {
        let x = bandlimited_volume([12, 12, 12], [1.0; 3], 1, 0.4);
        let mask = ones_mask([12, 12, 12]);
        assert_eq!(nrmse(&x, &x, &mask).unwrap(), 0.0);
        assert!((nrmse(&x.scale(2.0), &x, &mask).unwrap() - 100.0).abs() < 1e-9);
        let zero = Volume3::zeros([12, 12, 12], [1.0; 3]).unwrap();
        assert!((nrmse(&zero, &x, &mask).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn nrmse_linear_in_error() {
        let x = bandlimited_volume([12, 12, 12], [1.0; 3], 2, 0.4);
        let e = bandlimited_volume([12, 12, 12], [1.0; 3], 3, 0.4).scale(0.01);
        let mask = ones_mask([12, 12, 12]);
        let n1 = nrmse(&x.add(&e).unwrap(), &x, &mask).unwrap();
        let n2 = nrmse(&x.add(&e.scale(2.0)).unwrap(), &x, &mask).unwrap();
        assert!((n2 - 2.0 * n1).abs() < 1e-9);
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let x = bandlimited_volume([16, 16, 16], [1.0; 3], 4, 0.4);
        let y = bandlimited_volume([16, 16, 16], [1.0; 3], 5, 0.4);
        let mask = ones_mask([16, 16, 16]);
        assert!((ssim(&x, &x, &mask).unwrap() - 1.0).abs() < 1e-12);
        let a = ssim(&x, &y, &mask).unwrap();
        // Swapping the roles only changes the dynamic-range estimate; use the
        // same reference for both directions to test symmetry of the formula.
        let b = ssim(&y, &x, &mask).unwrap();
        let c = ssim_with(&y, &x, &mask, 0.01, 0.03, 1.5, 5).unwrap();
        assert!((b - c).abs() < 1e-15);
        assert!((a - b).abs() < 0.05); // near-symmetric up to range choice
    }

    #[test]
    fn ssim_penalizes_constant_shift() {
        let x = bandlimited_volume([16, 16, 16], [1.0; 3], 6, 0.4);
        let mask = ones_mask([16, 16, 16]);
        let shifted = x.map(|v| v + 5.0);
        assert!(ssim(&shifted, &x, &mask).unwrap() < 0.9);
    }

    #[test]
    fn ssim_degenerate_range_errors() {
        let c = Volume3::from_fn([8, 8, 8], [1.0; 3], |_, _, _| 1.0).unwrap();
        let mask = ones_mask([8, 8, 8]);
        assert!(ssim(&c, &c, &mask).is_err());
    }

    /// Independent scalar SSIM: explicit window sums per voxel, no separable
    /// filtering, shared only the replicate-padding convention.
    fn ssim_scalar_oracle(
        pred: &Volume3,
        truth: &Volume3,
        mask: &Volume3,
        sigma: f64,
        radius: i64,
        k1: f64,
        k2: f64,
    ) -> f64 {
        let [nx, ny, nz] = pred.dims();
        let mut lo = f64::MAX;
        let mut hi = f64::MIN;
        for i in 0..truth.len() {
            if mask.data()[i] != 0.0 {
                lo = lo.min(truth.data()[i]);
                hi = hi.max(truth.data()[i]);
            }
        }
        let range = hi - lo;
        let c1 = (k1 * range).powi(2);
        let c2 = (k2 * range).powi(2);
        let w1d: Vec<f64> = (-radius..=radius)
            .map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let wsum: f64 = w1d.iter().sum();
        let w1d: Vec<f64> = w1d.into_iter().map(|w| w / wsum).collect();

        let mut acc = 0.0;
        let mut n = 0usize;
        for z in 0..nz as i64 {
            for y in 0..ny as i64 {
                for x in 0..nx as i64 {
                    if mask.at(x as usize, y as usize, z as usize) == 0.0 {
                        continue;
                    }
                    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for dz in -radius..=radius {
                        for dy in -radius..=radius {
                            for dx in -radius..=radius {
                                let xx = (x + dx).clamp(0, nx as i64 - 1) as usize;
                                let yy = (y + dy).clamp(0, ny as i64 - 1) as usize;
                                let zz = (z + dz).clamp(0, nz as i64 - 1) as usize;
                                let w = w1d[(dx + radius) as usize]
                                    * w1d[(dy + radius) as usize]
                                    * w1d[(dz + radius) as usize];
                                let (a, b) = (pred.at(xx, yy, zz), truth.at(xx, yy, zz));
                                mx += w * a;
                                my += w * b;
                                sxx += w * a * a;
                                syy += w * b * b;
                                sxy += w * a * b;
                            }
                        }
                    }
                    let vx = sxx - mx * mx;
                    let vy = syy - my * my;
                    let cov = sxy - mx * my;
                    acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                        / ((mx * mx + my * my + c1) * (vx + vy + c2));
                    n += 1;
                }
            }
        }
        acc / n as f64
    }

    #[test]
    fn ssim_matches_scalar_oracle_on_small_fixture() {
        let pred = bandlimited_volume([5, 5, 5], [1.0; 3], 8, 0.8);
        let truth = bandlimited_volume([5, 5, 5], [1.0; 3], 9, 0.8);
        let mask = ones_mask([5, 5, 5]);
        let fast = ssim(&pred, &truth, &mask).unwrap();
        let oracle = ssim_scalar_oracle(&pred, &truth, &mask, 1.5, 5, 0.01, 0.03);
        assert!(
            (fast - oracle).abs() < 1e-10,
            "ssim {fast} vs oracle {oracle}"
        );
    }

    #[test]
    fn hfen_identities() {
        let x = bandlimited_volume([16, 16, 16], [1.0; 3], 10, 0.5);
        let mask = ones_mask([16, 16, 16]);
        assert_eq!(hfen(&x, &x, &mask).unwrap(), 0.0);
        // LoG annihilates constants, so a constant offset scores 0.
        let shifted = x.map(|v| v + 3.0);
        assert!(hfen(&shifted, &x, &mask).unwrap() < 1e-8);
    }

    #[test]
    fn hfen_punishes_smoothing_more_than_nrmse() {
        // Smoothing a phantom whose texture lies in the LoG passband: the
        // loss grows with spatial frequency, which the LoG weighting
        // emphasizes and plain NRMSE dilutes with the low-frequency bulk.
        let x = bandlimited_volume([24, 24, 24], [1.0; 3], 11, 0.4);
        let g = gaussian_taps(0.8, 3);
        let smooth = conv_separable(&x, [g.as_slice(), g.as_slice(), g.as_slice()]);
        let mask = ellipsoid_mask([24, 24, 24], [1.0; 3], [12.0; 3], [8.0; 3]).unwrap();
        let h = hfen(&smooth, &x, &mask).unwrap();
        let n = nrmse(&smooth, &x, &mask).unwrap();
        assert!(h > n, "hfen {h} should exceed nrmse {n} for smoothing");
    }

    #[test]
    fn roi_statistics() {
        let dims = [12, 12, 12];
        let roi = ellipsoid_mask(dims, [1.0; 3], [6.0; 3], [3.0; 3]).unwrap();
        let v = Volume3::from_fn(dims, [1.0; 3], |_, _, _| 0.8).unwrap();
        let (mean, std) = roi_stats(&v, &roi).unwrap();
        assert!((mean - 0.8).abs() < 1e-12);
        assert!(std.abs() < 1e-12);
        let empty = Volume3::zeros(dims, [1.0; 3]).unwrap();
        assert!(roi_stats(&v, &empty).is_err());
    }

    #[test]
    fn disjoint_roi_voxel_counts_add() {
        let dims = [12, 12, 12];
        let a = ellipsoid_mask(dims, [1.0; 3], [4.0, 6.0, 6.0], [2.0; 3]).unwrap();
        let b = ellipsoid_mask(dims, [1.0; 3], [9.0, 6.0, 6.0], [2.0; 3]).unwrap();
        let both = a.zip(&b, |x, y| if x + y > 0.0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(
            a.count_nonzero() + b.count_nonzero(),
            both.count_nonzero(),
            "ROIs expected disjoint"
        );
    }
}
