//! Synthetic test-signal generators shared by unit tests, the gradcheck
//! command and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fft::{fft3, ifft3, kgrid_for};
use crate::volume::Volume3;

/// White-noise volume, samples uniform in [-1, 1).
pub fn random_volume(dims: [usize; 3], voxel_size: [f64; 3], seed: u64) -> Volume3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Volume3::from_fn(dims, voxel_size, |_, _, _| rng.gen_range(-1.0..1.0)).unwrap()
}

/// Band-limited smooth random volume: white noise with all frequencies above
/// `keep_fraction` of the Nyquist radius zeroed and a Gaussian roll-off
/// inside the band, rescaled to unit max amplitude.
pub fn bandlimited_volume(
    dims: [usize; 3],
    voxel_size: [f64; 3],
    seed: u64,
    keep_fraction: f64,
) -> Volume3 {
    let noise = random_volume(dims, voxel_size, seed);
    let grid = kgrid_for(dims).expect("dims checked by random_volume");
    let mut spec = fft3(&noise.to_complex());
    let cutoff = keep_fraction * 0.5;
    let taper = 0.5 * cutoff;
    let keep = grid.map(|kx, ky, kz| {
        let r = ((kx / dims[0] as f64).powi(2)
            + (ky / dims[1] as f64).powi(2)
            + (kz / dims[2] as f64).powi(2))
        .sqrt();
        if r <= cutoff {
            (-0.5 * (r / taper).powi(2)).exp()
        } else {
            0.0
        }
    });
    for (s, &k) in spec.data_mut().iter_mut().zip(keep.iter()) {
        *s *= k;
    }
    let smooth = ifft3(&spec).real();
    let max = smooth.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        smooth.scale(1.0 / max)
    } else {
        smooth
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandlimited_is_smooth_and_unit_scaled() {
        let v = bandlimited_volume([16, 16, 16], [1.0; 3], 4, 0.25);
        let max = v.data().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((max - 1.0).abs() < 1e-12);
        // Neighboring samples stay close for a band-limited field.
        let mut max_step = 0.0f64;
        for z in 0..16 {
            for y in 0..16 {
                for x in 0..15 {
                    max_step = max_step.max((v.at(x + 1, y, z) - v.at(x, y, z)).abs());
                }
            }
        }
        assert!(max_step < 0.9, "jump {max_step} too large for smooth field");
    }
}
