//! Binary-mask helpers: ellipsoid construction and erosion.

use crate::error::{Error, Result};
use crate::volume::Volume3;

/// Binary ellipsoid mask with the given center and semi-axes (voxel units).
pub fn ellipsoid_mask(
    dims: [usize; 3],
    voxel_size: [f64; 3],
    center: [f64; 3],
    radii: [f64; 3],
) -> Result<Volume3> {
    if radii.iter().any(|&r| r <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ellipsoid radii must be positive, got {:?}",
            radii
        )));
    }
    Volume3::from_fn(dims, voxel_size, |x, y, z| {
        let dx = (x as f64 - center[0]) / radii[0];
        let dy = (y as f64 - center[1]) / radii[1];
        let dz = (z as f64 - center[2]) / radii[2];
        if dx * dx + dy * dy + dz * dz <= 1.0 {
            1.0
        } else {
            0.0
        }
    })
}

/// Erodes a binary mask by `steps` voxels using the 26-connected
/// neighborhood, so one step removes everything within Chebyshev distance 1
/// of the background.
pub fn erode_mask(mask: &Volume3, steps: usize) -> Volume3 {
    let [nx, ny, nz] = mask.dims();
    let mut current: Vec<f64> = mask.data().to_vec();
    for _ in 0..steps {
        let prev = current.clone();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let idx = x + nx * (y + ny * z);
                    if prev[idx] == 0.0 {
                        continue;
                    }
                    let mut keep = true;
                    'scan: for dz in -1i64..=1 {
                        for dy in -1i64..=1 {
                            for dx in -1i64..=1 {
                                let xx = x as i64 + dx;
                                let yy = y as i64 + dy;
                                let zz = z as i64 + dz;
                                // Voxels beyond the volume count as background.
                                if xx < 0
                                    || yy < 0
                                    || zz < 0
                                    || xx >= nx as i64
                                    || yy >= ny as i64
                                    || zz >= nz as i64
                                    || prev[xx as usize + nx * (yy as usize + ny * zz as usize)]
                                        == 0.0
                                {
                                    keep = false;
                                    break 'scan;
                                }
                            }
                        }
                    }
                    if !keep {
                        current[idx] = 0.0;
                    }
                }
            }
        }
    }
    Volume3::from_parts(mask.dims(), mask.voxel_size(), current)
}
