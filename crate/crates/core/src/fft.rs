//! 3D FFT and the discrete frequency grid.
//!
//! Normalization convention, used everywhere in this workspace: the forward
//! transform is unnormalized and the inverse divides by `nx*ny*nz`, so
//! `ifft3(fft3(v)) == v` up to rounding.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::Result;
use crate::volume::CVolume3;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Unnormalized forward DFT of a complex volume.
pub fn fft3(v: &CVolume3) -> CVolume3 {
    transform(v, FftDirection::Forward, false)
}

/// Inverse DFT, scaled by 1/(nx*ny*nz) so that `ifft3(fft3(v)) == v`.
pub fn ifft3(v: &CVolume3) -> CVolume3 {
    transform(v, FftDirection::Inverse, true)
}

fn transform(v: &CVolume3, direction: FftDirection, normalize: bool) -> CVolume3 {
    let [nx, ny, nz] = v.dims();
    let mut out = v.clone();
    let data = out.data_mut();

    // Axis x: contiguous rows.
    let fft_x = plan(nx, direction);
    for row in data.chunks_exact_mut(nx) {
        fft_x.process(row);
    }

    // Axis y: stride nx within each z-slab.
    let fft_y = plan(ny, direction);
    let mut line = vec![Complex64::default(); ny];
    for z in 0..nz {
        let slab = z * nx * ny;
        for x in 0..nx {
            for y in 0..ny {
                line[y] = data[slab + x + y * nx];
            }
            fft_y.process(&mut line);
            for y in 0..ny {
                data[slab + x + y * nx] = line[y];
            }
        }
    }

    // Axis z: stride nx*ny.
    let fft_z = plan(nz, direction);
    let mut line = vec![Complex64::default(); nz];
    let plane = nx * ny;
    for xy in 0..plane {
        for z in 0..nz {
            line[z] = data[xy + z * plane];
        }
        fft_z.process(&mut line);
        for z in 0..nz {
            data[xy + z * plane] = line[z];
        }
    }

    if normalize {
        let scale = 1.0 / (nx * ny * nz) as f64;
        for v in out.data_mut() {
            *v *= scale;
        }
    }
    out
}

/// Discrete frequency coordinates matching [`fft3`]'s output ordering.
///
/// Frequencies are integers in cycles per field of view. For axis length `n`
/// the layout is `0, 1, ..., n/2, -(n/2-1), ..., -1`; the Nyquist frequency
/// of an even axis is assigned once, as `+n/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct KGrid {
    dims: [usize; 3],
    kx: Vec<f64>,
    ky: Vec<f64>,
    kz: Vec<f64>,
}

/// Frequencies of one axis in FFT order.
pub fn fft_freqs(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i <= n / 2 {
                i as f64
            } else {
                i as f64 - n as f64
            }
        })
        .collect()
}

impl KGrid {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    pub fn kz(&self) -> &[f64] {
        &self.kz
    }

    /// Frequency triplet at voxel (x, y, z).
    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        [self.kx[x], self.ky[y], self.kz[z]]
    }

    /// Evaluates `f(kx, ky, kz)` over the grid, returning samples in
    /// the volume's linear (x-fastest) order.
    pub fn map(&self, mut f: impl FnMut(f64, f64, f64) -> f64) -> Vec<f64> {
        let [nx, ny, nz] = self.dims;
        let mut out = Vec::with_capacity(nx * ny * nz);
        for z in 0..nz {
            let kz = self.kz[z];
            for y in 0..ny {
                let ky = self.ky[y];
                for x in 0..nx {
                    out.push(f(self.kx[x], ky, kz));
                }
            }
        }
        out
    }
}

/// Builds the frequency grid for the given dims.
pub fn kgrid_for(dims: [usize; 3]) -> Result<KGrid> {
    if dims.iter().any(|&d| d < 2) {
        return Err(crate::error::Error::DimsMismatch(format!(
            "k-grid needs at least 2 samples per axis, got {:?}",
            dims
        )));
    }
    Ok(KGrid {
        dims,
        kx: fft_freqs(dims[0]),
        ky: fft_freqs(dims[1]),
        kz: fft_freqs(dims[2]),
    })
}
