//! Volumetric layer primitives with explicit forward and backward passes.
//!
//! Convolutions follow the usual network convention: cross-correlation with
//! zero padding. Weight layouts are `[out_c, in_c, kz, ky, kx]` for the
//! 3x3x3 convolution, `[in_c, out_c, kz, ky, kx]` for the 2x2x2 transposed
//! convolution, and `[out_c, in_c]` for the 1x1x1 output convolution.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, Tensor};

fn check_conv_shapes(weight: &Tensor, bias: &Tensor, in_c: usize, expect: &[usize]) -> Result<usize> {
    if weight.shape() != expect {
        return Err(Error::ShapeMismatch(format!(
            "conv weight shape {:?}, expected {:?}",
            weight.shape(),
            expect
        )));
    }
    let out_c = expect[0];
    if bias.shape() != [out_c] {
        return Err(Error::ShapeMismatch(format!(
            "conv bias shape {:?}, expected [{out_c}]",
            bias.shape()
        )));
    }
    let _ = in_c;
    Ok(out_c)
}

/// Adds `w * shift(src, [dx,dy,dz])` into `dst`, both `dims`-sized channels,
/// reading only in-bounds samples (zero padding elsewhere).
#[inline]
fn axpy_shifted(dst: &mut [f64], src: &[f64], dims: [usize; 3], d: [i64; 3], w: f64) {
    let [nx, ny, nz] = dims;
    let (dx, dy, dz) = (d[0], d[1], d[2]);
    let z0 = (-dz).max(0) as usize;
    let z1 = ((nz as i64 - dz).min(nz as i64)).max(0) as usize;
    let y0 = (-dy).max(0) as usize;
    let y1 = ((ny as i64 - dy).min(ny as i64)).max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = ((nx as i64 - dx).min(nx as i64)).max(0) as usize;
    if x0 >= x1 {
        return;
    }
    for z in z0..z1 {
        let sz = (z as i64 + dz) as usize;
        for y in y0..y1 {
            let sy = (y as i64 + dy) as usize;
            let drow = (z * ny + y) * nx;
            let srow = ((sz * ny + sy) * nx as usize) as i64 + dx;
            let dsl = &mut dst[drow + x0..drow + x1];
            let ssl = &src[(srow + x0 as i64) as usize..(srow + x1 as i64) as usize];
            for (a, b) in dsl.iter_mut().zip(ssl.iter()) {
                *a += w * b;
            }
        }
    }
}

/// Dot product of `a` with `shift(b, d)` over the in-bounds overlap.
#[inline]
fn dot_shifted(a: &[f64], b: &[f64], dims: [usize; 3], d: [i64; 3]) -> f64 {
    let [nx, ny, nz] = dims;
    let (dx, dy, dz) = (d[0], d[1], d[2]);
    let z0 = (-dz).max(0) as usize;
    let z1 = ((nz as i64 - dz).min(nz as i64)).max(0) as usize;
    let y0 = (-dy).max(0) as usize;
    let y1 = ((ny as i64 - dy).min(ny as i64)).max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = ((nx as i64 - dx).min(nx as i64)).max(0) as usize;
    if x0 >= x1 {
        return 0.0;
    }
    let mut acc = 0.0;
    for z in z0..z1 {
        let sz = (z as i64 + dz) as usize;
        for y in y0..y1 {
            let sy = (y as i64 + dy) as usize;
            let arow = (z * ny + y) * nx;
            let brow = ((sz * ny + sy) * nx) as i64 + dx;
            let asl = &a[arow + x0..arow + x1];
            let bsl = &b[(brow + x0 as i64) as usize..(brow + x1 as i64) as usize];
            acc += asl.iter().zip(bsl.iter()).map(|(x, y)| x * y).sum::<f64>();
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// 3x3x3 convolution, stride 1, zero padding 1 (shape preserving)
// ---------------------------------------------------------------------------

pub fn conv3d_forward(input: &FeatureMap, weight: &Tensor, bias: &Tensor) -> Result<FeatureMap> {
    let in_c = input.channels();
    let out_c = check_conv_shapes(weight, bias, in_c, &[weight.shape()[0], in_c, 3, 3, 3])?;
    let dims = input.dims();
    let vol = input.volume_len();

    let mut out = FeatureMap::zeros(out_c, dims);
    out.data_mut()
        .par_chunks_mut(vol)
        .enumerate()
        .for_each(|(o, out_ch)| {
            out_ch.fill(bias.data()[o]);
            for i in 0..in_c {
                let src = input.channel(i);
                let wbase = ((o * in_c) + i) * 27;
                for kz in 0..3i64 {
                    for ky in 0..3i64 {
                        for kx in 0..3i64 {
                            let w = weight.data()[wbase as usize
                                + (kz * 9 + ky * 3 + kx) as usize];
                            axpy_shifted(out_ch, src, dims, [kx - 1, ky - 1, kz - 1], w);
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Gradients w.r.t. input, weight and bias.
pub fn conv3d_backward(
    input: &FeatureMap,
    weight: &Tensor,
    grad_out: &FeatureMap,
) -> Result<(FeatureMap, Tensor, Tensor)> {
    let in_c = input.channels();
    let out_c = weight.shape()[0];
    if grad_out.channels() != out_c || grad_out.dims() != input.dims() {
        return Err(Error::ShapeMismatch("conv3d backward gradient shape".into()));
    }
    let dims = input.dims();
    let vol = input.volume_len();

    let mut grad_in = FeatureMap::zeros(in_c, dims);
    grad_in
        .data_mut()
        .par_chunks_mut(vol)
        .enumerate()
        .for_each(|(i, gin_ch)| {
            for o in 0..out_c {
                let g = grad_out.channel(o);
                let wbase = ((o * in_c) + i) * 27;
                for kz in 0..3i64 {
                    for ky in 0..3i64 {
                        for kx in 0..3i64 {
                            let w = weight.data()[wbase + (kz * 9 + ky * 3 + kx) as usize];
                            // d in(u) accumulates w * g(u - (k-1))
                            axpy_shifted(gin_ch, g, dims, [1 - kx, 1 - ky, 1 - kz], w);
                        }
                    }
                }
            }
        });

    let mut grad_w = Tensor::zeros(weight.shape());
    grad_w
        .data_mut()
        .par_chunks_mut(in_c * 27)
        .enumerate()
        .for_each(|(o, gw)| {
            let g = grad_out.channel(o);
            for i in 0..in_c {
                let src = input.channel(i);
                for kz in 0..3i64 {
                    for ky in 0..3i64 {
                        for kx in 0..3i64 {
                            gw[i * 27 + (kz * 9 + ky * 3 + kx) as usize] =
                                dot_shifted(g, src, dims, [kx - 1, ky - 1, kz - 1]);
                        }
                    }
                }
            }
        });

    let grad_b = Tensor::from_data(
        &[out_c],
        (0..out_c)
            .map(|o| grad_out.channel(o).iter().sum())
            .collect(),
    )?;
    Ok((grad_in, grad_w, grad_b))
}

// ---------------------------------------------------------------------------
// Depthwise 3x3x3 convolution with one shared kernel (feature editing)
// ---------------------------------------------------------------------------

/// Applies one 3x3x3 kernel to every channel independently, zero padding 1.
pub fn depthwise_shared_forward(input: &FeatureMap, kernel: &[f64; 27]) -> FeatureMap {
    let dims = input.dims();
    let vol = input.volume_len();
    let mut out = FeatureMap::zeros(input.channels(), dims);
    out.data_mut()
        .par_chunks_mut(vol)
        .enumerate()
        .for_each(|(c, out_ch)| {
            let src = input.channel(c);
            for kz in 0..3i64 {
                for ky in 0..3i64 {
                    for kx in 0..3i64 {
                        let w = kernel[(kz * 9 + ky * 3 + kx) as usize];
                        axpy_shifted(out_ch, src, dims, [kx - 1, ky - 1, kz - 1], w);
                    }
                }
            }
        });
    out
}

/// Kernel gradient of the shared depthwise convolution, summed over
/// channels: d/dK[tau] = sum_c <grad_out_c, shift(input_c, tau)>.
pub fn depthwise_kernel_grad(input: &FeatureMap, grad_out: &FeatureMap) -> [f64; 27] {
    let dims = input.dims();
    let mut grad_k = [0.0; 27];
    for c in 0..input.channels() {
        let g = grad_out.channel(c);
        let src = input.channel(c);
        for kz in 0..3i64 {
            for ky in 0..3i64 {
                for kx in 0..3i64 {
                    grad_k[(kz * 9 + ky * 3 + kx) as usize] +=
                        dot_shifted(g, src, dims, [kx - 1, ky - 1, kz - 1]);
                }
            }
        }
    }
    grad_k
}

/// Backward of [`depthwise_shared_forward`]: input gradient and the
/// 27-element kernel gradient (summed over channels).
pub fn depthwise_shared_backward(
    input: &FeatureMap,
    kernel: &[f64; 27],
    grad_out: &FeatureMap,
) -> (FeatureMap, [f64; 27]) {
    let dims = input.dims();
    let vol = input.volume_len();
    let mut grad_in = FeatureMap::zeros(input.channels(), dims);
    grad_in
        .data_mut()
        .par_chunks_mut(vol)
        .enumerate()
        .for_each(|(c, gin_ch)| {
            let g = grad_out.channel(c);
            for kz in 0..3i64 {
                for ky in 0..3i64 {
                    for kx in 0..3i64 {
                        let w = kernel[(kz * 9 + ky * 3 + kx) as usize];
                        axpy_shifted(gin_ch, g, dims, [1 - kx, 1 - ky, 1 - kz], w);
                    }
                }
            }
        });
    let grad_k = depthwise_kernel_grad(input, grad_out);
    (grad_in, grad_k)
}

// ---------------------------------------------------------------------------
// 2x2x2 transposed convolution, stride 2 (doubles each spatial dim)
// ---------------------------------------------------------------------------

pub fn conv_transpose_forward(
    input: &FeatureMap,
    weight: &Tensor,
    bias: &Tensor,
) -> Result<FeatureMap> {
    let in_c = input.channels();
    if weight.shape().len() != 5 || weight.shape()[0] != in_c || weight.shape()[2..] != [2, 2, 2] {
        return Err(Error::ShapeMismatch(format!(
            "transposed conv weight shape {:?}, expected [{in_c}, out_c, 2, 2, 2]",
            weight.shape()
        )));
    }
    let out_c = weight.shape()[1];
    if bias.shape() != [out_c] {
        return Err(Error::ShapeMismatch("transposed conv bias".into()));
    }
    let [nx, ny, nz] = input.dims();
    let odims = [nx * 2, ny * 2, nz * 2];
    let ovol = odims[0] * odims[1] * odims[2];

    let mut out = FeatureMap::zeros(out_c, odims);
    out.data_mut()
        .par_chunks_mut(ovol)
        .enumerate()
        .for_each(|(o, out_ch)| {
            for z in 0..odims[2] {
                for y in 0..odims[1] {
                    let orow = (z * odims[1] + y) * odims[0];
                    let irow = ((z / 2) * ny + (y / 2)) * nx;
                    let tap_zy = ((z % 2) * 2 + (y % 2)) * 2;
                    for x in 0..odims[0] {
                        let tap = tap_zy + (x % 2);
                        let mut acc = bias.data()[o];
                        for i in 0..in_c {
                            let w = weight.data()[((i * out_c) + o) * 8 + tap];
                            acc += w * input.channel(i)[irow + x / 2];
                        }
                        out_ch[orow + x] = acc;
                    }
                }
            }
        });
    Ok(out)
}

pub fn conv_transpose_backward(
    input: &FeatureMap,
    weight: &Tensor,
    grad_out: &FeatureMap,
) -> Result<(FeatureMap, Tensor, Tensor)> {
    let in_c = input.channels();
    let out_c = weight.shape()[1];
    let [nx, ny, nz] = input.dims();
    if grad_out.dims() != [nx * 2, ny * 2, nz * 2] || grad_out.channels() != out_c {
        return Err(Error::ShapeMismatch("transposed conv backward shape".into()));
    }
    let odims = grad_out.dims();
    let vol = input.volume_len();

    let mut grad_in = FeatureMap::zeros(in_c, input.dims());
    grad_in
        .data_mut()
        .par_chunks_mut(vol)
        .enumerate()
        .for_each(|(i, gin_ch)| {
            for z in 0..nz {
                for y in 0..ny {
                    let irow = (z * ny + y) * nx;
                    for x in 0..nx {
                        let mut acc = 0.0;
                        for o in 0..out_c {
                            let g = grad_out.channel(o);
                            let wbase = ((i * out_c) + o) * 8;
                            for tz in 0..2 {
                                for ty in 0..2 {
                                    let grow =
                                        ((2 * z + tz) * odims[1] + (2 * y + ty)) * odims[0];
                                    for tx in 0..2 {
                                        acc += weight.data()[wbase + (tz * 2 + ty) * 2 + tx]
                                            * g[grow + 2 * x + tx];
                                    }
                                }
                            }
                        }
                        gin_ch[irow + x] = acc;
                    }
                }
            }
        });

    let mut grad_w = Tensor::zeros(weight.shape());
    grad_w
        .data_mut()
        .par_chunks_mut(out_c * 8)
        .enumerate()
        .for_each(|(i, gw)| {
            let src = input.channel(i);
            for o in 0..out_c {
                let g = grad_out.channel(o);
                for tz in 0..2 {
                    for ty in 0..2 {
                        for tx in 0..2 {
                            let mut acc = 0.0;
                            for z in 0..nz {
                                for y in 0..ny {
                                    let irow = (z * ny + y) * nx;
                                    let grow =
                                        ((2 * z + tz) * odims[1] + (2 * y + ty)) * odims[0];
                                    for x in 0..nx {
                                        acc += g[grow + 2 * x + tx] * src[irow + x];
                                    }
                                }
                            }
                            gw[o * 8 + (tz * 2 + ty) * 2 + tx] = acc;
                        }
                    }
                }
            }
        });

    let grad_b = Tensor::from_data(
        &[out_c],
        (0..out_c)
            .map(|o| grad_out.channel(o).iter().sum())
            .collect(),
    )?;
    Ok((grad_in, grad_w, grad_b))
}

// ---------------------------------------------------------------------------
// 2x2x2 max pooling, stride 2
// ---------------------------------------------------------------------------

pub struct MaxPoolCache {
    pub argmax: Vec<u32>,
    pub in_dims: [usize; 3],
    pub channels: usize,
}

pub fn maxpool_forward(input: &FeatureMap) -> Result<(FeatureMap, MaxPoolCache)> {
    let [nx, ny, nz] = input.dims();
    if nx % 2 != 0 || ny % 2 != 0 || nz % 2 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "max pool needs even dims, got {:?}",
            input.dims()
        )));
    }
    let odims = [nx / 2, ny / 2, nz / 2];
    let ovol = odims[0] * odims[1] * odims[2];
    let channels = input.channels();
    let mut out = FeatureMap::zeros(channels, odims);
    let mut argmax = vec![0u32; channels * ovol];

    for c in 0..channels {
        let src = input.channel(c);
        let dst = out.channel_mut(c);
        let amx = &mut argmax[c * ovol..(c + 1) * ovol];
        for z in 0..odims[2] {
            for y in 0..odims[1] {
                for x in 0..odims[0] {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for tz in 0..2 {
                        for ty in 0..2 {
                            for tx in 0..2 {
                                let idx =
                                    ((2 * z + tz) * ny + (2 * y + ty)) * nx + (2 * x + tx);
                                if src[idx] > best {
                                    best = src[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                    }
                    let oidx = (z * odims[1] + y) * odims[0] + x;
                    dst[oidx] = best;
                    amx[oidx] = best_idx as u32;
                }
            }
        }
    }
    Ok((
        out,
        MaxPoolCache {
            argmax,
            in_dims: input.dims(),
            channels,
        },
    ))
}

pub fn maxpool_backward(cache: &MaxPoolCache, grad_out: &FeatureMap) -> FeatureMap {
    let mut grad_in = FeatureMap::zeros(cache.channels, cache.in_dims);
    let ovol = grad_out.volume_len();
    for c in 0..cache.channels {
        let g = grad_out.channel(c);
        let gin = grad_in.channel_mut(c);
        let amx = &cache.argmax[c * ovol..(c + 1) * ovol];
        for (gi, &idx) in g.iter().zip(amx.iter()) {
            gin[idx as usize] += gi;
        }
    }
    grad_in
}

// ---------------------------------------------------------------------------
// Elementwise activations and skips
// ---------------------------------------------------------------------------

pub fn relu_forward(input: &FeatureMap) -> FeatureMap {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Backward pass uses the cached forward input; the derivative at exactly
/// zero is taken as zero.
pub fn relu_backward(input: &FeatureMap, grad_out: &FeatureMap) -> FeatureMap {
    let mut g = grad_out.clone();
    for (gv, &x) in g.data_mut().iter_mut().zip(input.data().iter()) {
        if x <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub fn silu_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

pub fn silu_forward(input: &FeatureMap) -> FeatureMap {
    let mut out = input.clone();
    for v in out.data_mut() {
        *v = silu(*v);
    }
    out
}

pub fn silu_backward(input: &FeatureMap, grad_out: &FeatureMap) -> FeatureMap {
    let mut g = grad_out.clone();
    for (gv, &x) in g.data_mut().iter_mut().zip(input.data().iter()) {
        *gv *= silu_derivative(x);
    }
    g
}

/// Elementwise sum of two same-shaped maps; backward passes the gradient to
/// both addends unchanged.
pub fn add_forward(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
    a.add(b)
}

// ---------------------------------------------------------------------------
// 1x1x1 convolution (per-voxel channel mixing), weight [out_c, in_c]
// ---------------------------------------------------------------------------

pub fn conv1x1_forward(input: &FeatureMap, weight: &Tensor, bias: &Tensor) -> Result<FeatureMap> {
    let in_c = input.channels();
    if weight.shape().len() != 2 || weight.shape()[1] != in_c {
        return Err(Error::ShapeMismatch(format!(
            "1x1x1 weight shape {:?}, expected [out_c, {in_c}]",
            weight.shape()
        )));
    }
    let out_c = weight.shape()[0];
    if bias.shape() != [out_c] {
        return Err(Error::ShapeMismatch("1x1x1 bias".into()));
    }
    let vol = input.volume_len();
    let mut out = FeatureMap::zeros(out_c, input.dims());
    for o in 0..out_c {
        let dst = out.channel_mut(o);
        dst.fill(bias.data()[o]);
        for i in 0..in_c {
            let w = weight.data()[o * in_c + i];
            let src = input.channel(i);
            for k in 0..vol {
                dst[k] += w * src[k];
            }
        }
    }
    Ok(out)
}

pub fn conv1x1_backward(
    input: &FeatureMap,
    weight: &Tensor,
    grad_out: &FeatureMap,
) -> Result<(FeatureMap, Tensor, Tensor)> {
    let in_c = input.channels();
    let out_c = weight.shape()[0];
    let vol = input.volume_len();
    let mut grad_in = FeatureMap::zeros(in_c, input.dims());
    let mut grad_w = Tensor::zeros(weight.shape());
    let mut grad_b = Tensor::zeros(&[out_c]);
    for o in 0..out_c {
        let g = grad_out.channel(o);
        grad_b.data_mut()[o] = g.iter().sum();
        for i in 0..in_c {
            let w = weight.data()[o * in_c + i];
            let src = input.channel(i);
            let gin = grad_in.channel_mut(i);
            let mut acc = 0.0;
            for k in 0..vol {
                gin[k] += w * g[k];
                acc += g[k] * src[k];
            }
            grad_w.data_mut()[o * in_c + i] = acc;
        }
    }
    Ok((grad_in, grad_w, grad_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_map(channels: usize, dims: [usize; 3], seed: u64) -> FeatureMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = channels * dims[0] * dims[1] * dims[2];
        FeatureMap::from_data(channels, dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = shape.iter().product();
        Tensor::from_data(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn conv3d_delta_kernel_is_identity() {
        let input = random_map(2, [4, 4, 4], 1);
        let mut w = Tensor::zeros(&[2, 2, 3, 3, 3]);
        // center tap of channel-matched kernels set to 1
        for o in 0..2 {
            w.data_mut()[((o * 2 + o) * 27) + 13] = 1.0;
        }
        let b = Tensor::zeros(&[2]);
        let out = conv3d_forward(&input, &w, &b).unwrap();
        for (a, b) in out.data().iter().zip(input.data().iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn conv3d_zero_padding_at_edges() {
        // all-ones input, all-ones 1-channel kernel: corner sees 8 taps,
        // interior sees 27.
        let input = FeatureMap::from_data(1, [4, 4, 4], vec![1.0; 64]).unwrap();
        let w = Tensor::from_data(&[1, 1, 3, 3, 3], vec![1.0; 27]).unwrap();
        let b = Tensor::zeros(&[1]);
        let out = conv3d_forward(&input, &w, &b).unwrap();
        assert_eq!(out.channel(0)[0], 8.0);
        let interior = (1 * 4 + 1) * 4 + 1;
        assert_eq!(out.channel(0)[interior], 27.0);
    }

    #[test]
    fn maxpool_constant_halves_dims() {
        let input = FeatureMap::from_data(1, [4, 4, 4], vec![2.5; 64]).unwrap();
        let (out, _) = maxpool_forward(&input).unwrap();
        assert_eq!(out.dims(), [2, 2, 2]);
        assert!(out.data().iter().all(|&v| v == 2.5));
        assert!(maxpool_forward(&random_map(1, [3, 4, 4], 2)).is_err());
    }

    #[test]
    fn transposed_conv_doubles_dims() {
        let input = random_map(2, [3, 3, 3], 5);
        let w = random_tensor(&[2, 4, 2, 2, 2], 6);
        let b = random_tensor(&[4], 7);
        let out = conv_transpose_forward(&input, &w, &b).unwrap();
        assert_eq!(out.dims(), [6, 6, 6]);
        assert_eq!(out.channels(), 4);
        // spot check one output
        let o = 1usize;
        let (x, y, z) = (3usize, 4usize, 5usize);
        let tap = ((z % 2) * 2 + (y % 2)) * 2 + (x % 2);
        let mut expect = b.data()[o];
        for i in 0..2 {
            expect += w.data()[((i * 4) + o) * 8 + tap]
                * input.channel(i)[((z / 2) * 3 + (y / 2)) * 3 + (x / 2)];
        }
        let got = out.channel(o)[(z * 6 + y) * 6 + x];
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn silu_values() {
        assert_eq!(silu(0.0), 0.0);
        assert!((silu(1.0) - 0.7310585786300049).abs() < 1e-12);
    }

    #[test]
    fn depthwise_delta_and_all_ones() {
        let input = random_map(3, [4, 4, 4], 9);
        let mut delta = [0.0; 27];
        delta[13] = 1.0;
        let out = depthwise_shared_forward(&input, &delta);
        for (a, b) in out.data().iter().zip(input.data().iter()) {
            assert!((a - b).abs() < 1e-15);
        }

        // single-voxel impulse with all-ones kernel lights its 27-neighborhood
        let mut impulse = FeatureMap::zeros(1, [5, 5, 5]);
        impulse.channel_mut(0)[(2 * 5 + 2) * 5 + 2] = 1.0;
        let out = depthwise_shared_forward(&impulse, &[1.0; 27]);
        let mut on = 0;
        for z in 0..5 {
            for y in 0..5 {
                for x in 0..5 {
                    let v = out.channel(0)[(z * 5 + y) * 5 + x];
                    let near = (x as i64 - 2).abs() <= 1
                        && (y as i64 - 2).abs() <= 1
                        && (z as i64 - 2).abs() <= 1;
                    assert_eq!(v != 0.0, near);
                    if v != 0.0 {
                        assert_eq!(v, 1.0);
                        on += 1;
                    }
                }
            }
        }
        assert_eq!(on, 27);
    }
}
