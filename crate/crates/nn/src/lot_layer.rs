//! Learnable trigonometric-Laplacian front end.
//!
//! Each output channel convolves sin and cos of the wrapped phase with its
//! own learnable 3x3x3 kernel and combines them as
//! cos(phi) * (L_c * sin(phi)) - sin(phi) * (L_c * cos(phi)), divided by the
//! ppm-to-radians scale so channels land in ppm-like units. Kernels are
//! initialized to the pinned 27-point Laplacian stencil (unit spacing).

use qsm_core::operators::Stencil27;
use qsm_core::physics::phase_scale;
use qsm_core::volume::{AcquisitionMeta, Volume3};

use crate::error::{Error, Result};
use crate::layers::{depthwise_kernel_grad, depthwise_shared_forward};
use crate::tensor::{FeatureMap, Tensor};

/// Kernel tensor for `channels` output channels, shape [channels, 3, 3, 3],
/// every kernel starting as the shared Laplacian stencil.
pub fn init_lot_kernels(channels: usize) -> Tensor {
    let stencil = Stencil27::laplacian(1.0);
    let mut data = Vec::with_capacity(channels * 27);
    for _ in 0..channels {
        data.extend_from_slice(stencil.weights());
    }
    Tensor::from_data(&[channels, 3, 3, 3], data).expect("consistent shape")
}

pub struct LotCache {
    sin: FeatureMap,
    cos: FeatureMap,
    inv_scale: f64,
}

/// Forward pass over a wrapped-phase volume.
pub fn lot_layer_forward(
    phi_w: &Volume3,
    meta: &AcquisitionMeta,
    kernels: &Tensor,
) -> Result<(FeatureMap, LotCache)> {
    if kernels.shape().len() != 4 || kernels.shape()[1..] != [3, 3, 3] {
        return Err(Error::ShapeMismatch(format!(
            "lot kernels shape {:?}, expected [channels, 3, 3, 3]",
            kernels.shape()
        )));
    }
    let channels = kernels.shape()[0];
    let inv_scale = 1.0 / phase_scale(meta);
    let sin = FeatureMap::from_data(1, phi_w.dims(), phi_w.data().iter().map(|v| v.sin()).collect())?;
    let cos = FeatureMap::from_data(1, phi_w.dims(), phi_w.data().iter().map(|v| v.cos()).collect())?;

    let vol = sin.volume_len();
    let mut out = FeatureMap::zeros(channels, phi_w.dims());
    for c in 0..channels {
        let mut kernel = [0.0; 27];
        kernel.copy_from_slice(&kernels.data()[c * 27..(c + 1) * 27]);
        let lap_sin = depthwise_shared_forward(&sin, &kernel);
        let lap_cos = depthwise_shared_forward(&cos, &kernel);
        let dst = out.channel_mut(c);
        for k in 0..vol {
            dst[k] = (cos.channel(0)[k] * lap_sin.channel(0)[k]
                - sin.channel(0)[k] * lap_cos.channel(0)[k])
                * inv_scale;
        }
    }
    Ok((out, LotCache { sin, cos, inv_scale }))
}

/// Kernel gradients; the phase input is the network input and needs none.
pub fn lot_layer_backward(
    cache: &LotCache,
    kernels: &Tensor,
    grad_out: &FeatureMap,
) -> Result<Tensor> {
    let channels = kernels.shape()[0];
    if grad_out.channels() != channels || grad_out.dims() != cache.sin.dims() {
        return Err(Error::ShapeMismatch("lot backward gradient shape".into()));
    }
    let vol = cache.sin.volume_len();
    let mut grads = Tensor::zeros(kernels.shape());
    // d out_c / d L_c[tau] = (cos(x) sin(x+tau) - sin(x) cos(x+tau)) / scale.
    // Expressed through the depthwise backward: treat (G_c * cos) as the
    // upstream for the sin convolution and (G_c * sin) for the cos one.
    for c in 0..channels {
        let g = grad_out.channel(c);
        let mut g_cos = FeatureMap::zeros(1, cache.sin.dims());
        let mut g_sin = FeatureMap::zeros(1, cache.sin.dims());
        for k in 0..vol {
            g_cos.channel_mut(0)[k] = g[k] * cache.cos.channel(0)[k] * cache.inv_scale;
            g_sin.channel_mut(0)[k] = g[k] * cache.sin.channel(0)[k] * cache.inv_scale;
        }
        let d_from_sin = depthwise_kernel_grad(&cache.sin, &g_cos);
        let d_from_cos = depthwise_kernel_grad(&cache.cos, &g_sin);
        for t in 0..27 {
            grads.data_mut()[c * 27 + t] = d_from_sin[t] - d_from_cos[t];
        }
    }
    Ok(grads)
}
