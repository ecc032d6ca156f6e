//! Orientation-adaptive latent feature editing.
//!
//! Three 4-layer MLPs project the orientation vector into a shared 3x3x3
//! feature editing kernel and two per-channel editing vectors. The input
//! feature is convolved with the kernel, scaled and shifted channelwise, and
//! added back onto itself.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{depthwise_shared_backward, depthwise_shared_forward};
use crate::mlp::{mlp_backward, mlp_forward, MlpCache, MlpGrads, MlpParams};
use crate::tensor::FeatureMap;

/// One editing block: a kernel head (27 outputs) and two vector heads
/// (one output per feature channel).
#[derive(Debug, Clone, PartialEq)]
pub struct OalfeParams {
    pub fek: MlpParams,
    pub fev1: MlpParams,
    pub fev2: MlpParams,
}

impl OalfeParams {
    pub fn init(channels: usize, std: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            fek: MlpParams::init(27, std, rng),
            fev1: MlpParams::init(channels, std, rng),
            fev2: MlpParams::init(channels, std, rng),
        }
    }

    pub fn zeros(channels: usize) -> Self {
        Self {
            fek: MlpParams::zeros(27),
            fev1: MlpParams::zeros(channels),
            fev2: MlpParams::zeros(channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.fev1.output_width()
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.fek.output_width() != 27 {
            return Err(Error::ShapeMismatch(format!(
                "editing kernel head outputs {}, expected 27",
                self.fek.output_width()
            )));
        }
        if self.fev1.output_width() != channels || self.fev2.output_width() != channels {
            return Err(Error::ShapeMismatch(format!(
                "editing vector heads output {}/{}, feature has {channels} channels",
                self.fev1.output_width(),
                self.fev2.output_width()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OalfeGrads {
    pub fek: MlpGrads,
    pub fev1: MlpGrads,
    pub fev2: MlpGrads,
}

pub struct OalfeCache {
    input: FeatureMap,
    edited: FeatureMap, // H_s, the kernel-convolved feature
    kernel: [f64; 27],
    v1: Vec<f64>,
    fek_cache: MlpCache,
    fev1_cache: MlpCache,
    fev2_cache: MlpCache,
}

/// H_OA = H + (V1 . (H * K) + V2), mapped over channels.
pub fn oalfe_forward(
    h: &FeatureMap,
    p: [f64; 3],
    params: &OalfeParams,
) -> Result<(FeatureMap, OalfeCache)> {
    params.validate(h.channels())?;
    let (k_flat, fek_cache) = mlp_forward(p, &params.fek)?;
    let (v1, fev1_cache) = mlp_forward(p, &params.fev1)?;
    let (v2, fev2_cache) = mlp_forward(p, &params.fev2)?;
    let mut kernel = [0.0; 27];
    kernel.copy_from_slice(&k_flat);

    let edited = depthwise_shared_forward(h, &kernel);
    let mut out = h.clone();
    for c in 0..h.channels() {
        let hs = edited.channel(c);
        let dst = out.channel_mut(c);
        let (s, t) = (v1[c], v2[c]);
        for (d, &e) in dst.iter_mut().zip(hs.iter()) {
            *d += s * e + t;
        }
    }
    Ok((
        out,
        OalfeCache {
            input: h.clone(),
            edited,
            kernel,
            v1,
            fek_cache,
            fev1_cache,
            fev2_cache,
        },
    ))
}

/// Backward pass: gradient w.r.t. the input feature plus gradients for all
/// three MLP heads.
pub fn oalfe_backward(
    params: &OalfeParams,
    cache: &OalfeCache,
    grad_out: &FeatureMap,
) -> Result<(FeatureMap, OalfeGrads)> {
    if !grad_out.same_shape(&cache.input) {
        return Err(Error::ShapeMismatch("oalfe backward gradient shape".into()));
    }
    let channels = cache.input.channels();
    let vol = cache.input.volume_len();

    // d v1[c] = <G_c, Hs_c>, d v2[c] = sum(G_c), d Hs_c = v1[c] * G_c
    let mut dv1 = vec![0.0; channels];
    let mut dv2 = vec![0.0; channels];
    let mut d_edited = FeatureMap::zeros(channels, cache.input.dims());
    for c in 0..channels {
        let g = grad_out.channel(c);
        let hs = cache.edited.channel(c);
        dv1[c] = g.iter().zip(hs.iter()).map(|(a, b)| a * b).sum();
        dv2[c] = g.iter().sum();
        let dst = d_edited.channel_mut(c);
        let s = cache.v1[c];
        for k in 0..vol {
            dst[k] = s * g[k];
        }
    }

    let (d_conv_in, d_kernel) = depthwise_shared_backward(&cache.input, &cache.kernel, &d_edited);
    let grad_in = grad_out.add(&d_conv_in)?; // residual path + conv path

    let grads = OalfeGrads {
        fek: mlp_backward(&params.fek, &cache.fek_cache, &d_kernel)?,
        fev1: mlp_backward(&params.fev1, &cache.fev1_cache, &dv1)?,
        fev2: mlp_backward(&params.fev2, &cache.fev2_cache, &dv2)?,
    };
    Ok((grad_in, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{check_gradient, probe_direction};
    use rand::{Rng, SeedableRng};

    fn random_map(channels: usize, dims: [usize; 3], seed: u64) -> FeatureMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = channels * dims[0] * dims[1] * dims[2];
        FeatureMap::from_data(channels, dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn zero_heads_reduce_to_identity() {
        let h = random_map(3, [5, 4, 4], 1);
        let params = OalfeParams::zeros(3);
        let (out, _) = oalfe_forward(&h, [0.0, 0.6, 0.8], &params).unwrap();
        assert_eq!(out.data(), h.data());
    }

    #[test]
    fn delta_kernel_ones_scale_doubles_feature() {
        // Heads with zero weights: outputs equal the final bias. Set the
        // kernel head bias to the center delta, v1 to ones, v2 to zero.
        let h = random_map(2, [4, 4, 4], 2);
        let mut params = OalfeParams::zeros(2);
        params.fek.biases[3].data_mut()[13] = 1.0;
        for b in params.fev1.biases[3].data_mut() {
            *b = 1.0;
        }
        let (out, _) = oalfe_forward(&h, [0.0, 0.0, 1.0], &params).unwrap();
        for (a, b) in out.data().iter().zip(h.data().iter()) {
            assert!((a - 2.0 * b).abs() < 1e-14, "expected 2H, got {a} vs {b}");
        }
    }

    #[test]
    fn shape_preserved_and_channel_mismatch_rejected() {
        let h = random_map(4, [6, 4, 8], 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = OalfeParams::init(4, 0.05, &mut rng);
        let (out, _) = oalfe_forward(&h, [0.0, 0.0, 1.0], &params).unwrap();
        assert!(out.same_shape(&h));

        let wrong = OalfeParams::zeros(3);
        assert!(oalfe_forward(&h, [0.0, 0.0, 1.0], &wrong).is_err());
    }

    fn flatten(p: &OalfeParams) -> Vec<f64> {
        let mut flat = Vec::new();
        for mlp in [&p.fek, &p.fev1, &p.fev2] {
            for n in 0..4 {
                flat.extend_from_slice(mlp.weights[n].data());
                flat.extend_from_slice(mlp.biases[n].data());
            }
        }
        flat
    }

    fn unflatten(template: &OalfeParams, flat: &[f64]) -> OalfeParams {
        let mut p = template.clone();
        let mut k = 0;
        for mlp in [&mut p.fek, &mut p.fev1, &mut p.fev2] {
            for n in 0..4 {
                for v in mlp.weights[n].data_mut() {
                    *v = flat[k];
                    k += 1;
                }
                for v in mlp.biases[n].data_mut() {
                    *v = flat[k];
                    k += 1;
                }
            }
        }
        p
    }

    #[test]
    fn all_three_heads_pass_gradient_check() {
        let h = random_map(2, [4, 4, 4], 11);
        let p = [0.0, 0.707106781, 0.707106781];
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let params = OalfeParams::init(2, 0.3, &mut rng);
        let probe = probe_direction(h.data().len(), 5);

        let flat = flatten(&params);
        let eval = |x: &[f64]| {
            let pr = unflatten(&params, x);
            let (out, _) = oalfe_forward(&h, p, &pr).unwrap();
            out.data().iter().zip(probe.iter()).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = oalfe_forward(&h, p, &params).unwrap();
        let mut g = FeatureMap::zeros(h.channels(), h.dims());
        g.data_mut().copy_from_slice(&probe);
        let (_, grads) = oalfe_backward(&params, &cache, &g).unwrap();
        let analytic = flatten(&OalfeParams {
            fek: grads.fek,
            fev1: grads.fev1,
            fev2: grads.fev2,
        });
        let report = check_gradient(eval, &flat, &analytic, &[], 1e-6);
        assert!(report.passes(1e-5), "oalfe gradcheck: {report:?}");
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let h = random_map(2, [4, 4, 4], 21);
        let p = [0.6, 0.0, 0.8];
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let params = OalfeParams::init(2, 0.3, &mut rng);
        let probe = probe_direction(h.data().len(), 6);

        let eval = |x: &[f64]| {
            let hm = FeatureMap::from_data(h.channels(), h.dims(), x.to_vec()).unwrap();
            let (out, _) = oalfe_forward(&hm, p, &params).unwrap();
            out.data().iter().zip(probe.iter()).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = oalfe_forward(&h, p, &params).unwrap();
        let mut g = FeatureMap::zeros(h.channels(), h.dims());
        g.data_mut().copy_from_slice(&probe);
        let (grad_in, _) = oalfe_backward(&params, &cache, &g).unwrap();
        let report = check_gradient(eval, h.data(), grad_in.data(), &[], 1e-6);
        assert!(report.passes(1e-5), "oalfe input grad: {report:?}");
    }
}
