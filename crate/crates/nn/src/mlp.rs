//! The 4-layer perceptrons that project an orientation vector into feature
//! editing parameters. Width chain 3 -> 3 -> 5 -> 10 -> out; SiLU on the
//! three hidden layers, affine final layer.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::layers::{silu, silu_derivative};
use crate::tensor::Tensor;

pub const MLP_WIDTHS: [usize; 4] = [3, 3, 5, 10];

/// Weights `w{n}` of shape `[out_n, in_n]` and biases `b{n}` of `[out_n]`
/// for n = 1..=4.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub weights: [Tensor; 4],
    pub biases: [Tensor; 4],
}

/// Gradients in the same layout as [`MlpParams`].
pub type MlpGrads = MlpParams;

fn layer_dims(out: usize) -> [(usize, usize); 4] {
    [
        (MLP_WIDTHS[1], MLP_WIDTHS[0]),
        (MLP_WIDTHS[2], MLP_WIDTHS[1]),
        (MLP_WIDTHS[3], MLP_WIDTHS[2]),
        (out, MLP_WIDTHS[3]),
    ]
}

impl MlpParams {
    /// Gaussian(0, std) initialization, deterministic under the given rng.
    pub fn init(out: usize, std: f64, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0, std).expect("valid std");
        let mut make = |rows: usize, cols: usize| {
            Tensor::from_data(
                &[rows, cols],
                (0..rows * cols).map(|_| normal.sample(rng)).collect(),
            )
            .expect("shape consistent")
        };
        let dims = layer_dims(out);
        let weights = [
            make(dims[0].0, dims[0].1),
            make(dims[1].0, dims[1].1),
            make(dims[2].0, dims[2].1),
            make(dims[3].0, dims[3].1),
        ];
        let mut make_b = |rows: usize| {
            Tensor::from_data(&[rows], (0..rows).map(|_| normal.sample(rng)).collect())
                .expect("shape consistent")
        };
        let biases = [
            make_b(dims[0].0),
            make_b(dims[1].0),
            make_b(dims[2].0),
            make_b(dims[3].0),
        ];
        Self { weights, biases }
    }

    pub fn zeros(out: usize) -> Self {
        let dims = layer_dims(out);
        Self {
            weights: dims.map(|(r, c)| Tensor::zeros(&[r, c])),
            biases: dims.map(|(r, _)| Tensor::zeros(&[r])),
        }
    }

    pub fn output_width(&self) -> usize {
        self.weights[3].shape()[0]
    }

    pub fn validate(&self) -> Result<()> {
        let dims = layer_dims(self.output_width());
        for n in 0..4 {
            if self.weights[n].shape() != [dims[n].0, dims[n].1] {
                return Err(Error::ShapeMismatch(format!(
                    "mlp w{} shape {:?}, expected {:?}",
                    n + 1,
                    self.weights[n].shape(),
                    dims[n]
                )));
            }
            if self.biases[n].shape() != [dims[n].0] {
                return Err(Error::ShapeMismatch(format!("mlp b{} shape", n + 1)));
            }
        }
        Ok(())
    }
}

/// Pre-activations and activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// a[0] is the input; a[n] the activation leaving layer n.
    activations: [Vec<f64>; 5],
    /// z[n] is the pre-activation of layer n+1 (only the 3 hidden layers).
    pre_activations: [Vec<f64>; 3],
}

fn affine(w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    let rows = w.shape()[0];
    let cols = w.shape()[1];
    (0..rows)
        .map(|r| {
            b.data()[r]
                + w.data()[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
        .collect()
}

/// Z1..Z3 with SiLU, Z4 affine.
pub fn mlp_forward(p: [f64; 3], params: &MlpParams) -> Result<(Vec<f64>, MlpCache)> {
    params.validate()?;
    let a0 = p.to_vec();
    let z1 = affine(&params.weights[0], &params.biases[0], &a0);
    let a1: Vec<f64> = z1.iter().map(|&v| silu(v)).collect();
    let z2 = affine(&params.weights[1], &params.biases[1], &a1);
    let a2: Vec<f64> = z2.iter().map(|&v| silu(v)).collect();
    let z3 = affine(&params.weights[2], &params.biases[2], &a2);
    let a3: Vec<f64> = z3.iter().map(|&v| silu(v)).collect();
    let z4 = affine(&params.weights[3], &params.biases[3], &a3);
    let cache = MlpCache {
        activations: [a0, a1, a2, a3, z4.clone()],
        pre_activations: [z1, z2, z3],
    };
    Ok((z4, cache))
}

/// Backpropagates `grad_out` (d loss / d Z4) into parameter gradients.
/// The orientation input is data, not a parameter; its gradient is dropped.
pub fn mlp_backward(params: &MlpParams, cache: &MlpCache, grad_out: &[f64]) -> Result<MlpGrads> {
    if grad_out.len() != params.output_width() {
        return Err(Error::ShapeMismatch(format!(
            "mlp grad width {} vs output {}",
            grad_out.len(),
            params.output_width()
        )));
    }
    let mut grads = MlpParams::zeros(params.output_width());
    let mut delta = grad_out.to_vec();
    for n in (0..4).rev() {
        let input = &cache.activations[n];
        let (rows, cols) = (params.weights[n].shape()[0], params.weights[n].shape()[1]);
        for r in 0..rows {
            grads.biases[n].data_mut()[r] = delta[r];
            for c in 0..cols {
                grads.weights[n].data_mut()[r * cols + c] = delta[r] * input[c];
            }
        }
        if n == 0 {
            break;
        }
        // delta for the previous layer, through wT and the SiLU derivative
        let mut prev = vec![0.0; cols];
        for c in 0..cols {
            let mut acc = 0.0;
            for r in 0..rows {
                acc += params.weights[n].data()[r * cols + c] * delta[r];
            }
            prev[c] = acc * silu_derivative(cache.pre_activations[n - 1][c]);
        }
        delta = prev;
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{check_gradient, probe_direction};

    /// 2-significant-digit fixture weights: w_n[i][j] = round2(sin(n + 0.7 i + 1.3 j)),
    /// b_n[i] = round2(cos(n + 0.5 i)).
    fn fixture_params(out: usize) -> MlpParams {
        let round2 = |v: f64| (v * 100.0).round() / 100.0;
        let dims = layer_dims(out);
        let mut params = MlpParams::zeros(out);
        for n in 0..4 {
            let (rows, cols) = dims[n];
            for i in 0..rows {
                for j in 0..cols {
                    params.weights[n].data_mut()[i * cols + j] =
                        round2(((n + 1) as f64 + 0.7 * i as f64 + 1.3 * j as f64).sin());
                }
                params.biases[n].data_mut()[i] = round2(((n + 1) as f64 + 0.5 * i as f64).cos());
            }
        }
        params
    }

    #[test]
    fn zero_weights_output_is_final_bias() {
        let mut params = MlpParams::zeros(7);
        for (i, b) in params.biases[3].data_mut().iter_mut().enumerate() {
            *b = i as f64;
        }
        let (out, _) = mlp_forward([0.2, 0.4, 0.89], &params).unwrap();
        assert_eq!(out, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn matches_independent_matrix_oracle() {
        // Frozen from an independent matrix-arithmetic evaluation of the
        // fixture at p = [0, 0, 1].
        let params = fixture_params(4);
        let (out, _) = mlp_forward([0.0, 0.0, 1.0], &params).unwrap();
        let expected = [
            -0.607928899128344,
            0.11053226961351023,
            0.74248072728225,
            1.0955678274435348,
        ];
        for (a, e) in out.iter().zip(expected.iter()) {
            assert!((a - e).abs() < 1e-12, "got {a}, expected {e}");
        }
    }

    fn flatten(params: &MlpParams) -> Vec<f64> {
        let mut flat = Vec::new();
        for n in 0..4 {
            flat.extend_from_slice(params.weights[n].data());
            flat.extend_from_slice(params.biases[n].data());
        }
        flat
    }

    fn unflatten(template: &MlpParams, flat: &[f64]) -> MlpParams {
        let mut params = template.clone();
        let mut k = 0;
        for n in 0..4 {
            for v in params.weights[n].data_mut() {
                *v = flat[k];
                k += 1;
            }
            for v in params.biases[n].data_mut() {
                *v = flat[k];
                k += 1;
            }
        }
        params
    }

    #[test]
    fn gradients_match_finite_differences() {
        let params = fixture_params(5);
        let p = [0.3, -0.4, 0.8660254037844386];
        let probe = probe_direction(5, 42);
        let flat = flatten(&params);

        let eval = |x: &[f64]| {
            let pr = unflatten(&params, x);
            let (out, _) = mlp_forward(p, &pr).unwrap();
            out.iter().zip(probe.iter()).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = mlp_forward(p, &params).unwrap();
        let grads = mlp_backward(&params, &cache, &probe).unwrap();
        let analytic = flatten(&grads);
        let report = check_gradient(eval, &flat, &analytic, &[], 1e-6);
        assert!(
            report.passes(1e-5),
            "mlp gradient check failed: {report:?}"
        );
    }
}
