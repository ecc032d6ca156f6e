//! Central finite-difference gradient verification.
//!
//! The checks here are the independent oracle for every backward pass in
//! this crate: they only ever call forward code.

/// Result of comparing an analytic gradient against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Relative disagreement with a floor that keeps near-zero pairs benign.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares `analytic` against central differences of `eval` over the
/// parameters at `indices` (all parameters when `indices` is empty).
///
/// `eval` receives the full parameter vector and returns the scalar
/// objective; `eps` is the half-step.
pub fn check_gradient(
    mut eval: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    indices: &[usize],
    eps: f64,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len());
    let mut work = params.to_vec();
    let all: Vec<usize>;
    let picked = if indices.is_empty() {
        all = (0..params.len()).collect();
        &all
    } else {
        indices
    };
    let mut max_rel_err: f64 = 0.0;
    let mut worst_index = 0;
    for &i in picked {
        let orig = work[i];
        work[i] = orig + eps;
        let f_plus = eval(&work);
        work[i] = orig - eps;
        let f_minus = eval(&work);
        work[i] = orig;
        let numeric = (f_plus - f_minus) / (2.0 * eps);
        let rel = relative_error(analytic[i], numeric);
        if rel > max_rel_err {
            max_rel_err = rel;
            worst_index = i;
        }
    }
    GradCheckReport {
        max_rel_err,
        worst_index,
        checked: picked.len(),
    }
}

/// Deterministic pseudo-random direction used as the linear functional
/// weighting an output, so layer objectives are scalar.
pub fn probe_direction(len: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
