use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{KernelError, Parameters, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Entries checked per tensor; `None` checks every entry.
    pub samples_per_tensor: Option<usize>,
    pub seed: u64,
    /// Entries with `max(|analytic|, |numeric|)` below this are excluded
    /// from the relative-error maximum and checked by absolute error
    /// instead. Zero keeps every entry.
    pub min_magnitude: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            samples_per_tensor: Some(20),
            seed: 0,
            min_magnitude: 0.0,
        }
    }
}

impl GradCheckOptions {
    pub fn exhaustive() -> Self {
        Self {
            samples_per_tensor: None,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    /// Entries contributing to `max_relative_error`.
    pub checked: usize,
    pub max_relative_error: f64,
    /// Entries below `min_magnitude`.
    pub below_floor: usize,
    /// Largest `|analytic - numeric|` among the below-floor entries.
    pub max_abs_error_below_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub max_abs_error_below_floor: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// Compares the gradients currently stored in `params` against central
/// differences of `loss_fn`. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-12)`. Values are restored afterwards.
///
/// A central difference cannot resolve gradients much smaller than
/// `ulp(loss) / 2ε` (about 2e-11 for a loss near 4 at ε = 1e-5), so tiny
/// entries can be routed to an absolute-error check via `min_magnitude`.
pub fn gradient_check<P, F>(params: &mut P, mut loss_fn: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    P: Parameters,
    F: FnMut(&P) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let analytic: Vec<Vec<f64>> = params.tensors().iter().map(|t| t.grad.as_slice().to_vec()).collect();
    let names: Vec<String> = params.tensors().iter().map(|t| t.name.clone()).collect();
    let mut eval = |params: &P| -> Result<f64> {
        let v = loss_fn(params);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(KernelError::NonFiniteLoss)
        }
    };
    eval(params)?;

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        max_abs_error_below_floor: 0.0,
        tensors: Vec::new(),
    };
    for (k, grads) in analytic.iter().enumerate() {
        let n = grads.len();
        let indices: Vec<usize> = match opts.samples_per_tensor {
            Some(s) if s < n => {
                let mut v = sample(&mut rng, n, s).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        let mut worst = 0.0f64;
        let mut checked = 0;
        let mut below_floor = 0;
        let mut worst_abs = 0.0f64;
        for &idx in &indices {
            let original = params.tensors()[k].value.as_slice()[idx];
            params.tensors_mut()[k].value.as_mut_slice()[idx] = original + opts.eps;
            let plus = eval(params);
            params.tensors_mut()[k].value.as_mut_slice()[idx] = original - opts.eps;
            let minus = eval(params);
            params.tensors_mut()[k].value.as_mut_slice()[idx] = original;
            let numeric = (plus? - minus?) / (2.0 * opts.eps);
            let a = grads[idx];
            let magnitude = a.abs().max(numeric.abs());
            if magnitude < opts.min_magnitude {
                below_floor += 1;
                worst_abs = worst_abs.max((a - numeric).abs());
                continue;
            }
            checked += 1;
            worst = worst.max((a - numeric).abs() / magnitude.max(1e-12));
        }
        report.max_relative_error = report.max_relative_error.max(worst);
        report.max_abs_error_below_floor = report.max_abs_error_below_floor.max(worst_abs);
        report.tensors.push(TensorCheck {
            name: names[k].clone(),
            checked,
            max_relative_error: worst,
            below_floor,
            max_abs_error_below_floor: worst_abs,
        });
    }
    Ok(report)
}
