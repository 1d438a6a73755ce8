//! Central finite-difference check of the analytic gradient.

use super::forward::Model;
use super::params::{ModelConfig, Params};
use super::train::{example_loss, Example};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    /// Name and flat index of the worst entry.
    pub worst: (String, usize),
    pub failures: usize,
}

/// Compares every parameter's gradient of the summed example loss with
/// `(L(p + h) - L(p - h)) / 2h`. Entries where both values are below
/// `abs_floor` count as agreeing.
pub fn check_gradients(
    model: &Model<f64>,
    example: &Example,
    step: f64,
    tolerance: f64,
    abs_floor: f64,
) -> Result<GradCheckReport> {
    let mut analytic = Params::zeros(&model.config);
    example_loss(model, example, Some(&mut analytic))?;
    let names: Vec<String> = model.config.param_shapes().into_iter().map(|(n, _)| n).collect();
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_relative_error: 0.0,
        worst: (String::new(), 0),
        failures: 0,
    };
    for (ti, name) in names.iter().enumerate() {
        for i in 0..probe.params.tensors[ti].data.len() {
            let original = probe.params.tensors[ti].data[i];
            probe.params.tensors[ti].data[i] = original + step;
            let plus = example_loss(&probe, example, None)?.loss;
            probe.params.tensors[ti].data[i] = original - step;
            let minus = example_loss(&probe, example, None)?.loss;
            probe.params.tensors[ti].data[i] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.tensors[ti].data[i];
            let scale = a.abs().max(numeric.abs());
            let rel = if scale < abs_floor {
                0.0
            } else {
                (a - numeric).abs() / scale
            };
            report.checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = (name.clone(), i);
            }
            if rel >= tolerance {
                report.failures += 1;
            }
        }
    }
    Ok(report)
}

/// Two layers, width 8, two heads, length 6, 20 tokens.
pub fn micro_config() -> ModelConfig {
    ModelConfig {
        layers: 2,
        d_model: 8,
        heads: 2,
        ffn_dims: (12, 6),
        vocab_size: 20,
        max_len: 6,
        rel_window: 6,
    }
}
