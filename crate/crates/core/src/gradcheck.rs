//! Central-difference verification of the network's backward pass under the
//! CTC loss.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ctc::{ctc_gradient, ctc_neg_log_prob, LabelSequence};
use crate::error::{Error, Result};
use crate::net::Network;
use crate::preproc::Raster;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub samples: usize,
    pub passed: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn pass_fraction(&self) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        self.passed as f64 / self.samples as f64
    }
}

/// `|analytic − numeric| / max(1, |numeric|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1.0)
}

/// Compares the analytic gradient of `-ln p(labels | N(raster))` with
/// central differences of step `step` on `samples` parameters. Samples are
/// drawn round-robin over the trainable layers so every layer is covered.
pub fn gradient_check(
    net: &Network,
    raster: &Raster,
    labels: &LabelSequence,
    samples: usize,
    step: f64,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let trace = net.trace(raster)?;
    let ctc = ctc_gradient(trace.output(), labels);
    if !ctc.feasible {
        return Err(Error::InvalidLabels("label sequence does not fit the output length".into()));
    }
    let analytic = net.backward(&trace, &ctc.grad)?;

    let layers: Vec<usize> = (0..analytic.layers().len()).filter(|&l| !analytic.layer(l).is_empty()).collect();
    if layers.is_empty() {
        return Err(Error::InvalidSpec("network has no trainable parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = net.clone();
    let loss = |n: &Network| -> Result<f64> { Ok(ctc_neg_log_prob(&n.forward(raster)?, labels)) };

    let mut report = GradCheckReport { samples, passed: 0, max_rel_error: 0.0, tolerance };
    for i in 0..samples {
        let layer = layers[i % layers.len()];
        let idx = rng.gen_range(0..analytic.layer(layer).len());
        let orig = net.weights().layer(layer)[idx];
        probe.weights_mut().layer_mut(layer)[idx] = orig + step;
        let up = loss(&probe)?;
        probe.weights_mut().layer_mut(layer)[idx] = orig - step;
        let down = loss(&probe)?;
        probe.weights_mut().layer_mut(layer)[idx] = orig;
        let numeric = (up - down) / (2.0 * step);
        let err = relative_error(analytic.layer(layer)[idx], numeric);
        report.max_rel_error = report.max_rel_error.max(err);
        if err < tolerance {
            report.passed += 1;
        }
    }
    Ok(report)
}
