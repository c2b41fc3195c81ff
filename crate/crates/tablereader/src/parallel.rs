use rayon::prelude::*;
use tablereader_core::train::{evaluate_sample, BatchEvaluator, Sample, SampleOutcome};
use tablereader_core::{Network, Result};

/// Evaluates the samples of a batch on the rayon pool. Outcomes come back in
/// batch order, so training results match [`tablereader_core::train::Sequential`]
/// bit for bit.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl BatchEvaluator for Parallel {
    fn evaluate(&self, net: &Network, batch: &[&Sample], want_grad: bool) -> Result<Vec<SampleOutcome>> {
        batch.par_iter().map(|s| evaluate_sample(net, s, want_grad)).collect()
    }
}
