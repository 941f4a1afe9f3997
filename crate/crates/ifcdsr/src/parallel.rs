//! Data-parallel gradient computation.

use ifcdsr_core::model::{Model, Scorer};
use ifcdsr_core::score::FusionWeights;
use ifcdsr_core::seqdata::UserSequence;
use ifcdsr_core::train::{backward_step, sequence_step, BatchExecutor, BatchGradients, DropoutPlan, GradientBuffer};
use ifcdsr_core::Result;

/// Splits each batch into `threads` contiguous chunks and merges the
/// per-chunk sums in chunk order, so results do not depend on scheduling.
#[derive(Debug, Clone, Copy)]
pub struct Threaded {
    pub threads: usize,
}

impl BatchExecutor for Threaded {
    fn gradients(
        &self,
        model: &Model,
        scorer: &Scorer<'_>,
        batch: &[(u64, &UserSequence)],
        weights: FusionWeights,
        dropout: Option<DropoutPlan>,
    ) -> Result<BatchGradients> {
        if self.threads <= 1 || batch.len() < 2 {
            return backward_step(model, scorer, batch, weights, dropout);
        }
        let chunk = batch.len().div_ceil(self.threads);
        let parts: Vec<Result<GradientBuffer>> = std::thread::scope(|s| {
            let handles: Vec<_> = batch
                .chunks(chunk)
                .map(|part| {
                    s.spawn(move || {
                        let mut buf = GradientBuffer::new(model);
                        for &(example, seq) in part {
                            sequence_step(model, scorer, seq, weights, dropout.map(|d| (d, example)), Some(&mut buf))?;
                        }
                        Ok(buf)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("gradient worker panicked")).collect()
        });
        let mut total = GradientBuffer::new(model);
        for part in parts {
            total.merge(&part?);
        }
        Ok(total.finish(scorer))
    }
}
