//! Multi-threaded dataset explanation.
//!
//! Each instance draws from its own RNG stream keyed by its position, and results are
//! collected in position order, so the output does not depend on the worker count.

use epfx_core::attribution::{assemble, explain_instance, AttributionTensor, BackgroundSet, ShapConfig};
use epfx_core::{FeatureMatrix, TrainedModel};
use rayon::prelude::*;

pub fn thread_pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool")
}

pub fn explain_dataset(
    model: &TrainedModel,
    features: &FeatureMatrix,
    positions: &[usize],
    background: &BackgroundSet,
    config: ShapConfig,
    seed: u64,
    threads: usize,
) -> epfx_core::Result<(AttributionTensor, AttributionTensor)> {
    let results = thread_pool(threads).install(|| {
        positions
            .par_iter()
            .map(|&p| explain_instance(model, features, p, background, config, seed))
            .collect::<epfx_core::Result<Vec<_>>>()
    })?;
    Ok(assemble(features, model.spec.n_outputs(), positions, results))
}
