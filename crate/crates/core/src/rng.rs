//! Reproducible random streams.
//!
//! Every replica draws from its own ChaCha8 stream keyed by
//! `(master seed, replica index)`, so results never depend on how replicas
//! are scheduled across threads. Parallel farms collect results in index
//! order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

/// The RNG stream for replica `index` under `master`.
pub fn stream(master: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Uniform draw on the half-open interval (0, 1].
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Runs `f` once per replica in parallel and returns the outputs in replica order.
pub fn replicate<T, F>(master: u64, replicas: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut StreamRng) -> T + Sync,
{
    (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(master, i);
            f(i, &mut rng)
        })
        .collect()
}
