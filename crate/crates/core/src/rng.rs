//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream selected by
//! `(seed, path, component, purpose)`. Streams are independent of the order
//! in which paths are generated, so parallel Monte Carlo is reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    JumpTimes = 1,
    Brownian = 2,
    Integrand = 3,
    Basis = 4,
    Rotation = 5,
    Permutation = 6,
    Breakpoints = 7,
}

const COMPONENT_BITS: u32 = 16;
const PURPOSE_BITS: u32 = 8;

/// Stream keyed by `(seed, path, component, purpose)`.
///
/// `path` must stay below 2^40 and `component` below 2^16.
pub fn stream(seed: u64, path: u64, component: usize, purpose: Purpose) -> ChaCha8Rng {
    debug_assert!(path < (1 << 40));
    debug_assert!((component as u64) < (1 << COMPONENT_BITS));
    let id = (path << (COMPONENT_BITS + PURPOSE_BITS))
        | ((component as u64) << PURPOSE_BITS)
        | purpose as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
