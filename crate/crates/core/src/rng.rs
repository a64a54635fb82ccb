//! Seedable, counter-based random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] built by
//! [`stream`]. A stream is identified by `(seed, stream_id)`: the seed is
//! expanded into the ChaCha key with `seed_from_u64`, and the stream id is
//! written into the ChaCha nonce with `set_stream`. Distinct stream ids give
//! statistically independent sequences, so work can be split into blocks
//! with one stream per block and the result is identical no matter how the
//! blocks are scheduled.
//!
//! Stream ids used by the crate:
//!
//! | id                              | consumer                              |
//! |---------------------------------|---------------------------------------|
//! | `0`                             | categorical draw of grid points        |
//! | `(k + 1) << 32 \| block`        | Gaussian block `block` of grid point k |
//! | `CHAIN_BASE + c`                | MCMC chain `c`                         |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Base stream id for MCMC chains.
pub const CHAIN_BASE: u64 = 0xC4A1_0000_0000_0000;

/// Rows drawn per stream when sampling is split into blocks.
pub const BLOCK_ROWS: usize = 4096;

pub fn stream(seed: u64, stream_id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream id for sampling block `block` of grid configuration `config`.
pub fn block_stream(config: usize, block: usize) -> u64 {
    ((config as u64 + 1) << 32) | block as u64
}
