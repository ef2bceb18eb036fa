//! Counter-based random substreams.
//!
//! Every trajectory of a Monte Carlo run owns a ChaCha8 stream addressed by
//! `(seed, purpose, eigenvalue, index)`, so results do not depend on how the
//! trajectories are scheduled over worker threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributions::Sign;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Trajectory = 0,
    TieBreak = 1,
}

fn stream_id(purpose: Purpose, a0: Sign, index: u64) -> u64 {
    debug_assert!(index < (1 << 61));
    ((purpose as u64) << 62) | ((a0.index() as u64) << 61) | index
}

/// Independent stream for one trajectory.
pub fn substream(seed: u64, purpose: Purpose, a0: Sign, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(purpose, a0, index));
    rng
}

/// Fair coin for breaking a tie at prefix length `n` of trajectory `index`.
/// Addressed by position so prefixes decode identically whatever the set of
/// requested lengths is.
pub fn tie_coin(seed: u64, a0: Sign, index: u64, n: usize) -> Sign {
    let mut rng = substream(seed, Purpose::TieBreak, a0, index);
    rng.set_word_pos(n as u128 * 2);
    if rng.next_u32() & 1 == 0 {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Derive a child seed, used to give each model of a sweep its own stream family.
pub fn child_seed(seed: u64, child: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ child.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
