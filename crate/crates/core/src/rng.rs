//! Partitioned random streams.
//!
//! Every unit of work (protocol, setting, chunk, replica) draws from its
//! own ChaCha stream keyed by the run seed and the unit's coordinates, so
//! results do not depend on how units are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trials handled by one stream.
pub const CHUNK_TRIALS: u64 = 4096;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit tag for a label such as a protocol name.
pub fn tag(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x1000_0000_01b3)
    })
}

/// Generator for the unit addressed by `coords` under `seed`.
pub fn stream(seed: u64, coords: &[u64]) -> ChaCha8Rng {
    let id = coords
        .iter()
        .fold(0x5851_f42d_4c95_7f2du64, |h, &c| splitmix(h ^ c));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Splits `total` trials into `(chunk index, size)` pairs.
pub fn chunks(total: u64) -> Vec<(u64, u64)> {
    let n = total.div_ceil(CHUNK_TRIALS);
    (0..n)
        .map(|i| (i, CHUNK_TRIALS.min(total - i * CHUNK_TRIALS)))
        .collect()
}
