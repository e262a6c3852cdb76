//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator (counter based, so its exact position
//! can be compared and restored). A stream is named by a master seed, a text
//! label and an integer index. The three are folded through SplitMix64 into
//! the 64-bit seed handed to the generator:
//!
//! ```text
//! h0 = mix(master ^ 0x5851f42d4c957f2d)
//! h1 = mix(h0 ^ fnv1a64(label))
//! seed = mix(h1 ^ index)
//! ```
//!
//! Sibling streams therefore never share state, and any single stream can be
//! rebuilt without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

pub fn substream_seed(master: u64, label: &str, index: u64) -> u64 {
    let h0 = splitmix64(master ^ 0x5851_f42d_4c95_7f2d);
    let h1 = splitmix64(h0 ^ fnv1a64(label.as_bytes()));
    splitmix64(h1 ^ index)
}

pub fn substream(master: u64, label: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(substream_seed(master, label, index))
}
