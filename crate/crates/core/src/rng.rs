//! Seeded randomness. Every random draw in a run derives from the single
//! scene seed, keyed by what it is for, so results never depend on
//! scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer, used to spread structured keys over the seed space.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Domain tags keep independent consumers of one seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Spawn = 1,
    Sensor = 2,
    Test = 0xFF,
}

/// Generator for one consumer and one key (e.g. a frame index).
pub fn keyed(seed: u64, domain: Domain, key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(mix64(seed ^ mix64(domain as u64)) ^ key))
}

/// Per-ray generator keyed on `(seed, frame, ray)`: the stream for a ray is
/// the same whether rays run sequentially or in parallel.
pub fn ray_stream(seed: u64, sensor: u64, frame: u64, ray: u64) -> ChaCha8Rng {
    let mut rng = keyed(seed, Domain::Sensor, mix64(sensor) ^ frame);
    rng.set_stream(ray);
    rng
}
