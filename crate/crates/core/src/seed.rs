//! Stable seeding and hash-based noise helpers.
//!
//! Every random stream in the simulator is derived from the master seed and a
//! component name, so adding or removing one component never perturbs the
//! draws of another. The hashes here are fixed algorithms (FNV-1a, splitmix64)
//! rather than `std` hashers, which keeps derived seeds identical across
//! builds and platforms.

/// FNV-1a 64-bit hash.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives an independent stream seed from the master seed and a stream name.
pub fn derive_seed(master: u64, stream: &str) -> u64 {
    let mut state = master ^ stable_hash(stream.as_bytes());
    splitmix64(&mut state)
}

/// splitmix64 step; advances `state` and returns the next output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a seed with a tuple of integer coordinates into one hash value.
pub fn mix_coords(seed: u64, parts: &[i64]) -> u64 {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for &p in parts {
        state = acc ^ (p as u64);
        acc = splitmix64(&mut state);
    }
    acc
}

/// Maps a hash value to a uniform f64 in [0, 1).
pub fn hash_to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal deviate computed from a single hash value (Box-Muller).
pub fn hash_to_unit_normal(h: u64) -> f64 {
    let mut state = h;
    let u1 = hash_to_unit(splitmix64(&mut state)).max(f64::MIN_POSITIVE);
    let u2 = hash_to_unit(splitmix64(&mut state));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
