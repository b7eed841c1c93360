use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// FNV-1a over labelled parts, finished with a splitmix64 round. Stable
// across platforms and releases, unlike std's DefaultHasher.
fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in part.iter().chain(&(part.len() as u64).to_le_bytes()) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Random stream owned by a single device.
pub(crate) fn device_rng(seed: u64, label: &str, id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stable_hash(&[&seed.to_le_bytes(), label.as_bytes(), id.as_bytes()]))
}

/// Random stream shared by an unordered pair of devices.
pub(crate) fn pair_rng(seed: u64, a: &str, b: &str) -> ChaCha8Rng {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    ChaCha8Rng::seed_from_u64(stable_hash(&[&seed.to_le_bytes(), b"pair", lo.as_bytes(), hi.as_bytes()]))
}
