//! Counter-based seed derivation so that parallel work gets independent,
//! schedule-free random streams.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for item `index` of stream `stream` under `master`.
pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    let a = mix(master.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let b = mix(a ^ stream.wrapping_mul(0xd1b5_4a32_d192_ed03));
    mix(b ^ index.wrapping_mul(0x8cb9_2ba7_2f3d_8dd7))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_streams_and_indices() {
        let seeds: std::collections::HashSet<u64> = (0..4)
            .flat_map(|s| (0..100).map(move |i| derive(7, s, i)))
            .collect();
        assert_eq!(seeds.len(), 400);
        assert_eq!(derive(7, 1, 2), derive(7, 1, 2));
    }
}
