//! Synthetic routing-table generators.
//!
//! `random_fib` draws uniformly distributed prefixes for differential
//! testing. `representative_v4` and `representative_v6` synthesize tables
//! whose aggregate statistics (length histogram, slice clustering,
//! deaggregation depth) track the September 2023 global BGP snapshots, so
//! metric reproduction and scaling experiments can run without shipping a
//! real table dump.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fib::{Family, Fib, IpPrefix, NexthopId};

/// A FIB of `n` distinct prefixes with uniformly random lengths and values.
/// Deterministic for a fixed seed.
pub fn random_fib(family: Family, n: usize, hop_bits: u8, seed: u64) -> Fib {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = family.width();
    let mut fib = Fib::new(family, hop_bits);
    let mut seen = BTreeSet::new();
    let hop_max = (1u64 << hop_bits.min(16) as u32) as u32;
    let mut attempts = 0usize;
    while seen.len() < n {
        attempts += 1;
        if attempts > n.saturating_mul(200) + 10_000 {
            break; // tiny universes saturate; return what fits
        }
        let len = rng.gen_range(0..=w);
        let value = if len == 0 {
            0
        } else {
            rng.gen::<u64>() >> (64 - len as u32)
        };
        let p = IpPrefix::from_value(family, value, len).unwrap();
        if seen.insert(p) {
            let hop = NexthopId(rng.gen_range(1..hop_max.max(2)));
            fib.insert(p, hop).unwrap();
        }
    }
    fib
}

/// IPv4 prefix-length shares in the Sep 2023 global table (percent).
const V4_LENGTH_SHARES: &[(u8, f64)] = &[
    (11, 0.01),
    (12, 0.03),
    (13, 0.06),
    (14, 0.13),
    (15, 0.23),
    (16, 1.45),
    (17, 0.89),
    (18, 1.49),
    (19, 2.70),
    (20, 4.78),
    (21, 5.54),
    (22, 11.84),
    (23, 10.68),
    (24, 60.07),
    (25, 0.08),
    (27, 0.02),
];

/// Distinct-next-hop alphabet for synthetic tables.
const HOP_ALPHABET: u32 = 64;

/// Synthesizes a v4 table of about `total` routes matching the Sep 2023
/// length distribution. Length-scheme metrics (bitmap schemes, TCAM
/// baselines) depend only on the histogram, so this stands in for a real
/// snapshot for those purposes.
pub fn representative_v4(total: u64, seed: u64) -> Fib {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fib = Fib::new(Family::V4, 8);
    let mut seen = BTreeSet::new();
    for &(len, pct) in V4_LENGTH_SHARES {
        let count = ((pct / 100.0) * total as f64).round() as u64;
        let mut made = 0;
        while made < count {
            let value = rng.gen::<u64>() >> (64 - len as u32);
            let p = IpPrefix::from_value(Family::V4, value, len).unwrap();
            if seen.insert(p) {
                fib.insert(p, NexthopId(rng.gen_range(1..=HOP_ALPHABET)))
                    .unwrap();
                made += 1;
            }
        }
    }
    fib
}

/// IPv6 prefix-length shares in the Sep 2023 global table (percent),
/// conditioned on length >= 26. The tiny <= 24 tail is drawn separately.
const V6_LENGTH_SHARES: &[(u8, f64)] = &[
    (26, 0.01),
    (27, 0.01),
    (28, 0.11),
    (29, 2.31),
    (30, 0.32),
    (31, 0.16),
    (32, 12.17),
    (33, 2.07),
    (34, 1.96),
    (35, 0.69),
    (36, 3.53),
    (37, 0.57),
    (38, 0.94),
    (39, 0.77),
    (40, 7.91),
    (41, 0.51),
    (42, 1.90),
    (43, 0.65),
    (44, 9.27),
    (45, 1.16),
    (46, 2.54),
    (47, 2.97),
    (48, 46.48),
    (49, 0.01),
    (52, 0.03),
    (56, 0.44),
    (64, 0.46),
];

/// Share of routes announced as the allocation's own /32.
const V6_P32: f64 = 0.1217;

/// Probability that a deaggregated route keeps its allocation's next hop.
/// Same-hop neighbours merge during range expansion, so this knob sets the
/// interval-per-route ratio.
const V6_P_SAME_HOP: f64 = 0.55;

/// Provider allocations (/32 blocks) in the synthetic registry.
const V6_ALLOCATIONS: usize = 36_000;

/// Routes in the single most deaggregated allocation. Drives the deepest
/// binary-search tree.
const V6_HEAVY_ROUTES: usize = 2_800;

/// Extra routes in sibling allocations under the heavy /20.
const V6_HEAVY20_SIBLING_ROUTES: usize = 3_200;

/// One registry level: `active` children weighted toward the first entries.
fn zipfish(active: usize) -> Vec<f64> {
    (0..active).map(|i| 1.0 / (i as f64 + 1.2)).collect()
}

struct V6Registry {
    /// weights over /12 blocks, /16 children, /20 children
    w12: WeightedIndex<f64>,
    w16: WeightedIndex<f64>,
    w20: WeightedIndex<f64>,
    b12: Vec<u64>,
    active16: usize,
    active20: usize,
}

impl V6Registry {
    fn new(rng: &mut ChaCha8Rng) -> V6Registry {
        let n12 = 8;
        let active16 = 8;
        let active20 = 7;
        // /12 block values: top 3 bits are 000 (one IPv6 universe), the
        // remaining 9 bits distinct at random.
        let mut b12 = BTreeSet::new();
        while b12.len() < n12 {
            b12.insert(rng.gen_range(0u64..512));
        }
        V6Registry {
            w12: WeightedIndex::new(zipfish(n12)).unwrap(),
            w16: WeightedIndex::new(zipfish(active16)).unwrap(),
            w20: WeightedIndex::new(zipfish(active20)).unwrap(),
            b12: b12.into_iter().collect(),
            active16,
            active20,
        }
    }

    /// Draws a /32 allocation value (as the top 32 bits of an address).
    fn draw_alloc(&self, rng: &mut ChaCha8Rng) -> u64 {
        let v12 = self.b12[self.w12.sample(rng)];
        let v16 = self.w16.sample(rng) as u64; // nibble, skew toward 0
        let v20 = self.w20.sample(rng) as u64;
        let v24 = rng.gen_range(0u64..16);
        let v28 = rng.gen_range(0u64..16);
        let v32 = rng.gen_range(0u64..16);
        (((((v12 << 4 | v16) << 4 | v20) << 4 | v24) << 4 | v28) << 4) | v32
    }
}

/// Synthesizes a v6 table of about `total` routes: a skewed registry of
/// provider allocations deaggregating mostly into /48s, one heavily
/// deaggregated allocation, and the Sep 2023 length histogram. All routes
/// sit in the 000 universe (top three bits zero), as multiverse scaling
/// requires.
pub fn representative_v6(total: u64, seed: u64) -> Fib {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reg = V6Registry::new(&mut rng);
    let mut fib = Fib::new(Family::V6, 8);
    let mut seen: BTreeSet<IpPrefix> = BTreeSet::new();

    let length_dist = WeightedIndex::new(V6_LENGTH_SHARES.iter().map(|&(_, w)| w)).unwrap();
    let deagg_dist =
        WeightedIndex::new(V6_LENGTH_SHARES.iter().map(|&(l, w)| if l > 32 { w } else { 0.0 }))
            .unwrap();

    let mut push = |seen: &mut BTreeSet<IpPrefix>,
                    fib: &mut Fib,
                    rng: &mut ChaCha8Rng,
                    alloc32: u64,
                    len: u8,
                    alloc_hop: NexthopId|
     -> bool {
        let value = if len <= 32 {
            alloc32 >> (32 - len as u32)
        } else {
            let suffix = rng.gen::<u64>() >> (64 - (len as u32 - 32));
            alloc32 << (len as u32 - 32) | suffix
        };
        let p = IpPrefix::from_value(Family::V6, value, len).unwrap();
        if !seen.insert(p) {
            return false;
        }
        let hop = if rng.gen_bool(V6_P_SAME_HOP) {
            alloc_hop
        } else {
            NexthopId(rng.gen_range(1..=HOP_ALPHABET))
        };
        fib.insert(p, hop).unwrap();
        true
    };

    // Heavy allocation: one /32 announcing itself plus a few thousand /48s.
    // Its /20 is padded with sibling allocations so shorter slice choices
    // see a strictly larger search tree.
    let heavy12 = reg.b12[0];
    let heavy32 = (((heavy12 << 4) << 4) << 4 << 4 << 4) | 0x1; // x:0:0:0:0:1 nibbles
    let heavy_hop = NexthopId(rng.gen_range(1..=HOP_ALPHABET));
    push(&mut seen, &mut fib, &mut rng, heavy32, 32, heavy_hop);
    let mut made = 0;
    while made < V6_HEAVY_ROUTES {
        if push(&mut seen, &mut fib, &mut rng, heavy32, 48, heavy_hop) {
            made += 1;
        }
    }
    // Sibling allocations inside the heavy /20 but other /24s.
    let mut made = 0;
    while made < V6_HEAVY20_SIBLING_ROUTES {
        let v24 = rng.gen_range(1u64..16); // /24 nibble 0 belongs to the heavy alloc
        let alloc = (heavy32 & !0xfffu64) | v24 << 8 | rng.gen_range(0u64..256);
        let hop = NexthopId(rng.gen_range(1..=HOP_ALPHABET));
        let len = V6_LENGTH_SHARES[deagg_dist.sample(&mut rng)].0;
        if push(&mut seen, &mut fib, &mut rng, alloc, len, hop) {
            made += 1;
        }
    }

    // Short covering routes (<= 24 bits): a trace amount, as observed.
    for _ in 0..(total / 3500).max(2) {
        let alloc = reg.draw_alloc(&mut rng);
        let len = *[20u8, 24].get(rng.gen_range(0..2)).unwrap();
        push(
            &mut seen,
            &mut fib,
            &mut rng,
            alloc,
            len,
            NexthopId(rng.gen_range(1..=HOP_ALPHABET)),
        );
    }

    // Regular allocations.
    let mut allocs: Vec<(u64, NexthopId)> = (0..V6_ALLOCATIONS)
        .map(|_| {
            (
                reg.draw_alloc(&mut rng),
                NexthopId(rng.gen_range(1..=HOP_ALPHABET)),
            )
        })
        .collect();
    allocs.sort_unstable();
    allocs.dedup_by_key(|(a, _)| *a);

    // Announce /32s for a share of allocations, then deaggregate until the
    // table reaches its target size.
    let n32 = (V6_P32 * total as f64) as usize;
    for (alloc, hop) in allocs.iter().take(n32.min(allocs.len())) {
        push(&mut seen, &mut fib, &mut rng, *alloc, 32, *hop);
    }
    let alloc_pick = WeightedIndex::new((0..allocs.len()).map(|i| 1.0 / (i as f64 + 30.0))).unwrap();
    while (fib.len() as u64) < total {
        let (alloc, hop) = allocs[alloc_pick.sample(&mut rng)];
        let len = V6_LENGTH_SHARES[length_dist.sample(&mut rng)].0;
        push(&mut seen, &mut fib, &mut rng, alloc, len, hop);
    }
    fib
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_fib_is_deterministic_and_distinct() {
        let a = random_fib(Family::V4, 5000, 8, 42);
        let b = random_fib(Family::V4, 5000, 8, 42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5000);
    }

    #[test]
    fn representative_v4_tracks_histogram() {
        let fib = representative_v4(100_000, 1);
        let h = fib.length_histogram();
        let frac24 = h.counts[24] as f64 / h.total() as f64;
        assert!((frac24 - 0.6007).abs() < 0.01, "got {frac24}");
        assert!(h.counts[25] > 0, "needs look-aside mass past the pivot");
    }

    #[test]
    fn representative_v6_sits_in_universe_zero() {
        let fib = representative_v6(20_000, 1);
        assert!(fib.len() >= 20_000);
        for (p, _) in fib.routes() {
            assert_eq!(p.bits() >> 61, 0, "route {p} outside universe 000");
            assert!(p.len() >= 3);
        }
    }
}
