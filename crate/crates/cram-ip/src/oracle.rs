//! Ground-truth longest-prefix match.
//!
//! Two independent oracles live here: a unibit binary trie and a plain
//! linear scan over all routes. Every scheme's lookup is tested against
//! both, so a bug in one oracle cannot silently validate a scheme.

use serde::{Deserialize, Serialize};

use crate::fib::{Addr, Fib, IpPrefix, NexthopId};

const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrieNode {
    zero: u32,
    one: u32,
    hop: Option<NexthopId>,
}

impl TrieNode {
    fn leaf() -> TrieNode {
        TrieNode {
            zero: NO_NODE,
            one: NO_NODE,
            hop: None,
        }
    }
}

/// A unibit binary trie: the path from the root to a hop-bearing node spells
/// exactly one stored prefix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinaryTrie {
    nodes: Vec<TrieNode>,
    default_hop: NexthopId,
    width: u8,
    route_count: usize,
}

impl BinaryTrie {
    /// Builds a trie storing every route of `fib` exactly once.
    pub fn build(fib: &Fib) -> BinaryTrie {
        let mut t = BinaryTrie {
            nodes: vec![TrieNode::leaf()],
            default_hop: fib.default_hop(),
            width: fib.width(),
            route_count: 0,
        };
        for (p, hop) in fib.routes() {
            t.insert(p, *hop);
        }
        t
    }

    pub fn route_count(&self) -> usize {
        self.route_count
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Inserts or overwrites one route.
    pub fn insert(&mut self, p: &IpPrefix, hop: NexthopId) {
        let mut at = 0usize;
        for i in 0..p.len() {
            let bit = (p.bits() >> (63 - i as u32)) & 1;
            let next = if bit == 0 {
                self.nodes[at].zero
            } else {
                self.nodes[at].one
            };
            at = if next == NO_NODE {
                self.nodes.push(TrieNode::leaf());
                let idx = (self.nodes.len() - 1) as u32;
                if bit == 0 {
                    self.nodes[at].zero = idx;
                } else {
                    self.nodes[at].one = idx;
                }
                idx as usize
            } else {
                next as usize
            };
        }
        if self.nodes[at].hop.replace(hop).is_none() {
            self.route_count += 1;
        }
    }

    /// Removes a route if present; dangling interior nodes are left in place
    /// (they no longer bear hops, so lookups are unaffected).
    pub fn remove(&mut self, p: &IpPrefix) -> Option<NexthopId> {
        let mut at = 0usize;
        for i in 0..p.len() {
            let bit = (p.bits() >> (63 - i as u32)) & 1;
            let next = if bit == 0 {
                self.nodes[at].zero
            } else {
                self.nodes[at].one
            };
            if next == NO_NODE {
                return None;
            }
            at = next as usize;
        }
        let old = self.nodes[at].hop.take();
        if old.is_some() {
            self.route_count -= 1;
        }
        old
    }

    /// Hop of the longest stored prefix matching `addr`, else the default.
    pub fn lookup(&self, addr: Addr) -> NexthopId {
        self.lookup_opt(addr).unwrap_or(self.default_hop)
    }

    /// As `lookup`, but `None` when no stored prefix matches.
    pub fn lookup_opt(&self, addr: Addr) -> Option<NexthopId> {
        let mut at = 0usize;
        let mut best = None;
        for i in 0..self.width {
            if let Some(h) = self.nodes[at].hop {
                best = Some(h);
            }
            let bit = (addr.bits() >> (63 - i as u32)) & 1;
            let next = if bit == 0 {
                self.nodes[at].zero
            } else {
                self.nodes[at].one
            };
            if next == NO_NODE {
                return best;
            }
            at = next as usize;
        }
        self.nodes[at].hop.or(best)
    }
}

/// Second oracle: scan every route and keep the longest match.
pub fn scan_lookup(fib: &Fib, addr: Addr) -> NexthopId {
    let mut best: Option<(u8, NexthopId)> = None;
    for (p, hop) in fib.routes() {
        if p.covers(addr) && best.map_or(true, |(len, _)| p.len() >= len) {
            best = Some((p.len(), *hop));
        }
    }
    best.map(|(_, h)| h).unwrap_or(fib.default_hop())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fib::Family;
    use crate::synth::random_fib;
    use crate::testdata;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_addr(v: u64) -> Addr {
        Addr::from_value(Family::Toy(8), v)
    }

    #[test]
    fn empty_fib_lookup_returns_default() {
        let mut fib = Fib::new(Family::V4, 8);
        fib.set_default_hop(NexthopId(7));
        let trie = BinaryTrie::build(&fib);
        assert_eq!(trie.node_count(), 1);
        let addr = Addr::from_value(Family::V4, 0x0a000001);
        assert_eq!(trie.lookup(addr), NexthopId(7));
        assert_eq!(scan_lookup(&fib, addr), NexthopId(7));
    }

    #[test]
    fn example_table_has_eight_hop_bearing_nodes() {
        let toy = testdata::table1();
        let trie = BinaryTrie::build(&toy.fib);
        assert_eq!(trie.route_count(), 8);
    }

    #[test]
    fn longest_match_beats_shorter_sibling() {
        let toy = testdata::table1();
        let trie = BinaryTrie::build(&toy.fib);
        // 10010101 matches 100101** (D), longer than the sibling 100100**.
        assert_eq!(trie.lookup(toy_addr(0b10010101)), toy.hop_by_label("D").unwrap());
        // 10010100 matches the exact /8 entry (A), which beats the /6 entry.
        assert_eq!(trie.lookup(toy_addr(0b10010100)), toy.hop_by_label("A").unwrap());
        // 00000000 is covered by nothing.
        assert_eq!(trie.lookup(toy_addr(0)), NexthopId::DEFAULT);
    }

    #[test]
    fn scan_agrees_with_trie_on_example_table() {
        let toy = testdata::table1();
        let trie = BinaryTrie::build(&toy.fib);
        for v in 0..256u64 {
            assert_eq!(trie.lookup(toy_addr(v)), scan_lookup(&toy.fib, toy_addr(v)));
        }
    }

    #[test]
    fn random_fib_hop_bearing_node_count_matches_route_count() {
        let fib = random_fib(Family::V4, 1000, 8, 0xfeed);
        let trie = BinaryTrie::build(&fib);
        assert_eq!(trie.route_count(), fib.len());
    }

    #[test]
    fn cross_oracle_agreement_on_random_addresses() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (n, seed) in [(1_000usize, 21u64), (10_000, 22), (50_000, 23)] {
            let fib = random_fib(Family::V4, n, 8, seed);
            let trie = BinaryTrie::build(&fib);
            let samples = if n >= 50_000 { 100_000 } else { 10_000 };
            for _ in 0..samples {
                let addr = Addr::from_value(Family::V4, rng.gen::<u32>() as u64);
                assert_eq!(trie.lookup(addr), scan_lookup(&fib, addr));
            }
        }
    }

    #[test]
    fn insert_then_delete_restores_lookups() {
        let toy = testdata::table1();
        let trie = BinaryTrie::build(&toy.fib);
        let mut edited = trie.clone();
        let p = IpPrefix::from_value(Family::Toy(8), 0b11, 2).unwrap();
        edited.insert(&p, NexthopId(3));
        assert_ne!(edited.lookup(toy_addr(0b11000000)), trie.lookup(toy_addr(0b11000000)));
        edited.remove(&p);
        for v in 0..256u64 {
            assert_eq!(edited.lookup(toy_addr(v)), trie.lookup(toy_addr(v)));
        }
    }
}
