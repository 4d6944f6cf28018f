//! Range-search lookup behind an initial ternary table.
//!
//! Every prefix is condensed to a unique `k`-bit slice in a ternary initial
//! table. Slices shared by longer prefixes point at a binary search tree
//! over the *range expansion* of their residual bits: the residual prefixes
//! become sorted, contiguous, non-overlapping intervals covering the whole
//! residual space; neighbouring intervals with equal hops merge; right
//! endpoints are discarded. Intervals added to complete the cover inherit
//! the hop of the slice's own longest covering route, so an address the
//! initial table sends to a tree with no legitimate match still resolves
//! correctly.
//!
//! Each tree is balanced by recursive median selection and fanned out one
//! level per table, so a lookup visits every table at most once: the model
//! cost is one initial step plus one step per tree level.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fib::{Addr, Family, Fib, IpPrefix, NexthopId};
use crate::model::{CramProgram, TableSpec};
use crate::oracle::BinaryTrie;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BsicConfig {
    /// Initial slice size in bits, bounded by the ternary block width.
    pub k: u8,
}

impl BsicConfig {
    pub fn new(k: u8) -> BsicConfig {
        BsicConfig { k }
    }

    fn validate(&self, family: Family) -> Result<(), BsicError> {
        if self.k == 0 || self.k > family.width().min(44) {
            return Err(BsicError::BadConfig(format!(
                "k={} outside 1..={}",
                self.k,
                family.width().min(44)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BsicError {
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("family mismatch: structure is {expected}, got {got}")]
    FamilyMismatch { expected: Family, got: Family },
    #[error("node reference {index} out of range at level {level}")]
    CorruptStructure { level: usize, index: u32 },
}

/// What an initial-table hit yields: a terminal hop, or the root of a
/// search tree (an index into level table 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialAction {
    Hop(NexthopId),
    Bst(u32),
}

/// One ternary entry over the first `k` address bits. The mask is a prefix
/// mask: `mask_len` leading care bits, wildcards on the right. Priority is
/// the covered-prefix length, so the first match in descending priority
/// order is the longest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialEntry {
    /// Slice value, low-aligned in `k` bits (wildcard bits zero).
    pub value: u64,
    pub mask_len: u8,
    pub action: InitialAction,
}

/// Sorted, contiguous, non-overlapping intervals covering the residual
/// space, with neighbouring same-hop intervals merged. `None` hops resolve
/// to the table default.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeList {
    pub width: u8,
    pub intervals: Vec<(u64, u64, Option<NexthopId>)>,
}

impl RangeList {
    pub fn left_endpoints(&self) -> impl Iterator<Item = (u64, Option<NexthopId>)> + '_ {
        self.intervals.iter().map(|&(lo, _, hop)| (lo, hop))
    }
}

impl fmt::Display for RangeList {
    /// The fixture format: one `lo - hi  hop` row per interval, endpoints
    /// spelled as fixed-width bit strings and `-` for the default.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &(lo, hi, hop) in &self.intervals {
            let w = self.width as usize;
            match hop {
                Some(h) => writeln!(f, "{lo:0w$b} - {hi:0w$b}  {h}")?,
                None => writeln!(f, "{lo:0w$b} - {hi:0w$b}  -")?,
            }
        }
        Ok(())
    }
}

/// A residual prefix: the bits of a route past the slice, plus its hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Residual {
    pub value: u64,
    pub len: u8,
    pub hop: NexthopId,
}

/// The residual prefixes sharing one slice, with the hop gap intervals
/// inherit (the slice's longest covering route of length <= k, if any).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceGroup {
    pub slice: u64,
    pub residuals: Vec<Residual>,
    pub inherited: Option<NexthopId>,
}

/// Populates the initial table and collects the residual groups that need
/// search trees. Entry actions follow the three length cases: shorter
/// prefixes are padded with wildcards and keep their hop; exact-length
/// slices keep their hop unless longer prefixes share the slice; longer
/// prefixes are trimmed and point at their slice's tree.
pub fn build_initial_table(
    fib: &Fib,
    cfg: &BsicConfig,
) -> Result<(Vec<InitialEntry>, Vec<SliceGroup>), BsicError> {
    cfg.validate(fib.family())?;
    let k = cfg.k;

    // Longest covering route of length <= k for a slice, via a trie over
    // the short routes only.
    let mut short_fib = Fib::new(fib.family(), fib.hop_bits());
    for (p, hop) in fib.routes().filter(|(p, _)| p.len() <= k) {
        short_fib.insert(*p, *hop).unwrap();
    }
    let short_trie = BinaryTrie::build(&short_fib);

    let mut groups: BTreeMap<u64, Vec<Residual>> = BTreeMap::new();
    let mut entries: Vec<InitialEntry> = Vec::new();
    let mut exact_hops: BTreeMap<u64, NexthopId> = BTreeMap::new();

    for (p, hop) in fib.routes() {
        let len = p.len();
        if len < k {
            entries.push(InitialEntry {
                value: p.value() << (k - len) as u32,
                mask_len: len,
                action: InitialAction::Hop(*hop),
            });
        } else if len == k {
            exact_hops.insert(p.value(), *hop);
        } else {
            let slice = p.bits() >> (64 - k as u32);
            let resid_len = len - k;
            let value = (p.bits() << k as u32) >> (64 - resid_len as u32);
            groups.entry(slice).or_default().push(Residual {
                value,
                len: resid_len,
                hop: *hop,
            });
        }
    }

    // Exact-length slices without longer sharers terminate with their hop.
    for (&slice, &hop) in &exact_hops {
        if !groups.contains_key(&slice) {
            entries.push(InitialEntry {
                value: slice,
                mask_len: k,
                action: InitialAction::Hop(hop),
            });
        }
    }

    let mut out_groups = Vec::with_capacity(groups.len());
    for (slice, mut residuals) in groups {
        residuals.sort_unstable_by_key(|r| (r.value << (64 - r.len.max(1) as u32), r.len));
        let inherited = short_trie.lookup_opt(Addr::from_value(
            fib.family(),
            slice << (fib.width() - k) as u32,
        ));
        entries.push(InitialEntry {
            value: slice,
            mask_len: k,
            action: InitialAction::Bst(out_groups.len() as u32), // patched to roots later
        });
        out_groups.push(SliceGroup {
            slice,
            residuals,
            inherited,
        });
    }

    entries.sort_unstable_by(|a, b| {
        b.mask_len
            .cmp(&a.mask_len)
            .then(a.value.cmp(&b.value))
            .then_with(|| match (a.action, b.action) {
                (InitialAction::Hop(_), InitialAction::Bst(_)) => std::cmp::Ordering::Less,
                (InitialAction::Bst(_), InitialAction::Hop(_)) => std::cmp::Ordering::Greater,
                _ => std::cmp::Ordering::Equal,
            })
    });
    Ok((entries, out_groups))
}

/// Expands a residual group into its full interval cover of `[0, 2^w - 1]`.
/// Nested prefixes split their parents; gaps carry `inherited`; adjacent
/// intervals with the same hop are merged.
pub fn expand_ranges(group: &[Residual], w: u8, inherited: Option<NexthopId>) -> RangeList {
    assert!(w >= 1 && w <= 63, "residual width {w} out of range");
    let space_hi = (1u64 << w as u32) - 1;
    // (lo, hi, hop), parents before children
    let mut items: Vec<(u64, u64, NexthopId)> = group
        .iter()
        .map(|r| {
            let lo = r.value << (w - r.len) as u32;
            let hi = lo + ((1u64 << (w - r.len) as u32) - 1);
            (lo, hi, r.hop)
        })
        .collect();
    items.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));

    let mut out: Vec<(u64, u64, Option<NexthopId>)> = Vec::with_capacity(2 * items.len() + 1);
    fn emit(
        range: (u64, u64),
        items: &[(u64, u64, NexthopId)],
        active: Option<NexthopId>,
        out: &mut Vec<(u64, u64, Option<NexthopId>)>,
    ) {
        let mut cur = range.0;
        let mut i = 0;
        while i < items.len() {
            let (lo, hi, hop) = items[i];
            let mut j = i + 1;
            while j < items.len() && items[j].0 <= hi {
                j += 1;
            }
            if lo > cur {
                out.push((cur, lo - 1, active));
            }
            emit((lo, hi), &items[i + 1..j], Some(hop), out);
            cur = hi + 1;
            i = j;
        }
        if cur <= range.1 {
            out.push((cur, range.1, active));
        }
    }
    emit((0, space_hi), &items, inherited, &mut out);

    // merge neighbouring intervals with the same hop
    let mut merged: Vec<(u64, u64, Option<NexthopId>)> = Vec::with_capacity(out.len());
    for (lo, hi, hop) in out {
        match merged.last_mut() {
            Some(last) if last.2 == hop && last.1 + 1 == lo => last.1 = hi,
            _ => merged.push((lo, hi, hop)),
        }
    }
    debug_assert_eq!(merged.first().map(|i| i.0), Some(0));
    debug_assert_eq!(merged.last().map(|i| i.1), Some(space_hi));
    RangeList {
        width: w,
        intervals: merged,
    }
}

/// One search-tree node as stored in a level table: the interval's left
/// endpoint, its hop, and indices of the children in the next level's
/// table (`NO_CHILD` when absent).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BstNode {
    pub endpoint: u64,
    pub hop: Option<NexthopId>,
    pub left: u32,
    pub right: u32,
}

pub const NO_CHILD: u32 = u32::MAX;

/// The built structure: the initial ternary table plus one node table per
/// search level (level tables are shared by all trees).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BsicStructure {
    pub config: BsicConfig,
    family: Family,
    hop_bits: u8,
    default_hop: NexthopId,
    pub initial: Vec<InitialEntry>,
    pub levels: Vec<Vec<BstNode>>,
}

/// Places a sorted endpoint list into the level tables by recursive median
/// selection (lower median on even counts), returning the root index.
fn place_bst(
    endpoints: &[(u64, Option<NexthopId>)],
    depth: usize,
    levels: &mut Vec<Vec<BstNode>>,
) -> u32 {
    debug_assert!(!endpoints.is_empty());
    if levels.len() <= depth {
        levels.push(Vec::new());
    }
    let mid = (endpoints.len() - 1) / 2;
    let idx = levels[depth].len() as u32;
    levels[depth].push(BstNode {
        endpoint: endpoints[mid].0,
        hop: endpoints[mid].1,
        left: NO_CHILD,
        right: NO_CHILD,
    });
    if mid > 0 {
        let left = place_bst(&endpoints[..mid], depth + 1, levels);
        levels[depth][idx as usize].left = left;
    }
    if mid + 1 < endpoints.len() {
        let right = place_bst(&endpoints[mid + 1..], depth + 1, levels);
        levels[depth][idx as usize].right = right;
    }
    idx
}

pub fn build_bsic(fib: &Fib, cfg: &BsicConfig) -> Result<BsicStructure, BsicError> {
    let (mut entries, groups) = build_initial_table(fib, cfg)?;
    let w = fib.width() - cfg.k;
    let mut levels: Vec<Vec<BstNode>> = Vec::new();
    let mut roots = Vec::with_capacity(groups.len());
    for g in &groups {
        let ranges = expand_ranges(&g.residuals, w, g.inherited);
        let endpoints: Vec<(u64, Option<NexthopId>)> = ranges.left_endpoints().collect();
        roots.push(place_bst(&endpoints, 0, &mut levels));
    }
    for e in &mut entries {
        if let InitialAction::Bst(group_idx) = e.action {
            e.action = InitialAction::Bst(roots[group_idx as usize]);
        }
    }
    Ok(BsicStructure {
        config: *cfg,
        family: fib.family(),
        hop_bits: fib.hop_bits(),
        default_hop: fib.default_hop(),
        initial: entries,
        levels,
    })
}

/// Updates go through a full rebuild: the level tables have inter-level
/// dependencies that make incremental edits fragile, and a rebuild is the
/// supported path.
pub fn rebuild_bsic(fib: &Fib, cfg: &BsicConfig) -> Result<BsicStructure, BsicError> {
    build_bsic(fib, cfg)
}

impl BsicStructure {
    pub fn family(&self) -> Family {
        self.family
    }

    fn residual_key(&self, addr: Addr) -> u64 {
        let w = self.family.width() - self.config.k;
        if w == 0 {
            0
        } else {
            addr.shifted_left(self.config.k) >> (64 - w as u32)
        }
    }

    fn initial_match(&self, slice: u64) -> Option<&InitialEntry> {
        self.initial.iter().find(|e| {
            let shift = (self.config.k - e.mask_len) as u32;
            if e.mask_len == 0 {
                true
            } else {
                slice >> shift == e.value >> shift
            }
        })
    }

    /// Ternary match on the first `k` bits, then a three-way binary search
    /// tracking the best hop on equality and right descents.
    pub fn lookup(&self, addr: Addr) -> Result<NexthopId, BsicError> {
        if addr.family() != self.family {
            return Err(BsicError::FamilyMismatch {
                expected: self.family,
                got: addr.family(),
            });
        }
        let slice = addr.first_bits(self.config.k);
        let root = match self.initial_match(slice) {
            None => return Ok(self.default_hop),
            Some(e) => match e.action {
                InitialAction::Hop(h) => return Ok(h),
                InitialAction::Bst(root) => root,
            },
        };
        let key = self.residual_key(addr);
        let mut best: Option<NexthopId> = None;
        let mut idx = root;
        for (level, table) in self.levels.iter().enumerate() {
            if idx == NO_CHILD {
                break;
            }
            let node = table
                .get(idx as usize)
                .ok_or(BsicError::CorruptStructure { level, index: idx })?;
            if node.endpoint == key {
                return Ok(node.hop.unwrap_or(self.default_hop));
            } else if node.endpoint < key {
                best = node.hop;
                idx = node.right;
            } else {
                idx = node.left;
            }
        }
        Ok(best.unwrap_or(self.default_hop))
    }

    /// Rebuilds the interval list a slice's tree encodes, for debugging and
    /// fixture diffing. In-order traversal recovers the left endpoints;
    /// right endpoints are implied by the successors.
    pub fn ranges_for_slice(&self, slice: u64) -> Option<RangeList> {
        let e = self.initial.iter().find(|e| {
            e.mask_len == self.config.k && e.value == slice
        })?;
        let root = match e.action {
            InitialAction::Bst(root) => root,
            InitialAction::Hop(_) => return None,
        };
        let mut points = Vec::new();
        self.in_order(0, root, &mut points);
        let w = self.family.width() - self.config.k;
        let hi = (1u64 << w as u32) - 1;
        let mut intervals = Vec::with_capacity(points.len());
        for (i, &(lo, hop)) in points.iter().enumerate() {
            let next = points.get(i + 1).map(|&(lo, _)| lo - 1).unwrap_or(hi);
            intervals.push((lo, next, hop));
        }
        Some(RangeList {
            width: w,
            intervals,
        })
    }

    fn in_order(&self, level: usize, idx: u32, out: &mut Vec<(u64, Option<NexthopId>)>) {
        if idx == NO_CHILD || level >= self.levels.len() {
            return;
        }
        let node = self.levels[level][idx as usize];
        self.in_order(level + 1, node.left, out);
        out.push((node.endpoint, node.hop));
        self.in_order(level + 1, node.right, out);
    }

    /// Search depth: the number of levels.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Reference width for indices into `levels[level]`, including a
    /// spare code point for "no child".
    fn ref_bits(&self, level: usize) -> u32 {
        match self.levels.get(level) {
            None => 0,
            Some(t) => u64::BITS - (t.len() as u64).leading_zeros(),
        }
    }

    /// The cost-model program: a ternary initial step chained into one
    /// directly indexed node table per level. Latency is `1 + depth`.
    pub fn to_program(&self) -> CramProgram {
        let w = (self.family.width() - self.config.k) as u32;
        let mut prog = CramProgram::new();
        let initial = if self.initial.is_empty() {
            None
        } else {
            Some(TableSpec::ternary(
                "initial",
                self.config.k as u32,
                self.initial.len() as u64,
                1 + (self.hop_bits as u32).max(self.ref_bits(0)),
            ))
        };
        let mut prev = prog.add_step(initial, &["addr"], &["bst_idx_0", "hop_best"]);
        for (level, table) in self.levels.iter().enumerate() {
            let t = TableSpec::direct(
                format!("bst_level_{level}"),
                self.ref_bits(level),
                table.len() as u64,
                self.hop_bits as u32 + 2 * self.ref_bits(level + 1) + w,
            );
            let cur = format!("bst_idx_{}", level + 1);
            let prv = format!("bst_idx_{level}");
            let step = prog.add_step(
                Some(t),
                &["addr", prv.as_str(), "hop_best"],
                &[cur.as_str(), "hop_best"],
            );
            prog.add_edge(prev, step);
            prev = step;
        }
        prog
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::scan_lookup;
    use crate::testdata;

    fn toy_cfg() -> BsicConfig {
        BsicConfig::new(4)
    }

    fn toy_addr(v: u64) -> Addr {
        Addr::from_value(Family::Toy(8), v)
    }

    #[test]
    fn initial_table_matches_published_example() {
        let toy = testdata::table1();
        let (entries, groups) = build_initial_table(&toy.fib, &toy_cfg()).unwrap();
        assert_eq!(entries.len(), 4);

        // 011* -> next hop B
        let pad = entries.iter().find(|e| e.mask_len == 3).unwrap();
        assert_eq!(pad.value, 0b0110);
        assert_eq!(pad.action, InitialAction::Hop(toy.hop_by_label("B").unwrap()));

        // exact slices 0101, 1001, 1010 each point at a tree
        let slices: Vec<u64> = entries
            .iter()
            .filter(|e| e.mask_len == 4)
            .map(|e| e.value)
            .collect();
        assert_eq!(slices, vec![0b0101, 0b1001, 0b1010]);
        assert!(entries
            .iter()
            .filter(|e| e.mask_len == 4)
            .all(|e| matches!(e.action, InitialAction::Bst(_))));

        // group contents: {00**}, {00**, 01**, 0100, 1010, 1011}, {0011}
        let spell = |g: &SliceGroup| {
            let mut v: Vec<(u64, u8)> = g.residuals.iter().map(|r| (r.value, r.len)).collect();
            v.sort_unstable();
            v
        };
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[0].slice, 0b0101);
        assert_eq!(spell(&groups[0]), vec![(0b00, 2)]);
        assert_eq!(groups[1].slice, 0b1001);
        assert_eq!(
            spell(&groups[1]),
            vec![(0b00, 2), (0b01, 2), (0b0100, 4), (0b1010, 4), (0b1011, 4)]
        );
        assert_eq!(groups[2].slice, 0b1010);
        assert_eq!(spell(&groups[2]), vec![(0b0011, 4)]);
        // no route of length <= 4 covers any of these slices
        assert!(groups.iter().all(|g| g.inherited.is_none()));
    }

    #[test]
    fn empty_fib_produces_empty_table() {
        let fib = Fib::new(Family::Toy(8), 8);
        let s = build_bsic(&fib, &toy_cfg()).unwrap();
        assert!(s.initial.is_empty());
        for v in 0..256 {
            assert_eq!(s.lookup(toy_addr(v)).unwrap(), NexthopId::DEFAULT);
        }
        assert_eq!(s.to_program().latency_steps().unwrap(), 1);
    }

    #[test]
    fn single_exact_route_terminates_in_initial_table() {
        let mut fib = Fib::new(Family::Toy(8), 8);
        fib.insert(
            IpPrefix::from_value(Family::Toy(8), 0b1010, 4).unwrap(),
            NexthopId(5),
        )
        .unwrap();
        let s = build_bsic(&fib, &toy_cfg()).unwrap();
        assert_eq!(s.initial.len(), 1);
        assert_eq!(s.initial[0].action, InitialAction::Hop(NexthopId(5)));
        assert_eq!(s.depth(), 0);
    }

    #[test]
    fn range_expansion_matches_published_slice() {
        let toy = testdata::table1();
        let (_, groups) = build_initial_table(&toy.fib, &toy_cfg()).unwrap();
        let g = &groups[1]; // slice 1001
        let ranges = expand_ranges(&g.residuals, 4, g.inherited);
        let by = |l: &str| Some(toy.hop_by_label(l).unwrap());
        assert_eq!(
            ranges.intervals,
            vec![
                (0b0000, 0b0011, by("C")),
                (0b0100, 0b0100, by("A")),
                (0b0101, 0b0111, by("D")),
                (0b1000, 0b1001, None),
                (0b1010, 0b1010, by("B")),
                (0b1011, 0b1011, by("C")),
                (0b1100, 0b1111, None),
            ]
        );
        let dump = ranges.to_string();
        assert!(dump.starts_with("0000 - 0011  3\n0100 - 0100  1\n"));
    }

    #[test]
    fn empty_group_is_one_inherited_interval() {
        let ranges = expand_ranges(&[], 4, Some(NexthopId(9)));
        assert_eq!(ranges.intervals, vec![(0, 15, Some(NexthopId(9)))]);
    }

    #[test]
    fn half_space_group_splits_in_two() {
        let group = [Residual {
            value: 0,
            len: 1,
            hop: NexthopId(7),
        }];
        let ranges = expand_ranges(&group, 4, Some(NexthopId(2)));
        assert_eq!(
            ranges.intervals,
            vec![(0b0000, 0b0111, Some(NexthopId(7))), (0b1000, 0b1111, Some(NexthopId(2)))]
        );
    }

    #[test]
    fn bst_shape_matches_published_tree() {
        let toy = testdata::table1();
        let s = build_bsic(&toy.fib, &toy_cfg()).unwrap();
        let root_idx = match s
            .initial
            .iter()
            .find(|e| e.mask_len == 4 && e.value == 0b1001)
            .unwrap()
            .action
        {
            InitialAction::Bst(r) => r,
            _ => panic!("slice 1001 should point at a tree"),
        };
        let by = |l: &str| Some(toy.hop_by_label(l).unwrap());
        let root = s.levels[0][root_idx as usize];
        assert_eq!((root.endpoint, root.hop), (0b1000, None));
        let l = s.levels[1][root.left as usize];
        let r = s.levels[1][root.right as usize];
        assert_eq!((l.endpoint, l.hop), (0b0100, by("A")));
        assert_eq!((r.endpoint, r.hop), (0b1011, by("C")));
        let ll = s.levels[2][l.left as usize];
        let lr = s.levels[2][l.right as usize];
        let rl = s.levels[2][r.left as usize];
        let rr = s.levels[2][r.right as usize];
        assert_eq!((ll.endpoint, ll.hop), (0b0000, by("C")));
        assert_eq!((lr.endpoint, lr.hop), (0b0101, by("D")));
        assert_eq!((rl.endpoint, rl.hop), (0b1010, by("B")));
        assert_eq!((rr.endpoint, rr.hop), (0b1100, None));
        assert_eq!(s.depth(), 3);
    }

    #[test]
    fn single_endpoint_tree_has_depth_one() {
        let mut levels = Vec::new();
        let root = place_bst(&[(5, None)], 0, &mut levels);
        assert_eq!(root, 0);
        assert_eq!(levels.len(), 1);
    }

    #[test]
    fn six_endpoints_take_lower_median_root() {
        let points: Vec<(u64, Option<NexthopId>)> =
            (0..6u64).map(|i| (i * 10, Some(NexthopId(1)))).collect();
        let mut levels = Vec::new();
        let root = place_bst(&points, 0, &mut levels);
        assert_eq!(levels[0][root as usize].endpoint, 20); // index 2 of 0..=5
        assert_eq!(levels.len(), 3);
    }

    #[test]
    fn toy_lookup_examples() {
        let toy = testdata::table1();
        let s = build_bsic(&toy.fib, &toy_cfg()).unwrap();
        // slice 1001, residual 0101 -> D
        assert_eq!(
            s.lookup(toy_addr(0b10010101)).unwrap(),
            toy.hop_by_label("D").unwrap()
        );
        // slice 1001, residual 1000 lands in an inherited "-" interval
        assert_eq!(s.lookup(toy_addr(0b10011000)).unwrap(), NexthopId::DEFAULT);
        // 011* terminates in the initial table, no tree visit
        assert_eq!(
            s.lookup(toy_addr(0b01100000)).unwrap(),
            toy.hop_by_label("B").unwrap()
        );
    }

    #[test]
    fn exhaustive_toy_equivalence_for_every_k() {
        let toy = testdata::table1();
        for k in 1..=7u8 {
            let s = build_bsic(&toy.fib, &BsicConfig::new(k)).unwrap();
            for v in 0..256 {
                let addr = toy_addr(v);
                assert_eq!(
                    s.lookup(addr).unwrap(),
                    scan_lookup(&toy.fib, addr),
                    "k={k} addr={v:08b}"
                );
            }
        }
    }

    #[test]
    fn in_order_traversal_is_sorted_and_ranges_rebuild() {
        let toy = testdata::table1();
        let s = build_bsic(&toy.fib, &toy_cfg()).unwrap();
        let ranges = s.ranges_for_slice(0b1001).unwrap();
        let endpoints: Vec<u64> = ranges.left_endpoints().map(|(lo, _)| lo).collect();
        let mut sorted = endpoints.clone();
        sorted.sort_unstable();
        assert_eq!(endpoints, sorted);
        // matches a fresh expansion
        let (_, groups) = build_initial_table(&toy.fib, &toy_cfg()).unwrap();
        assert_eq!(ranges, expand_ranges(&groups[1].residuals, 4, None));
    }

    #[test]
    fn program_latency_is_one_plus_depth() {
        let toy = testdata::table1();
        let s = build_bsic(&toy.fib, &toy_cfg()).unwrap();
        let prog = s.to_program();
        prog.validate().unwrap();
        assert_eq!(prog.latency_steps().unwrap(), 4); // depth 3
        // balanced construction: depth == ceil(log2(max interval count + 1))
        let (_, groups) = build_initial_table(&toy.fib, &toy_cfg()).unwrap();
        let max_intervals = groups
            .iter()
            .map(|g| expand_ranges(&g.residuals, 4, g.inherited).intervals.len())
            .max()
            .unwrap();
        let expect = (max_intervals as u64 + 1).next_power_of_two().trailing_zeros();
        assert_eq!(s.depth() as u32, expect);
    }

    #[test]
    fn per_level_sram_counts_nodes_times_node_bits() {
        let toy = testdata::table1();
        let s = build_bsic(&toy.fib, &toy_cfg()).unwrap();
        let prog = s.to_program();
        let w = 4u32;
        for (level, table) in s.levels.iter().enumerate() {
            let spec = prog
                .tables()
                .find(|t| t.name == format!("bst_level_{level}"))
                .unwrap();
            let node_bits = 8 + 2 * s.ref_bits(level + 1) + w;
            assert_eq!(spec.sram_bits(), table.len() as u64 * node_bits as u64);
        }
    }

    #[test]
    fn rebuild_tracks_route_changes() {
        let toy = testdata::table1();
        let mut fib = toy.fib.clone();
        let p = IpPrefix::from_value(Family::Toy(8), 0b10011, 5).unwrap();
        fib.insert(p, NexthopId(2)).unwrap();
        let s = rebuild_bsic(&fib, &toy_cfg()).unwrap();
        for v in 0..256 {
            assert_eq!(s.lookup(toy_addr(v)).unwrap(), scan_lookup(&fib, toy_addr(v)));
        }
        fib.remove(&p).unwrap();
        let s = rebuild_bsic(&fib, &toy_cfg()).unwrap();
        for v in 0..256 {
            assert_eq!(s.lookup(toy_addr(v)).unwrap(), scan_lookup(&fib, toy_addr(v)));
        }
    }
}
