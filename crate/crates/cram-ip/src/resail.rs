//! Length-search lookup with bitmaps, a bit-marked hash table, and a
//! look-aside TCAM.
//!
//! The structure splits a table at a pivot length (24 for v4):
//!
//! * prefixes longer than the pivot go to a small look-aside TCAM searched
//!   in parallel with everything else;
//! * for each length `i` in `min_bmp..=pivot` a bitmap of `2^i` bits marks
//!   which length-`i` prefixes exist;
//! * prefixes shorter than `min_bmp` are prefix-expanded into the
//!   `min_bmp` bitmap, longest first, never overwriting a set bit;
//! * next hops live in one d-left hash table keyed by *bit marking*: the
//!   matched prefix's bits, a 1 appended, left-shifted to `pivot+1` bits.
//!   The trailing 1 makes the variable-length prefix recoverable, so one
//!   fixed-width table replaces a per-length array family.
//!
//! A lookup is two dependent steps: all bitmap reads and the look-aside
//! match are data-independent (step one), and the winning length's marked
//! key indexes the hash table (step two).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fib::{msb_mask, Addr, Family, Fib, IpPrefix, NexthopId};
use crate::model::{CramProgram, TableSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResailConfig {
    /// Pivot length separating bitmap-handled prefixes from the look-aside.
    pub pivot: u8,
    /// Smallest bitmap level; shorter prefixes are expanded into it.
    pub min_bmp: u8,
    /// d-left subtable count.
    pub dleft_ways: u8,
    /// Target hash load factor (entries / allocated slots).
    pub dleft_load: f64,
}

impl ResailConfig {
    /// The v4 defaults: pivot 24, smallest bitmap 13.
    pub fn v4() -> ResailConfig {
        ResailConfig::new(24, 13)
    }

    pub fn new(pivot: u8, min_bmp: u8) -> ResailConfig {
        ResailConfig {
            pivot,
            min_bmp,
            dleft_ways: 4,
            dleft_load: 0.8,
        }
    }

    fn validate(&self, family: Family) -> Result<(), ResailError> {
        if self.min_bmp > self.pivot || self.pivot > family.width() || self.pivot > 63 {
            return Err(ResailError::BadConfig(format!(
                "need min_bmp <= pivot <= width: min_bmp={}, pivot={}, width={}",
                self.min_bmp,
                self.pivot,
                family.width()
            )));
        }
        if !(self.dleft_load > 0.0 && self.dleft_load <= 0.8) {
            return Err(ResailError::BadConfig(format!(
                "d-left load {} outside (0, 0.8]",
                self.dleft_load
            )));
        }
        if self.dleft_ways < 2 {
            return Err(ResailError::BadConfig("need at least 2 subtables".into()));
        }
        Ok(())
    }

    /// Marked hash key width.
    pub fn key_bits(&self) -> u32 {
        self.pivot as u32 + 1
    }
}

#[derive(Debug, Error)]
pub enum ResailError {
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("hash table full at load {load:.3} after {retries} seed rotations")]
    HashFull { load: f64, retries: u32 },
    #[error("prefix length {len} outside bitmap range [{min_bmp}, {pivot}]")]
    LengthOutsideBitmaps { len: u8, min_bmp: u8, pivot: u8 },
    #[error("route {0} not present")]
    MissingRoute(IpPrefix),
    #[error("family mismatch: structure is {expected}, got {got}")]
    FamilyMismatch { expected: Family, got: Family },
    #[error("bitmap level {level} hit at bit {bit} but the hash table has no entry")]
    Inconsistent { level: u8, bit: u64 },
}

/// Dense bit array of `2^level` bits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bitmap {
    level: u8,
    words: Vec<u64>,
}

impl Bitmap {
    fn new(level: u8) -> Bitmap {
        let bits = 1usize << level;
        Bitmap {
            level,
            words: vec![0; bits.div_ceil(64)],
        }
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn get(&self, idx: u64) -> bool {
        self.words[(idx / 64) as usize] >> (idx % 64) & 1 == 1
    }

    fn set(&mut self, idx: u64) {
        self.words[(idx / 64) as usize] |= 1 << (idx % 64);
    }

    fn clear(&mut self, idx: u64) {
        self.words[(idx / 64) as usize] &= !(1 << (idx % 64));
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

const SLOTS_PER_BUCKET: usize = 4;
const SEED_ROTATIONS: u32 = 20;

/// d-left hash table: `ways` subtables of multi-slot buckets; an insert
/// lands in the least-loaded candidate bucket, leftmost subtable on ties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DLeftTable {
    ways: usize,
    buckets_per_way: usize,
    seed_epoch: u64,
    /// Accounted capacity: `ceil(entries / load)` slots.
    nominal_slots: u64,
    slots: Vec<Option<(u64, NexthopId)>>,
    occupied: usize,
}

impl DLeftTable {
    fn with_capacity(entries: usize, ways: usize, load: f64, seed_epoch: u64) -> DLeftTable {
        let nominal = (entries as f64 / load).ceil() as u64;
        let per_way = (nominal as usize).div_ceil(ways * SLOTS_PER_BUCKET).max(1);
        let buckets_per_way = if entries == 0 { 0 } else { per_way };
        DLeftTable {
            ways,
            buckets_per_way,
            seed_epoch,
            nominal_slots: nominal,
            slots: vec![None; ways * buckets_per_way * SLOTS_PER_BUCKET],
            occupied: 0,
        }
    }

    /// Allocated capacity in slots, as charged to SRAM.
    pub fn capacity_slots(&self) -> u64 {
        self.nominal_slots
    }

    pub fn occupied(&self) -> usize {
        self.occupied
    }

    fn bucket_range(&self, way: usize, key: u64) -> std::ops::Range<usize> {
        let seed = splitmix64(self.seed_epoch.wrapping_mul(0x9e37).wrapping_add(way as u64));
        let b = (splitmix64(seed ^ key) % self.buckets_per_way as u64) as usize;
        let start = (way * self.buckets_per_way + b) * SLOTS_PER_BUCKET;
        start..start + SLOTS_PER_BUCKET
    }

    pub fn lookup(&self, key: u64) -> Option<NexthopId> {
        if self.buckets_per_way == 0 {
            return None;
        }
        for way in 0..self.ways {
            for i in self.bucket_range(way, key) {
                if let Some((k, hop)) = self.slots[i] {
                    if k == key {
                        return Some(hop);
                    }
                }
            }
        }
        None
    }

    /// Inserts or overwrites; fails only when every candidate bucket is full.
    fn insert(&mut self, key: u64, hop: NexthopId) -> Result<(), ()> {
        if self.buckets_per_way == 0 {
            return Err(());
        }
        let mut best: Option<(usize, usize)> = None; // (occupancy, slot index)
        for way in 0..self.ways {
            let range = self.bucket_range(way, key);
            let mut occupancy = 0;
            let mut empty = None;
            for i in range {
                match self.slots[i] {
                    Some((k, _)) if k == key => {
                        self.slots[i] = Some((key, hop));
                        return Ok(());
                    }
                    Some(_) => occupancy += 1,
                    None if empty.is_none() => empty = Some(i),
                    None => {}
                }
            }
            if let Some(slot) = empty {
                if best.map_or(true, |(occ, _)| occupancy < occ) {
                    best = Some((occupancy, slot));
                }
            }
        }
        match best {
            Some((_, slot)) => {
                self.slots[slot] = Some((key, hop));
                self.occupied += 1;
                Ok(())
            }
            None => Err(()),
        }
    }

    fn remove(&mut self, key: u64) -> Option<NexthopId> {
        if self.buckets_per_way == 0 {
            return None;
        }
        for way in 0..self.ways {
            for i in self.bucket_range(way, key) {
                if let Some((k, hop)) = self.slots[i] {
                    if k == key {
                        self.slots[i] = None;
                        self.occupied -= 1;
                        return Some(hop);
                    }
                }
            }
        }
        None
    }

    pub fn entries(&self) -> impl Iterator<Item = (u64, NexthopId)> + '_ {
        self.slots.iter().flatten().copied()
    }
}

/// Parallel ternary table holding every prefix longer than the pivot,
/// ordered longest first so the first covering entry is the best match.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LookAsideTcam {
    entries: Vec<(IpPrefix, NexthopId)>,
}

impl LookAsideTcam {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(IpPrefix, NexthopId)] {
        &self.entries
    }

    fn lookup(&self, addr: Addr) -> Option<NexthopId> {
        self.entries
            .iter()
            .find(|(p, _)| p.covers(addr))
            .map(|&(_, hop)| hop)
    }

    fn upsert(&mut self, p: IpPrefix, hop: NexthopId) {
        match self.entries.binary_search_by(|(q, _)| {
            q.len().cmp(&p.len()).reverse().then(q.bits().cmp(&p.bits()))
        }) {
            Ok(i) => self.entries[i].1 = hop,
            Err(i) => self.entries.insert(i, (p, hop)),
        }
    }

    fn remove(&mut self, p: &IpPrefix) -> Option<NexthopId> {
        let pos = self.entries.iter().position(|(q, _)| q == p)?;
        Some(self.entries.remove(pos).1)
    }
}

/// Produces the `(pivot+1)`-bit marked hash key for a prefix of length
/// `min_bmp..=pivot`: append a 1, left-shift by `pivot - len`.
pub fn bit_mark_key(p: &IpPrefix, cfg: &ResailConfig) -> Result<u64, ResailError> {
    if p.len() < cfg.min_bmp || p.len() > cfg.pivot {
        return Err(ResailError::LengthOutsideBitmaps {
            len: p.len(),
            min_bmp: cfg.min_bmp,
            pivot: cfg.pivot,
        });
    }
    Ok(mark_key(p.value(), p.len(), cfg.pivot))
}

#[inline]
fn mark_key(value: u64, len: u8, pivot: u8) -> u64 {
    (value << 1 | 1) << (pivot - len) as u32
}

/// The built structure. Lookups are read-only and safe to share; updates
/// require exclusive access.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResailStructure {
    pub config: ResailConfig,
    family: Family,
    hop_bits: u8,
    default_hop: NexthopId,
    pub look_aside: LookAsideTcam,
    /// Bitmaps for levels `min_bmp..=pivot`, in ascending level order.
    bitmaps: Vec<Bitmap>,
    pub hash: DLeftTable,
    /// Control-plane shadow of routes shorter than `min_bmp`; expansion
    /// reconciliation on updates needs the covering-route set.
    shorts: BTreeMap<IpPrefix, NexthopId>,
    /// Values of original length-`min_bmp` routes, to tell their bits apart
    /// from expanded ones.
    min_level_originals: BTreeSet<u64>,
}

pub fn build_resail(fib: &Fib, cfg: &ResailConfig) -> Result<ResailStructure, ResailError> {
    cfg.validate(fib.family())?;
    let mut look_aside = LookAsideTcam::default();
    let mut bitmaps: Vec<Bitmap> = (cfg.min_bmp..=cfg.pivot).map(Bitmap::new).collect();
    let mut shorts = BTreeMap::new();
    let mut min_level_originals = BTreeSet::new();
    let mut pending: Vec<(u64, NexthopId)> = Vec::new();

    let level_of = |len: u8| (len - cfg.min_bmp) as usize;

    // Native bitmap levels first.
    for (p, hop) in fib.routes() {
        let len = p.len();
        if len > cfg.pivot {
            look_aside.upsert(*p, *hop);
        } else if len >= cfg.min_bmp {
            bitmaps[level_of(len)].set(p.value());
            pending.push((mark_key(p.value(), len, cfg.pivot), *hop));
            if len == cfg.min_bmp {
                min_level_originals.insert(p.value());
            }
        } else {
            shorts.insert(*p, *hop);
        }
    }
    // Expansion pass: lengths min_bmp-1 down to 0, each expanded prefix
    // claiming only still-zero bits, so longer prefixes are never
    // overwritten.
    for len in (0..cfg.min_bmp).rev() {
        for (p, hop) in shorts.iter().filter(|(p, _)| p.len() == len) {
            for part in p.expand(cfg.min_bmp).expect("min_bmp <= width") {
                let v = part.value();
                if !bitmaps[0].get(v) {
                    bitmaps[0].set(v);
                    pending.push((mark_key(v, cfg.min_bmp, cfg.pivot), *hop));
                }
            }
        }
    }

    pending.sort_unstable_by_key(|&(k, _)| k);
    let mut hash = DLeftTable::with_capacity(0, cfg.dleft_ways as usize, cfg.dleft_load, 0);
    let mut placed = false;
    for epoch in 0..SEED_ROTATIONS {
        hash = DLeftTable::with_capacity(
            pending.len(),
            cfg.dleft_ways as usize,
            cfg.dleft_load,
            epoch as u64,
        );
        if pending.iter().all(|&(k, h)| hash.insert(k, h).is_ok()) {
            placed = true;
            break;
        }
    }
    if !placed && !pending.is_empty() {
        return Err(ResailError::HashFull {
            load: cfg.dleft_load,
            retries: SEED_ROTATIONS,
        });
    }

    Ok(ResailStructure {
        config: *cfg,
        family: fib.family(),
        hop_bits: fib.hop_bits(),
        default_hop: fib.default_hop(),
        look_aside,
        bitmaps,
        hash,
        shorts,
        min_level_originals,
    })
}

impl ResailStructure {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn bitmap(&self, level: u8) -> Option<&Bitmap> {
        if level < self.config.min_bmp || level > self.config.pivot {
            return None;
        }
        self.bitmaps.get((level - self.config.min_bmp) as usize)
    }

    /// Two-phase lookup: look-aside TCAM wins outright; otherwise the
    /// longest set bitmap level forms the marked key into the hash table.
    pub fn lookup(&self, addr: Addr) -> Result<NexthopId, ResailError> {
        if addr.family() != self.family {
            return Err(ResailError::FamilyMismatch {
                expected: self.family,
                got: addr.family(),
            });
        }
        if let Some(hop) = self.look_aside.lookup(addr) {
            return Ok(hop);
        }
        for level in (self.config.min_bmp..=self.config.pivot).rev() {
            let bit = addr.first_bits(level);
            if self.bitmaps[(level - self.config.min_bmp) as usize].get(bit) {
                let key = mark_key(bit, level, self.config.pivot);
                return self
                    .hash
                    .lookup(key)
                    .ok_or(ResailError::Inconsistent { level, bit });
            }
        }
        Ok(self.default_hop)
    }

    fn reconcile_min_level_range(&mut self, p: &IpPrefix) {
        let cfg = self.config;
        for part in p.expand(cfg.min_bmp).expect("checked") {
            let v = part.value();
            if self.min_level_originals.contains(&v) {
                continue; // original routes own their bits
            }
            let owner = self
                .shorts
                .iter()
                .filter(|(s, _)| s.covers_prefix(&part))
                .max_by_key(|(s, _)| s.len());
            let key = mark_key(v, cfg.min_bmp, cfg.pivot);
            match owner {
                Some((_, hop)) => {
                    let hop = *hop;
                    self.bitmaps[0].set(v);
                    let _ = self.hash.insert(key, hop);
                }
                None => {
                    self.bitmaps[0].clear(v);
                    self.hash.remove(key);
                }
            }
        }
    }

    /// Applies one route operation in place. Bitmap-range routes touch one
    /// bitmap bit and one hash entry; look-aside routes edit the TCAM;
    /// shorter-than-`min_bmp` routes re-run expansion over their range.
    pub fn update(&mut self, op: UpdateOp, p: IpPrefix, hop: NexthopId) -> Result<(), ResailError> {
        if p.family() != self.family {
            return Err(ResailError::FamilyMismatch {
                expected: self.family,
                got: p.family(),
            });
        }
        let cfg = self.config;
        let len = p.len();
        if len > cfg.pivot {
            match op {
                UpdateOp::Insert => self.look_aside.upsert(p, hop),
                UpdateOp::Change => {
                    if self.look_aside.remove(&p).is_none() {
                        return Err(ResailError::MissingRoute(p));
                    }
                    self.look_aside.upsert(p, hop);
                }
                UpdateOp::Delete => {
                    if self.look_aside.remove(&p).is_none() {
                        return Err(ResailError::MissingRoute(p));
                    }
                }
            }
            return Ok(());
        }
        if len >= cfg.min_bmp {
            let v = p.value();
            let key = mark_key(v, len, cfg.pivot);
            let idx = (len - cfg.min_bmp) as usize;
            let exists = if len == cfg.min_bmp {
                self.min_level_originals.contains(&v)
            } else {
                self.bitmaps[idx].get(v)
            };
            match op {
                UpdateOp::Insert | UpdateOp::Change => {
                    if op == UpdateOp::Change && !exists {
                        return Err(ResailError::MissingRoute(p));
                    }
                    self.bitmaps[idx].set(v);
                    if len == cfg.min_bmp {
                        self.min_level_originals.insert(v);
                    }
                    if self.hash.insert(key, hop).is_err() {
                        return Err(ResailError::HashFull {
                            load: cfg.dleft_load,
                            retries: 0,
                        });
                    }
                }
                UpdateOp::Delete => {
                    if !exists {
                        return Err(ResailError::MissingRoute(p));
                    }
                    self.bitmaps[idx].clear(v);
                    self.hash.remove(key);
                    if len == cfg.min_bmp {
                        self.min_level_originals.remove(&v);
                        // a shorter route may now own this bit
                        self.reconcile_min_level_range(&p);
                    }
                }
            }
            return Ok(());
        }
        // len < min_bmp
        match op {
            UpdateOp::Insert => {
                self.shorts.insert(p, hop);
            }
            UpdateOp::Change => {
                if !self.shorts.contains_key(&p) {
                    return Err(ResailError::MissingRoute(p));
                }
                self.shorts.insert(p, hop);
            }
            UpdateOp::Delete => {
                if self.shorts.remove(&p).is_none() {
                    return Err(ResailError::MissingRoute(p));
                }
            }
        }
        self.reconcile_min_level_range(&p);
        Ok(())
    }

    /// The cost-model program: one ternary look-aside step plus one step per
    /// bitmap level, all feeding the hash step. Latency is 2 regardless of
    /// configuration.
    pub fn to_program(&self) -> CramProgram {
        let cfg = self.config;
        let mut prog = CramProgram::new();
        let mut first_layer = Vec::new();
        if !self.look_aside.is_empty() {
            let t = TableSpec::ternary(
                "look_aside",
                self.family.width() as u32,
                self.look_aside.len() as u64,
                self.hop_bits as u32,
            );
            first_layer.push(prog.add_step(Some(t), &["addr"], &["la_hop"]));
        } else {
            first_layer.push(prog.add_step(None, &["addr"], &["la_hop"]));
        }
        let mut hit_regs = Vec::new();
        for level in cfg.min_bmp..=cfg.pivot {
            let t = TableSpec::direct(
                format!("bitmap_{level}"),
                level as u32,
                1u64 << level,
                1,
            );
            let reg = format!("bmp_hit_{level}");
            hit_regs.push(reg);
            first_layer.push(prog.add_step(
                Some(t),
                &["addr"],
                &[hit_regs.last().unwrap().as_str()],
            ));
        }
        let hash_table = if self.hash.capacity_slots() > 0 {
            Some(TableSpec::exact(
                "hash_table",
                cfg.key_bits(),
                self.hash.capacity_slots(),
                self.hop_bits as u32,
            ))
        } else {
            None
        };
        let mut reads: Vec<&str> = vec!["addr", "la_hop"];
        reads.extend(hit_regs.iter().map(String::as_str));
        let hash_step = prog.add_step(hash_table, &reads, &["hop"]);
        for s in first_layer {
            prog.add_edge(s, hash_step);
        }
        prog
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateOp {
    Insert,
    Delete,
    Change,
}
