//! Prefix and routing-table domain types shared by every lookup scheme.
//!
//! Prefix values are kept *left-aligned*: the most significant address bit
//! always sits at bit 63 of the container, regardless of family width. This
//! makes "first `k` bits" extraction — the key former used by every scheme —
//! a single shift, and prefix containment a mask-and-compare.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::net::{Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Address family. IPv6 is modeled at 64 bits since only the first 64 bits
/// participate in global routing. `Toy(w)` supports small teaching universes
/// (the worked examples use 4- and 8-bit addresses).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    V4,
    V6,
    Toy(u8),
}

impl Family {
    /// Address width in bits.
    pub fn width(self) -> u8 {
        match self {
            Family::V4 => 32,
            Family::V6 => 64,
            Family::Toy(w) => w,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::V4 => write!(f, "v4"),
            Family::V6 => write!(f, "v6"),
            Family::Toy(w) => write!(f, "toy{w}"),
        }
    }
}

/// Mask covering the `len` most significant bits of a left-aligned container.
#[inline]
pub(crate) fn msb_mask(len: u8) -> u64 {
    if len == 0 {
        0
    } else {
        u64::MAX << (64 - len as u32)
    }
}

/// A next-hop identifier of configurable width `d` bits. Id 0 is reserved as
/// the "no match / default route" sentinel.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct NexthopId(pub u32);

impl NexthopId {
    pub const DEFAULT: NexthopId = NexthopId(0);
}

impl fmt::Display for NexthopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A family-tagged bit string of length `0..=64`, left-aligned in a 64-bit
/// container. All container bits past `len` are zero.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IpPrefix {
    family: Family,
    len: u8,
    bits: u64,
}

impl IpPrefix {
    /// Builds a prefix from left-aligned bits. Bits past `len` are masked off.
    pub fn new(family: Family, bits: u64, len: u8) -> Result<Self, FibError> {
        if len > family.width() {
            return Err(FibError::LengthOutOfRange { len, family });
        }
        Ok(IpPrefix {
            family,
            len,
            bits: bits & msb_mask(len),
        })
    }

    /// Builds a prefix from the numeric value of its bit string
    /// (e.g. value `0b011`, len 3).
    pub fn from_value(family: Family, value: u64, len: u8) -> Result<Self, FibError> {
        if len > family.width() {
            return Err(FibError::LengthOutOfRange { len, family });
        }
        let bits = if len == 0 { 0 } else { value << (64 - len as u32) };
        Self::new(family, bits, len)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Left-aligned container bits.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Numeric value of the bit string (low-aligned).
    pub fn value(&self) -> u64 {
        if self.len == 0 {
            0
        } else {
            self.bits >> (64 - self.len as u32)
        }
    }

    /// True if `addr` falls inside this prefix's address range.
    pub fn covers(&self, addr: Addr) -> bool {
        self.family == addr.family() && (addr.bits() ^ self.bits) & msb_mask(self.len) == 0
    }

    /// True if `other` is equal to or nested inside this prefix.
    pub fn covers_prefix(&self, other: &IpPrefix) -> bool {
        self.family == other.family
            && self.len <= other.len
            && (other.bits ^ self.bits) & msb_mask(self.len) == 0
    }

    /// The `2^(target_len - len)` prefixes of length `target_len` covering
    /// exactly this prefix's range, in ascending value order.
    pub fn expand(&self, target_len: u8) -> Result<Vec<IpPrefix>, FibError> {
        if target_len > self.family.width() {
            return Err(FibError::LengthOutOfRange {
                len: target_len,
                family: self.family,
            });
        }
        if target_len < self.len {
            return Err(FibError::ExpandShortens {
                from: self.len,
                to: target_len,
            });
        }
        if target_len == 0 {
            return Ok(vec![*self]);
        }
        let extra = (target_len - self.len) as u32;
        let mut out = Vec::with_capacity(1 << extra);
        for i in 0..(1u64 << extra) {
            let bits = self.bits | i << (64 - target_len as u32);
            out.push(IpPrefix {
                family: self.family,
                len: target_len,
                bits,
            });
        }
        Ok(out)
    }
}

impl fmt::Display for IpPrefix {
    /// `10.0.0.0/8` for v4, `2001:db8::/32` for v6, raw bit spelling
    /// (`010100/6`) for toy families.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::V4 => {
                let a = Ipv4Addr::from((self.bits >> 32) as u32);
                write!(f, "{a}/{}", self.len)
            }
            Family::V6 => {
                let a = Ipv6Addr::from((self.bits as u128) << 64);
                write!(f, "{a}/{}", self.len)
            }
            Family::Toy(_) => {
                for i in 0..self.len {
                    let bit = (self.bits >> (63 - i as u32)) & 1;
                    write!(f, "{bit}")?;
                }
                write!(f, "/{}", self.len)
            }
        }
    }
}

impl fmt::Debug for IpPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A full-width destination address, left-aligned like [`IpPrefix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Addr {
    family: Family,
    bits: u64,
}

impl Addr {
    pub fn new(family: Family, bits: u64) -> Addr {
        Addr {
            family,
            bits: bits & msb_mask(family.width()),
        }
    }

    /// Address from its numeric value within the family width.
    pub fn from_value(family: Family, value: u64) -> Addr {
        let w = family.width();
        let bits = if w == 0 { 0 } else { value << (64 - w as u32) };
        Addr::new(family, bits)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// The first `k` bits as an integer.
    pub fn first_bits(&self, k: u8) -> u64 {
        if k == 0 {
            0
        } else {
            self.bits >> (64 - k as u32)
        }
    }

    /// The address with its first `k` bits dropped, still left-aligned.
    pub fn shifted_left(&self, k: u8) -> u64 {
        if k >= 64 {
            0
        } else {
            self.bits << k as u32
        }
    }
}

/// Per-length route counts, index `0..=width`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthHistogram {
    pub counts: Vec<u64>,
}

impl LengthHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Error)]
pub enum FibError {
    #[error("line {line}: malformed entry: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("prefix length {len} out of range for family {family}")]
    LengthOutOfRange { len: u8, family: Family },
    #[error("cannot expand a /{from} prefix to shorter length /{to}")]
    ExpandShortens { from: u8, to: u8 },
    #[error("line {line}: next-hop id {hop} does not fit in {bits} bits")]
    HopTooWide { line: usize, hop: u64, bits: u8 },
    #[error("line {line}: IPv6 prefix longer than 64 bits is rejected")]
    V6TooLong { line: usize },
    #[error("route {0} not present")]
    MissingRoute(IpPrefix),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A deduplicated set of `(prefix -> next hop)` routes plus a default hop.
/// Immutable by convention after construction; every scheme builds from it
/// and is verified against it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fib {
    family: Family,
    /// Width of next-hop ids in bits; every id is `< 2^hop_bits`.
    hop_bits: u8,
    routes: BTreeMap<IpPrefix, NexthopId>,
    default_hop: NexthopId,
}

impl Fib {
    pub fn new(family: Family, hop_bits: u8) -> Fib {
        Fib {
            family,
            hop_bits,
            routes: BTreeMap::new(),
            default_hop: NexthopId::DEFAULT,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn width(&self) -> u8 {
        self.family.width()
    }

    pub fn hop_bits(&self) -> u8 {
        self.hop_bits
    }

    pub fn default_hop(&self) -> NexthopId {
        self.default_hop
    }

    pub fn set_default_hop(&mut self, hop: NexthopId) {
        self.default_hop = hop;
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn get(&self, p: &IpPrefix) -> Option<NexthopId> {
        self.routes.get(p).copied()
    }

    pub fn routes(&self) -> impl Iterator<Item = (&IpPrefix, &NexthopId)> {
        self.routes.iter()
    }

    /// Inserts or overwrites a route. Later insertions win, mirroring RIB
    /// update streams.
    pub fn insert(&mut self, p: IpPrefix, hop: NexthopId) -> Result<(), FibError> {
        if p.family() != self.family {
            return Err(FibError::Malformed {
                line: 0,
                msg: format!("family mismatch: {} route in {} table", p.family(), self.family),
            });
        }
        self.routes.insert(p, hop);
        Ok(())
    }

    pub fn remove(&mut self, p: &IpPrefix) -> Result<NexthopId, FibError> {
        self.routes.remove(p).ok_or(FibError::MissingRoute(*p))
    }

    /// `counts[len]` = number of routes of that length.
    pub fn length_histogram(&self) -> LengthHistogram {
        let mut counts = vec![0u64; self.width() as usize + 1];
        for (p, _) in self.routes() {
            counts[p.len() as usize] += 1;
        }
        LengthHistogram { counts }
    }

    /// The set of distinct next hops in use (excluding the default).
    pub fn hop_alphabet(&self) -> Vec<NexthopId> {
        let mut hops: Vec<NexthopId> = self.routes.values().copied().collect();
        hops.sort_unstable();
        hops.dedup();
        hops
    }
}

fn parse_hop(tok: &str, line: usize, hop_bits: u8) -> Result<NexthopId, FibError> {
    let id: u64 = tok.parse().map_err(|_| FibError::Malformed {
        line,
        msg: format!("bad next-hop id {tok:?}"),
    })?;
    let limit = 1u64 << hop_bits.min(63) as u32;
    if hop_bits < 64 && id >= limit {
        return Err(FibError::HopTooWide {
            line,
            hop: id,
            bits: hop_bits,
        });
    }
    Ok(NexthopId(id as u32))
}

/// Parses the plain-text FIB format: one `<address>/<length> <nexthop-id>`
/// per line, `#` comments, an optional `default <id>` directive. Duplicate
/// prefixes are overridden by later lines.
pub fn parse_fib<R: BufRead>(reader: R, family: Family, hop_bits: u8) -> Result<Fib, FibError> {
    let mut fib = Fib::new(family, hop_bits);
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let first = toks.next().unwrap();
        if first == "default" {
            let hop_tok = toks.next().ok_or_else(|| FibError::Malformed {
                line: line_no,
                msg: "missing default hop id".into(),
            })?;
            fib.set_default_hop(parse_hop(hop_tok, line_no, hop_bits)?);
            continue;
        }
        let (addr_s, len_s) = first.split_once('/').ok_or_else(|| FibError::Malformed {
            line: line_no,
            msg: format!("expected <address>/<length>, got {first:?}"),
        })?;
        let len: u8 = len_s.parse().map_err(|_| FibError::Malformed {
            line: line_no,
            msg: format!("bad prefix length {len_s:?}"),
        })?;
        let bits = match family {
            Family::V4 => {
                let a: Ipv4Addr = addr_s.parse().map_err(|_| FibError::Malformed {
                    line: line_no,
                    msg: format!("bad IPv4 address {addr_s:?}"),
                })?;
                (u32::from(a) as u64) << 32
            }
            Family::V6 => {
                let a: Ipv6Addr = addr_s.parse().map_err(|_| FibError::Malformed {
                    line: line_no,
                    msg: format!("bad IPv6 address {addr_s:?}"),
                })?;
                if len > 64 {
                    return Err(FibError::V6TooLong { line: line_no });
                }
                (u128::from(a) >> 64) as u64
            }
            Family::Toy(_) => {
                let mut bits = 0u64;
                if addr_s.len() != len as usize || addr_s.is_empty() && len > 0 {
                    return Err(FibError::Malformed {
                        line: line_no,
                        msg: format!("toy prefix {addr_s:?} does not spell {len} bits"),
                    });
                }
                for (i, c) in addr_s.chars().enumerate() {
                    match c {
                        '1' => bits |= 1 << (63 - i as u32),
                        '0' => {}
                        _ => {
                            return Err(FibError::Malformed {
                                line: line_no,
                                msg: format!("bad toy prefix bit {c:?}"),
                            })
                        }
                    }
                }
                bits
            }
        };
        if len > family.width() {
            return Err(FibError::LengthOutOfRange { len, family });
        }
        let hop_tok = toks.next().ok_or_else(|| FibError::Malformed {
            line: line_no,
            msg: "missing next-hop id".into(),
        })?;
        let hop = parse_hop(hop_tok, line_no, hop_bits)?;
        fib.insert(IpPrefix::new(family, bits, len)?, hop)?;
    }
    Ok(fib)
}

/// Writes a FIB back out in the same plain-text format `parse_fib` accepts.
pub fn serialize_fib<W: std::io::Write>(fib: &Fib, mut w: W) -> std::io::Result<()> {
    writeln!(w, "default {}", fib.default_hop())?;
    for (p, hop) in fib.routes() {
        writeln!(w, "{p} {hop}")?;
    }
    Ok(())
}

/// A toy W-bit routing table plus the hop labels its fixture used. Label
/// `-` maps to the default sentinel (id 0); other labels get ids in first
/// appearance order.
#[derive(Debug, Clone)]
pub struct ToyFib {
    pub fib: Fib,
    labels: Vec<String>,
}

impl ToyFib {
    pub fn label(&self, hop: NexthopId) -> &str {
        self.labels
            .get(hop.0 as usize)
            .map(String::as_str)
            .unwrap_or("?")
    }

    pub fn hop_by_label(&self, label: &str) -> Option<NexthopId> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| NexthopId(i as u32))
    }
}

/// Parses the toy fixture format: a `width W` header line, then
/// `bits/length hop-label` lines (e.g. `010100/6 A`). `#` comments allowed.
pub fn parse_toy_fib<R: BufRead>(reader: R, hop_bits: u8) -> Result<ToyFib, FibError> {
    let mut width: Option<u8> = None;
    let mut labels: Vec<String> = vec!["-".to_string()];
    let mut pending: Vec<(String, usize)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("width") {
            let w: u8 = rest.trim().parse().map_err(|_| FibError::Malformed {
                line: line_no,
                msg: format!("bad width {rest:?}"),
            })?;
            if w == 0 || w > 64 {
                return Err(FibError::Malformed {
                    line: line_no,
                    msg: format!("toy width {w} must be in 1..=64"),
                });
            }
            width = Some(w);
            continue;
        }
        pending.push((line.to_string(), line_no));
    }
    let width = width.ok_or_else(|| FibError::Malformed {
        line: 1,
        msg: "missing `width W` header".into(),
    })?;
    let family = Family::Toy(width);
    let mut fib = Fib::new(family, hop_bits);
    for (line, line_no) in pending {
        let mut toks = line.split_whitespace();
        let spec = toks.next().unwrap();
        let label = toks.next().ok_or_else(|| FibError::Malformed {
            line: line_no,
            msg: "missing hop label".into(),
        })?;
        let hop = match labels.iter().position(|l| l == label) {
            Some(i) => NexthopId(i as u32),
            None => {
                labels.push(label.to_string());
                NexthopId(labels.len() as u32 - 1)
            }
        };
        let mut sub = format!("{spec} {}", hop.0);
        sub.push('\n');
        let parsed = parse_fib(sub.as_bytes(), family, hop_bits).map_err(|e| match e {
            FibError::Malformed { msg, .. } => FibError::Malformed { line: line_no, msg },
            other => other,
        })?;
        for (p, h) in parsed.routes() {
            fib.insert(*p, *h)?;
        }
    }
    Ok(ToyFib { fib, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testdata;

    #[test]
    fn single_line_parse() {
        let fib = parse_fib("10.0.0.0/8 1\n".as_bytes(), Family::V4, 8).unwrap();
        assert_eq!(fib.len(), 1);
        let p = IpPrefix::from_value(Family::V4, 10, 8).unwrap();
        assert_eq!(fib.get(&p), Some(NexthopId(1)));
    }

    #[test]
    fn duplicate_lines_last_wins() {
        let fib = parse_fib(
            "10.0.0.0/8 1\n10.0.0.0/8 2\n".as_bytes(),
            Family::V4,
            8,
        )
        .unwrap();
        assert_eq!(fib.len(), 1);
        let p = IpPrefix::from_value(Family::V4, 10, 8).unwrap();
        assert_eq!(fib.get(&p), Some(NexthopId(2)));
    }

    #[test]
    fn toy_fixture_loads_example_table() {
        let toy = testdata::table1();
        assert_eq!(toy.fib.len(), 8);
        // hops A-D
        assert_eq!(toy.fib.hop_alphabet().len(), 4);
        let h = toy.fib.length_histogram();
        assert_eq!(h.counts[3], 1);
        assert_eq!(h.counts[6], 3);
        assert_eq!(h.counts[8], 4);
        assert_eq!(h.total(), 8);
    }

    #[test]
    fn parse_errors_report_line_numbers() {
        let err = parse_fib("10.0.0.0/8 1\nbogus\n".as_bytes(), Family::V4, 8).unwrap_err();
        assert!(matches!(err, FibError::Malformed { line: 2, .. }));
        let err = parse_fib("10.0.0.0/8 256\n".as_bytes(), Family::V4, 8).unwrap_err();
        assert!(matches!(err, FibError::HopTooWide { hop: 256, .. }));
        let err = parse_fib("10.0.0.0/40 1\n".as_bytes(), Family::V4, 8).unwrap_err();
        assert!(matches!(err, FibError::LengthOutOfRange { .. }));
        let err = parse_fib("2001:db8::/72 1\n".as_bytes(), Family::V6, 8).unwrap_err();
        assert!(matches!(err, FibError::V6TooLong { line: 1 }));
    }

    #[test]
    fn expand_one_doubling() {
        let p = IpPrefix::from_value(Family::Toy(8), 0b011, 3).unwrap();
        let out = p.expand(4).unwrap();
        let vals: Vec<u64> = out.iter().map(IpPrefix::value).collect();
        assert_eq!(vals, vec![0b0110, 0b0111]);
    }

    #[test]
    fn expand_identity() {
        let p = IpPrefix::from_value(Family::Toy(8), 0b1001, 4).unwrap();
        assert_eq!(p.expand(4).unwrap(), vec![p]);
    }

    #[test]
    fn expand_matches_sram_expansion_of_wildcard_entry() {
        // 1** stored in SRAM becomes 100, 101, 110, 111.
        let p = IpPrefix::from_value(Family::Toy(8), 0b1, 1).unwrap();
        let out = p.expand(3).unwrap();
        let vals: Vec<u64> = out.iter().map(IpPrefix::value).collect();
        assert_eq!(vals, vec![0b100, 0b101, 0b110, 0b111]);
    }

    #[test]
    fn expand_is_disjoint_and_covers_range() {
        let family = Family::Toy(8);
        for len in 0..=6u8 {
            for value in 0..(1u64 << len) {
                let p = IpPrefix::from_value(family, value, len).unwrap();
                for target in len..=8 {
                    let parts = p.expand(target).unwrap();
                    let mut covered = vec![false; 256];
                    for part in &parts {
                        for a in 0..256u64 {
                            let addr = Addr::from_value(family, a);
                            if part.covers(addr) {
                                assert!(!covered[a as usize], "overlap at {a:08b}");
                                covered[a as usize] = true;
                            }
                        }
                    }
                    for a in 0..256u64 {
                        let addr = Addr::from_value(family, a);
                        assert_eq!(covered[a as usize], p.covers(addr));
                    }
                }
            }
        }
    }

    #[test]
    fn empty_fib_histogram_is_zero() {
        let fib = Fib::new(Family::V4, 8);
        let h = fib.length_histogram();
        assert_eq!(h.total(), 0);
        assert_eq!(h.counts.len(), 33);
    }

    #[test]
    fn roundtrip_serialize_parse() {
        let toy = testdata::table1();
        let mut buf = Vec::new();
        serialize_fib(&toy.fib, &mut buf).unwrap();
        let back = parse_fib(buf.as_slice(), toy.fib.family(), 8).unwrap();
        assert_eq!(back, toy.fib);
    }

    #[test]
    fn v4_roundtrip() {
        let text = "default 3\n10.0.0.0/8 1\n192.168.0.0/16 2\n";
        let fib = parse_fib(text.as_bytes(), Family::V4, 8).unwrap();
        let mut buf = Vec::new();
        serialize_fib(&fib, &mut buf).unwrap();
        let back = parse_fib(buf.as_slice(), Family::V4, 8).unwrap();
        assert_eq!(back, fib);
        assert_eq!(back.default_hop(), NexthopId(3));
    }
}
