//! CAM+RAM lookup structures for match-action pipelines.
//!
//! Modern switching chips expose both ternary CAM and SRAM in bulk, but
//! classical IP-lookup schemes were designed for one memory or the other.
//! This crate models programs against an abstract cost model (tables plus a
//! step DAG, measured in TCAM bits, SRAM bits, and dependent steps) and
//! implements three lookup structures that spend both memories at once:
//!
//! * [`resail`] — per-length bitmaps feeding a bit-marked hash table, with a
//!   look-aside TCAM absorbing long prefixes. Two steps, always.
//! * [`bsic`] — a ternary initial table over address slices, fanning out
//!   into balanced binary search trees over range endpoints, one table per
//!   search level.
//! * [`mashup`] — a fixed-stride multibit trie whose nodes are individually
//!   placed in TCAM or SRAM and coalesced into tagged super-tables.
//!
//! Every structure is verified bit-for-bit against two independent
//! longest-prefix-match oracles in [`oracle`]. The [`rmt`] module maps cost
//! model programs onto a parameterized pipeline chip (TCAM blocks, SRAM
//! pages, stages), and [`scaling`] grows databases synthetically to find
//! feasibility limits.
//!
//! The mdbook under `book/` walks through the model and all three schemes;
//! its code snippets compile and run as part of this crate's doctests.

pub mod bsic;
pub mod fib;
pub mod mashup;
pub mod model;
pub mod oracle;
pub mod resail;
pub mod rmt;
pub mod scaling;
pub mod synth;
pub mod testdata;

mod booktests;

pub use fib::{Addr, Family, Fib, IpPrefix, LengthHistogram, NexthopId};
pub use model::{CramMetrics, CramProgram, MatchKind, TableSpec};
