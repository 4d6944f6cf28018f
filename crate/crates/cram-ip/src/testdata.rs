//! Worked-example fixtures used across the test suites and the guide.
//!
//! `table1` is the 8-entry, 8-bit example routing table; `fig3` is the
//! four-prefix, 4-bit universe used to illustrate hybrid tries. Both are
//! also shipped as files under `fixtures/` for the CLI.

use crate::fib::{parse_toy_fib, ToyFib};

/// Example routing table: eight routes over an 8-bit toy universe,
/// next hops A-D.
pub const TABLE1: &str = "\
# example routing table, 8-bit universe
width 8
010100/6 A
011/3 B
100100/6 C
100101/6 D
10010100/8 A
10011010/8 B
10011011/8 C
10100011/8 A
";

/// Four length-3 prefixes over a 4-bit universe, used for the hybrid-trie
/// walkthrough (root stride 2, then 1).
pub const FIG3: &str = "\
width 4
000/3 P1
100/3 P2
110/3 P3
111/3 P4
";

pub fn table1() -> ToyFib {
    parse_toy_fib(TABLE1.as_bytes(), 8).expect("fixture parses")
}

pub fn fig3() -> ToyFib {
    parse_toy_fib(FIG3.as_bytes(), 8).expect("fixture parses")
}
