//! The abstract cost model: lookup tables plus a step DAG.
//!
//! A program is a set of steps, each holding at most one table lookup, with
//! directed edges expressing execution order. Three metrics fall out of it:
//!
//! * **TCAM bits** — for every ternary table, `n * k` (only match values are
//!   counted; masks are the physical overhead every TCAM pays).
//! * **SRAM bits** — for every table, `n * d` of associated data, plus
//!   `n * k` of stored keys for exact tables that are not directly indexed.
//!   Directly indexed tables derive the slot from the key, so the key
//!   itself is never stored.
//! * **Steps** — the node count of the longest directed path.
//!
//! Statement bodies are represented only by their read/write register sets:
//! the metrics depend on nothing else. Default (miss) values are one
//! constant per table and are excluded from the memory totals.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Ternary,
}

/// Counting parameters of one lookup table. Entry contents (values, masks,
/// priorities) live in the scheme structures; the model only needs sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSpec {
    pub name: String,
    pub match_kind: MatchKind,
    /// Key width in bits.
    pub key_bits: u32,
    /// Provisioned entries. For hash tables this is allocated capacity, not
    /// occupancy: a chip reserves pages for the whole table.
    pub max_entries: u64,
    /// Associated data bits per entry.
    pub data_bits: u32,
    /// Exact-match tables whose key directly indexes the slot array; the
    /// key is not stored. Requires `max_entries <= 2^key_bits`.
    pub direct_indexed: bool,
    /// Default (miss) value; carried for completeness, not counted.
    pub default_value: u64,
}

impl TableSpec {
    pub fn ternary(name: impl Into<String>, key_bits: u32, entries: u64, data_bits: u32) -> Self {
        TableSpec {
            name: name.into(),
            match_kind: MatchKind::Ternary,
            key_bits,
            max_entries: entries,
            data_bits,
            direct_indexed: false,
            default_value: 0,
        }
    }

    pub fn exact(name: impl Into<String>, key_bits: u32, entries: u64, data_bits: u32) -> Self {
        TableSpec {
            name: name.into(),
            match_kind: MatchKind::Exact,
            key_bits,
            max_entries: entries,
            data_bits,
            direct_indexed: false,
            default_value: 0,
        }
    }

    pub fn direct(name: impl Into<String>, key_bits: u32, entries: u64, data_bits: u32) -> Self {
        TableSpec {
            name: name.into(),
            match_kind: MatchKind::Exact,
            key_bits,
            max_entries: entries,
            data_bits,
            direct_indexed: true,
            default_value: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.max_entries < 1 {
            return Err(ModelError::BadTable {
                table: self.name.clone(),
                msg: "tables hold at least one entry".into(),
            });
        }
        if self.direct_indexed {
            if self.match_kind != MatchKind::Exact {
                return Err(ModelError::BadTable {
                    table: self.name.clone(),
                    msg: "only exact tables can be directly indexed".into(),
                });
            }
            if self.key_bits < 64 && self.max_entries > 1u64 << self.key_bits {
                return Err(ModelError::BadTable {
                    table: self.name.clone(),
                    msg: format!(
                        "{} entries do not fit a {}-bit index",
                        self.max_entries, self.key_bits
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn tcam_bits(&self) -> u64 {
        match self.match_kind {
            MatchKind::Ternary => self.max_entries * self.key_bits as u64,
            MatchKind::Exact => 0,
        }
    }

    pub fn sram_bits(&self) -> u64 {
        let data = self.max_entries * self.data_bits as u64;
        match self.match_kind {
            MatchKind::Ternary => data,
            MatchKind::Exact if self.direct_indexed => data,
            MatchKind::Exact => data + self.max_entries * self.key_bits as u64,
        }
    }
}

pub type StepId = usize;

/// One node of the program DAG: an optional table plus the registers the
/// step's key selector and statements touch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepNode {
    pub id: StepId,
    pub table: Option<TableSpec>,
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
}

/// Aggregate metrics of a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CramMetrics {
    pub tcam_bits: u64,
    pub sram_bits: u64,
    pub steps: u32,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("table {table}: {msg}")]
    BadTable { table: String, msg: String },
    #[error("dependency cycle through step {0}")]
    Cycle(StepId),
    #[error("steps {u} and {v} touch register {register} but are unordered")]
    UnorderedConflict { u: StepId, v: StepId, register: String },
    #[error("edge references unknown step {0}")]
    UnknownStep(StepId),
}

/// A directed acyclic graph of steps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CramProgram {
    pub steps: Vec<StepNode>,
    pub edges: BTreeSet<(StepId, StepId)>,
}

impl CramProgram {
    pub fn new() -> CramProgram {
        CramProgram::default()
    }

    pub fn add_step(
        &mut self,
        table: Option<TableSpec>,
        reads: &[&str],
        writes: &[&str],
    ) -> StepId {
        let id = self.steps.len();
        self.steps.push(StepNode {
            id,
            table,
            reads: reads.iter().map(|s| s.to_string()).collect(),
            writes: writes.iter().map(|s| s.to_string()).collect(),
        });
        id
    }

    pub fn add_edge(&mut self, from: StepId, to: StepId) {
        self.edges.insert((from, to));
    }

    pub fn tables(&self) -> impl Iterator<Item = &TableSpec> {
        self.steps.iter().filter_map(|s| s.table.as_ref())
    }

    /// Total TCAM bits across all ternary tables.
    pub fn tcam_bits(&self) -> u64 {
        self.tables().map(TableSpec::tcam_bits).sum()
    }

    /// Total SRAM bits across all tables.
    pub fn sram_bits(&self) -> u64 {
        self.tables().map(TableSpec::sram_bits).sum()
    }

    /// Successor lists, checking edge endpoints.
    fn successors(&self) -> Result<Vec<Vec<StepId>>, ModelError> {
        let mut succ = vec![Vec::new(); self.steps.len()];
        for &(u, v) in &self.edges {
            if u >= self.steps.len() {
                return Err(ModelError::UnknownStep(u));
            }
            if v >= self.steps.len() {
                return Err(ModelError::UnknownStep(v));
            }
            succ[u].push(v);
        }
        Ok(succ)
    }

    /// Steps in topological order, or the cycle error.
    pub fn topo_order(&self) -> Result<Vec<StepId>, ModelError> {
        let succ = self.successors()?;
        let mut indeg = vec![0usize; self.steps.len()];
        for &(_, v) in &self.edges {
            indeg[v] += 1;
        }
        let mut ready: BTreeSet<StepId> =
            (0..self.steps.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.steps.len());
        while let Some(&u) = ready.iter().next() {
            ready.remove(&u);
            order.push(u);
            for &v in &succ[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    ready.insert(v);
                }
            }
        }
        if order.len() != self.steps.len() {
            let stuck = (0..self.steps.len())
                .find(|&i| indeg[i] > 0)
                .unwrap_or_default();
            return Err(ModelError::Cycle(stuck));
        }
        Ok(order)
    }

    /// Node count of the longest directed path. Zero for an empty program.
    pub fn latency_steps(&self) -> Result<u32, ModelError> {
        let order = self.topo_order()?;
        let succ = self.successors()?;
        let mut depth = vec![1u32; self.steps.len()];
        for &u in order.iter().rev() {
            for &v in &succ[u] {
                depth[u] = depth[u].max(1 + depth[v]);
            }
        }
        Ok(depth.into_iter().max().unwrap_or(0))
    }

    pub fn metrics(&self) -> Result<CramMetrics, ModelError> {
        Ok(CramMetrics {
            tcam_bits: self.tcam_bits(),
            sram_bits: self.sram_bits(),
            steps: self.latency_steps()?,
        })
    }

    /// Checks acyclicity, table parameters, and the ordering rule: whenever
    /// one step writes a register another step reads or writes, a directed
    /// path must order the two.
    pub fn validate(&self) -> Result<(), ModelError> {
        for t in self.tables() {
            t.validate()?;
        }
        let order = self.topo_order()?;
        let succ = self.successors()?;
        // Reachability via bitsets; programs stay small (tens of steps).
        let n = self.steps.len();
        let words = n.div_ceil(64);
        let mut reach = vec![vec![0u64; words]; n];
        for &u in order.iter().rev() {
            let mut acc = vec![0u64; words];
            for &v in &succ[u] {
                acc[v / 64] |= 1 << (v % 64);
                for w in 0..words {
                    acc[w] |= reach[v][w];
                }
            }
            reach[u] = acc;
        }
        let reaches = |u: usize, v: usize| reach[u][v / 64] >> (v % 64) & 1 == 1;

        let mut writers: BTreeMap<&String, Vec<StepId>> = BTreeMap::new();
        for s in &self.steps {
            for r in &s.writes {
                writers.entry(r).or_default().push(s.id);
            }
        }
        for (reg, ws) in &writers {
            for &u in ws {
                for v in 0..n {
                    if v == u {
                        continue;
                    }
                    let touches =
                        self.steps[v].reads.contains(*reg) || self.steps[v].writes.contains(*reg);
                    if touches && !reaches(u, v) && !reaches(v, u) {
                        return Err(ModelError::UnorderedConflict {
                            u: u.min(v),
                            v: u.max(v),
                            register: (*reg).clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tcam_bits_direct_formula() {
        let mut p = CramProgram::new();
        p.add_step(Some(TableSpec::ternary("t", 32, 1000, 8)), &["addr"], &["hop"]);
        assert_eq!(p.tcam_bits(), 32_000);
    }

    #[test]
    fn no_ternary_tables_means_zero_tcam() {
        let mut p = CramProgram::new();
        p.add_step(Some(TableSpec::exact("e", 20, 10, 8)), &["addr"], &["hop"]);
        p.add_step(None, &["hop"], &["out"]);
        p.add_edge(0, 1);
        assert_eq!(p.tcam_bits(), 0);
    }

    #[test]
    fn sram_exception_for_direct_indexing() {
        let t = TableSpec::direct("bitmap", 10, 1 << 10, 8);
        t.validate().unwrap();
        assert_eq!(t.sram_bits(), 8 * 1024);
    }

    #[test]
    fn sram_hashed_table_stores_keys_and_data() {
        let t = TableSpec::exact("hash", 25, 1000, 8);
        assert_eq!(t.sram_bits(), 1000 * 33);
    }

    #[test]
    fn sram_ternary_table_counts_data_only() {
        let t = TableSpec::ternary("tcam", 32, 1000, 8);
        assert_eq!(t.sram_bits(), 8_000);
        assert_eq!(t.tcam_bits(), 32_000);
    }

    #[test]
    fn latency_of_single_step_is_one() {
        let mut p = CramProgram::new();
        p.add_step(None, &[], &[]);
        assert_eq!(p.latency_steps().unwrap(), 1);
    }

    #[test]
    fn latency_counts_longest_path_nodes() {
        let mut p = CramProgram::new();
        let a = p.add_step(None, &["x"], &["y"]);
        let b = p.add_step(None, &["y"], &["z"]);
        let c = p.add_step(None, &["z"], &["w"]);
        let d = p.add_step(None, &["x"], &["q"]);
        p.add_edge(a, b);
        p.add_edge(b, c);
        p.add_edge(a, d);
        assert_eq!(p.latency_steps().unwrap(), 3);
    }

    #[test]
    fn cycle_is_reported() {
        let mut p = CramProgram::new();
        let a = p.add_step(None, &[], &[]);
        let b = p.add_step(None, &[], &[]);
        p.add_edge(a, b);
        p.add_edge(b, a);
        assert!(matches!(p.latency_steps(), Err(ModelError::Cycle(_))));
    }

    #[test]
    fn disjoint_parallel_steps_are_fine() {
        let mut p = CramProgram::new();
        p.add_step(None, &["a"], &["x"]);
        p.add_step(None, &["b"], &["y"]);
        p.validate().unwrap();
    }

    #[test]
    fn unordered_write_read_pair_is_a_violation() {
        let mut p = CramProgram::new();
        let u = p.add_step(None, &[], &["r"]);
        let v = p.add_step(None, &["r"], &[]);
        match p.validate() {
            Err(ModelError::UnorderedConflict { u: a, v: b, register }) => {
                assert_eq!((a, b), (u.min(v), u.max(v)));
                assert_eq!(register, "r");
            }
            other => panic!("expected conflict, got {other:?}"),
        }
        p.add_edge(u, v);
        p.validate().unwrap();
    }

    #[test]
    fn metrics_invariant_under_step_relabeling() {
        let mut p = CramProgram::new();
        let a = p.add_step(Some(TableSpec::ternary("t1", 8, 4, 8)), &["addr"], &["x"]);
        let b = p.add_step(Some(TableSpec::exact("t2", 7, 5, 8)), &["addr", "x"], &["y"]);
        p.add_edge(a, b);

        let mut q = CramProgram::new();
        let b2 = q.add_step(Some(TableSpec::exact("t2", 7, 5, 8)), &["addr", "x"], &["y"]);
        let a2 = q.add_step(Some(TableSpec::ternary("t1", 8, 4, 8)), &["addr"], &["x"]);
        q.add_edge(a2, b2);

        assert_eq!(p.metrics().unwrap(), q.metrics().unwrap());
    }

    #[test]
    fn adding_an_edge_never_decreases_latency() {
        let mut p = CramProgram::new();
        let a = p.add_step(None, &["i"], &["x"]);
        let b = p.add_step(None, &["i"], &["y"]);
        let c = p.add_step(None, &["x", "y"], &["z"]);
        p.add_edge(a, c);
        p.add_edge(b, c);
        let before = p.latency_steps().unwrap();
        p.add_edge(a, b);
        assert!(p.latency_steps().unwrap() >= before);
    }
}
