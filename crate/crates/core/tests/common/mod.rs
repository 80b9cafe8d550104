// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

//! Host-side oracles shared by the integration tests. None of these touch
//! the simulated fabric.

use std::collections::{BTreeMap, HashMap};

use pimasm::assembly::{Edge, SparseGraph};
use pimasm::bits::Bits;
use pimasm::isa::{Addend, Geometry, Machine, WordRows};
use pimasm::seq::EncodedSeq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain sliding-window count.
pub fn host_counts(reads: &[EncodedSeq], k: usize) -> HashMap<EncodedSeq, u32> {
    let mut m = HashMap::new();
    for r in reads {
        if r.len() < k {
            continue;
        }
        for i in 0..=r.len() - k {
            *m.entry(r.sub(i, k)).or_insert(0) += 1;
        }
    }
    m
}

pub fn random_reads(n: usize, len: usize, seed: u64) -> Vec<EncodedSeq> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| EncodedSeq::from_codes((0..len).map(|_| rng.gen_range(0..4u8)).collect())).collect()
}

/// Graph spanned by a random walk of `steps` moves over `n` vertices; the
/// walk is its own Euler path, and closing it back to the start gives a
/// circuit.
pub fn random_eulerian(n: usize, steps: usize, close: bool, rng: &mut ChaCha8Rng) -> SparseGraph {
    let mut walk = vec![rng.gen_range(0..n)];
    for _ in 0..steps {
        walk.push(rng.gen_range(0..n));
    }
    if close {
        walk.push(walk[0]);
    }
    let mut mult: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for w in walk.windows(2) {
        *mult.entry((w[0], w[1])).or_insert(0) += 1;
    }
    let edges = mult.into_iter().map(|((src, dst), mult)| Edge { src, dst, mult }).collect();
    SparseGraph::from_edges(n, edges).unwrap()
}

/// Iterative Hierholzer over the expanded multigraph. Returns `None` when
/// no Euler path exists.
pub fn hierholzer(g: &SparseGraph) -> Option<Vec<usize>> {
    let n = g.node_count();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indeg = vec![0i64; n];
    let mut outdeg = vec![0i64; n];
    for e in g.edges() {
        for _ in 0..e.mult {
            adj[e.src].push(e.dst);
        }
        outdeg[e.src] += e.mult as i64;
        indeg[e.dst] += e.mult as i64;
    }
    let total: i64 = outdeg.iter().sum();
    if total == 0 {
        return Some(Vec::new());
    }
    let mut start = None;
    let (mut plus, mut minus) = (0, 0);
    for v in 0..n {
        match outdeg[v] - indeg[v] {
            0 => {}
            1 => {
                plus += 1;
                start = Some(v);
            }
            -1 => minus += 1,
            _ => return None,
        }
    }
    if plus > 1 || minus > 1 || plus != minus {
        return None;
    }
    let start = start.unwrap_or_else(|| (0..n).find(|&v| outdeg[v] > 0).unwrap());
    let mut stack = vec![start];
    let mut path = Vec::new();
    while let Some(&u) = stack.last() {
        if let Some(v) = adj[u].pop() {
            stack.push(v);
        } else {
            path.push(stack.pop().unwrap());
        }
    }
    path.reverse();
    (path.len() as i64 == total + 1).then_some(path)
}

/// Multiset of consumed edges along a vertex path.
pub fn edge_multiset(path: &[usize]) -> BTreeMap<(usize, usize), u32> {
    let mut m = BTreeMap::new();
    for w in path.windows(2) {
        *m.entry((w[0], w[1])).or_insert(0) += 1;
    }
    m
}

pub fn graph_multiset(g: &SparseGraph) -> BTreeMap<(usize, usize), u32> {
    let mut m = BTreeMap::new();
    for e in g.edges() {
        *m.entry((e.src, e.dst)).or_insert(0) += e.mult;
    }
    m
}

/// Column-parallel adder harness: operand words at rows `0..w` and
/// `w..2w`, result at `2w..3w` of one sub-array.
pub struct AddBench {
    pub m: Machine,
    pub width: usize,
    sub: pimasm::isa::SubArrayId,
}

impl AddBench {
    pub fn new(width: usize) -> Self {
        let mut m = Machine::new(Geometry::default()).unwrap();
        let sub = m.alloc().unwrap();
        AddBench { m, width, sub }
    }

    fn word(&self, i: usize) -> WordRows {
        WordRows { subarray: self.sub, lsb_row: i * self.width, width: self.width }
    }

    /// Adds up to one pair per column. Returns `(sum, carry_out)` per pair.
    pub fn add(&mut self, pairs: &[(u64, u64)]) -> Vec<(u64, bool)> {
        let cols = self.m.cols();
        assert!(pairs.len() <= cols);
        let a: Vec<(usize, u64)> = pairs.iter().enumerate().map(|(c, p)| (c, p.0)).collect();
        let b: Vec<(usize, u64)> = pairs.iter().enumerate().map(|(c, p)| (c, p.1)).collect();
        self.m.write_vertical(self.word(0), &a).unwrap();
        self.m.write_vertical(self.word(1), &b).unwrap();
        let mask = Bits::range_mask(cols, 0, pairs.len());
        let ov = self.m.add_columns(self.word(0), Addend::Word(self.word(1)), self.word(2), &mask).unwrap();
        let out = self.m.read_vertical(self.word(2)).unwrap();
        (0..pairs.len()).map(|c| (out[c], ov.get(c))).collect()
    }
}

/// Integer reference for a `w`-bit add.
pub fn ref_add(a: u64, b: u64, w: usize) -> (u64, bool) {
    let s = a as u128 + b as u128;
    let mask = (1u128 << w) - 1;
    ((s & mask) as u64, s >> w != 0)
}
