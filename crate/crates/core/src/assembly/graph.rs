// SPDX-License-Identifier: Apache-2.0

//! Stage 2: the de Bruijn graph as a 3xE edge list, its fabric placement,
//! chain simplification and weakly connected components.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::isa::{Machine, MemAddress, Source, SubArrayId};
use crate::mapping::partition_graph;
use crate::seq::EncodedSeq;
use crate::trace::Stage;

use super::hashmap::KmerTable;

/// Width of the multiplicity field of a stored edge.
pub const MULT_BITS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub mult: u32,
}

/// Fabric location of an edge triple: node1 label at `row`, node2 label at
/// `row + 1`, multiplicity at `row + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSlot {
    pub subarray: SubArrayId,
    pub row: usize,
}

impl EdgeSlot {
    pub fn mult_addr(&self) -> MemAddress {
        MemAddress::new(self.subarray, self.row + 2, 0, MULT_BITS)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseGraph {
    k: usize,
    labels: Vec<EncodedSeq>,
    edges: Vec<Edge>,
    slots: Option<Vec<EdgeSlot>>,
}

impl SparseGraph {
    /// Builds a graph from node labels and edges; ids index `labels`.
    pub fn new(k: usize, labels: Vec<EncodedSeq>, edges: Vec<Edge>) -> Result<Self> {
        for e in &edges {
            if e.src >= labels.len() || e.dst >= labels.len() {
                return Err(Error::Address(format!("edge {}->{} names a missing node", e.src, e.dst)));
            }
            if e.mult == 0 {
                return Err(Error::State(format!("edge {}->{} has zero multiplicity", e.src, e.dst)));
            }
        }
        Ok(SparseGraph { k, labels, edges, slots: None })
    }

    /// Graph over numbered nodes with placeholder labels, for topology-only use.
    pub fn from_edges(n: usize, edges: Vec<Edge>) -> Result<Self> {
        Self::new(2, vec![EncodedSeq::new(); n], edges)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[EncodedSeq] {
        &self.labels
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn slots(&self) -> Option<&[EdgeSlot]> {
        self.slots.as_deref()
    }

    pub fn node1(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().map(|e| e.src)
    }

    pub fn node2(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().map(|e| e.dst)
    }

    pub fn mult(&self) -> impl Iterator<Item = u32> + '_ {
        self.edges.iter().map(|e| e.mult)
    }

    pub(crate) fn set_mult(&mut self, edge: usize, mult: u32) {
        debug_assert!(mult > 0);
        self.edges[edge].mult = mult;
    }

    pub fn total_mult(&self) -> u64 {
        self.edges.iter().map(|e| e.mult as u64).sum()
    }

    /// Out-edge indices of every node, ordered by destination id.
    pub fn out_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.labels.len()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.src].push(i);
        }
        for a in &mut adj {
            a.sort_by_key(|&i| (self.edges[i].dst, i));
        }
        adj
    }

    pub fn in_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.labels.len()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.dst].push(i);
        }
        for a in &mut adj {
            a.sort_by_key(|&i| (self.edges[i].src, i));
        }
        adj
    }

    /// `src<TAB>dst<TAB>mult` lines with node labels.
    pub fn dump_tsv(&self) -> String {
        let mut s = String::new();
        for e in &self.edges {
            let _ = writeln!(s, "{}\t{}\t{}", self.labels[e.src], self.labels[e.dst], e.mult);
        }
        s
    }

    /// Weakly connected components holding at least one edge, ordered by
    /// their lowest node id. Each component is renumbered densely in id
    /// order; the second field maps local ids back to ids of `self`.
    pub fn components(&self) -> Vec<(SparseGraph, Vec<usize>)> {
        let n = self.labels.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.src), find(&mut parent, e.dst));
            if a != b {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi] = lo;
            }
        }
        let mut has_edge = vec![false; n];
        for e in &self.edges {
            has_edge[e.src] = true;
            has_edge[e.dst] = true;
        }
        let mut comp_of_root: HashMap<usize, usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut comp = vec![usize::MAX; n];
        for v in 0..n {
            if !has_edge[v] {
                continue;
            }
            let r = find(&mut parent, v);
            let c = *comp_of_root.entry(r).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            comp[v] = c;
            members[c].push(v);
        }
        let mut local = vec![0usize; n];
        for m in &members {
            for (i, &v) in m.iter().enumerate() {
                local[v] = i;
            }
        }
        let mut edges: Vec<Vec<Edge>> = vec![Vec::new(); members.len()];
        let mut slots: Vec<Vec<EdgeSlot>> = vec![Vec::new(); members.len()];
        for (i, e) in self.edges.iter().enumerate() {
            let c = comp[e.src];
            edges[c].push(Edge { src: local[e.src], dst: local[e.dst], mult: e.mult });
            if let Some(s) = &self.slots {
                slots[c].push(s[i]);
            }
        }
        members
            .into_iter()
            .zip(edges)
            .zip(slots)
            .map(|((m, e), s)| {
                let g = SparseGraph {
                    k: self.k,
                    labels: m.iter().map(|&v| self.labels[v].clone()).collect(),
                    edges: e,
                    slots: self.slots.as_ref().map(|_| s),
                };
                (g, m)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConfig {
    /// Vertex interval count; edges fall into `partitions^2` blocks.
    pub partitions: usize,
    pub seed: u64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { partitions: 4, seed: 0x5eed }
    }
}

/// Turns every counted k-mer into an edge prefix -> suffix with the k-mer's
/// frequency as multiplicity, and stores the 3-row edge records in the
/// sub-arrays of their partition block. Tagged `graph`.
pub fn debruijn_build(m: &mut Machine, table: &KmerTable, cfg: &GraphConfig) -> Result<SparseGraph> {
    let k = table.k();
    if table.is_empty() {
        return Err(Error::State("cannot build a graph from an empty k-mer table".into()));
    }
    let prev = m.stage();
    m.set_stage(Stage::Graph);
    let mut ids: HashMap<EncodedSeq, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut id_of = |s: EncodedSeq, labels: &mut Vec<EncodedSeq>| -> usize {
        *ids.entry(s).or_insert_with_key(|s| {
            labels.push(s.clone());
            labels.len() - 1
        })
    };
    let mut edges = Vec::with_capacity(table.len());
    for e in table.entries() {
        let src = id_of(e.kmer.sub(0, k - 1), &mut labels);
        let dst = id_of(e.kmer.sub(1, k - 1), &mut labels);
        edges.push(Edge { src, dst, mult: e.freq });
    }
    // Node-id lookups for both endpoints run in the DPU.
    m.dpu_work(2 * edges.len() as u64);
    let mut g = SparseGraph { k, labels, edges, slots: None };

    let plan = partition_graph(&g, cfg.partitions, cfg.seed)?;
    let label_bits = 2 * (k - 1);
    let data_rows = {
        let id = m.alloc()?;
        let rows = m.subarray(id)?.layout().data_region.clone();
        (id, rows)
    };
    let per_sub = data_rows.1.len() / 3;
    let mut spare = Some(data_rows.0);
    let mut slots = vec![None; g.edges.len()];
    for block in &plan.blocks {
        let mut sub = None;
        let mut used = per_sub;
        for &ei in block {
            if used == per_sub {
                sub = Some(match spare.take() {
                    Some(s) => s,
                    None => m.alloc()?,
                });
                used = 0;
            }
            let s = sub.expect("allocated above");
            let row = data_rows.1.start + 3 * used;
            let entry = &table.entries()[ei];
            let dst1 = MemAddress::new(s, row, 0, label_bits);
            let dst2 = MemAddress::new(s, row + 1, 0, label_bits);
            match entry.slot {
                Some(ks) => {
                    m.mem_insert(dst1, Source::Mem(MemAddress::new(ks.subarray, ks.row, 0, label_bits)), label_bits)?;
                    m.mem_insert(dst2, Source::Mem(MemAddress::new(ks.subarray, ks.row, 2, label_bits)), label_bits)?;
                }
                None => {
                    let e = &g.edges[ei];
                    m.mem_insert(dst1, Source::Imm(&g.labels[e.src].to_bits()), label_bits)?;
                    m.mem_insert(dst2, Source::Imm(&g.labels[e.dst].to_bits()), label_bits)?;
                }
            }
            let mult = Bits::from_u64(g.edges[ei].mult as u64, MULT_BITS);
            m.mem_insert(MemAddress::new(s, row + 2, 0, MULT_BITS), Source::Imm(&mult), MULT_BITS)?;
            slots[ei] = Some(EdgeSlot { subarray: s, row });
            used += 1;
        }
    }
    g.slots = Some(slots.into_iter().map(|s| s.expect("every edge lies in one block")).collect());
    m.set_stage(prev);
    Ok(g)
}

/// Collapses chains A -> B where A's only successor is B and B's only
/// predecessor is A. The merged node keeps A's id and label, extended by
/// the bases B adds. Unbalanced nodes are never absorbed, and in
/// every balanced component the lowest-id node stays as the circuit
/// anchor, so the Euler reconstruction spells the same sequence.
pub fn simplify(g: &SparseGraph) -> SparseGraph {
    let n = g.labels.len();
    let k = g.k;
    let mut alive_edge = vec![true; g.edges.len()];
    let mut edges = g.edges.clone();
    let mut labels = g.labels.clone();
    let mut alive = vec![true; n];
    let mut out_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut in_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in edges.iter().enumerate() {
        out_adj[e.src].push(i);
        in_adj[e.dst].push(i);
    }
    let mut out_deg = vec![0u64; n];
    let mut in_deg = vec![0u64; n];
    for e in &edges {
        out_deg[e.src] += e.mult as u64;
        in_deg[e.dst] += e.mult as u64;
    }
    let mut anchor = vec![false; n];
    for (_, members) in g.components() {
        if members.iter().all(|&v| in_deg[v] == out_deg[v]) {
            anchor[members[0]] = true;
        }
    }
    for a in 0..n {
        if !alive[a] || anchor[a] {
            continue;
        }
        loop {
            if in_deg[a] > out_deg[a] {
                break;
            }
            let outs: Vec<usize> = out_adj[a].iter().copied().filter(|&i| alive_edge[i]).collect();
            if outs.len() != 1 {
                break;
            }
            let ab = outs[0];
            let b = edges[ab].dst;
            if b == a || anchor[b] || out_deg[b] != in_deg[b] {
                break;
            }
            if in_adj[b].iter().filter(|&&i| alive_edge[i]).count() != 1 {
                break;
            }
            alive_edge[ab] = false;
            alive[b] = false;
            let tail = labels[b].codes()[k.saturating_sub(2).min(labels[b].len())..].to_vec();
            labels[a].extend_from(&tail);
            out_deg[a] = out_deg[b];
            let moved = std::mem::take(&mut out_adj[b]);
            for &i in &moved {
                if !alive_edge[i] {
                    continue;
                }
                edges[i].src = a;
                if edges[i].dst == b {
                    edges[i].dst = a;
                    in_adj[a].push(i);
                }
            }
            out_adj[a] = moved;
        }
    }
    let mut new_id = vec![usize::MAX; n];
    let mut new_labels = Vec::new();
    for v in 0..n {
        if alive[v] {
            new_id[v] = new_labels.len();
            new_labels.push(std::mem::take(&mut labels[v]));
        }
    }
    let mut new_edges = Vec::new();
    let mut new_slots = Vec::new();
    for (i, e) in edges.iter().enumerate() {
        if alive_edge[i] {
            new_edges.push(Edge { src: new_id[e.src], dst: new_id[e.dst], mult: e.mult });
            if let Some(s) = &g.slots {
                new_slots.push(s[i]);
            }
        }
    }
    SparseGraph { k, labels: new_labels, edges: new_edges, slots: g.slots.as_ref().map(|_| new_slots) }
}

/// Number of nodes reachable from `from` ignoring edge direction, over
/// edges whose remaining multiplicity is positive. Returns the count and
/// the number of adjacency entries scanned.
pub fn weak_reach(adj: &[Vec<(usize, usize)>], remaining: &[u32], from: usize) -> (usize, u64) {
    let mut seen = vec![false; adj.len()];
    let mut q = VecDeque::from([from]);
    seen[from] = true;
    let mut count = 1;
    let mut work = 0u64;
    while let Some(u) = q.pop_front() {
        for &(v, ei) in &adj[u] {
            work += 1;
            if remaining[ei] > 0 && !seen[v] {
                seen[v] = true;
                count += 1;
                q.push_back(v);
            }
        }
    }
    (count, work)
}
