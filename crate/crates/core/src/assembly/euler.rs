// SPDX-License-Identifier: Apache-2.0

//! Stage 3: degree accumulation, start-vertex selection and the Fleury walk.
//!
//! Each node owns one column of a degree sub-array. Rows hold, from the
//! bottom, the out-degree word, the in-degree word, a scratch word and one
//! word per out-edge slot (the remaining multiplicity of that edge). All
//! degree arithmetic and the start test run column-parallel in the fabric.

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::fabric::RowLayout;
use crate::isa::{Addend, DpuOp, Machine, MemAddress, Source, SubArrayId, VerticalWordRef, WordRows};
use crate::mapping::{place_vertical_word, subarrays_needed};
use crate::seq::EncodedSeq;
use crate::trace::Stage;

use super::graph::{weak_reach, SparseGraph};

/// Width of degree and slot words.
pub const DEGREE_WIDTH: usize = 16;
/// Width of the edge counter.
pub const COUNT_WIDTH: usize = 32;
/// Path entries per row (32-bit node ids).
const PATH_IDS_PER_ROW: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreePlacement {
    pub subarrays: Vec<SubArrayId>,
    pub control: SubArrayId,
    pub slots_per_node: usize,
    /// Columns per degree sub-array.
    pub f: usize,
}

impl DegreePlacement {
    fn word(&self, node: usize, index: usize) -> VerticalWordRef {
        let (g, col) = place_vertical_word(node, self.f);
        VerticalWordRef { subarray: self.subarrays[g], col, lsb_row: index * DEGREE_WIDTH, width: DEGREE_WIDTH }
    }

    pub fn out_word(&self, node: usize) -> VerticalWordRef {
        self.word(node, 0)
    }

    pub fn in_word(&self, node: usize) -> VerticalWordRef {
        self.word(node, 1)
    }

    pub fn slot_word(&self, node: usize, slot: usize) -> VerticalWordRef {
        self.word(node, 3 + slot)
    }

    pub fn edge_cnt_word(&self) -> VerticalWordRef {
        VerticalWordRef { subarray: self.control, col: 0, lsb_row: 0, width: COUNT_WIDTH }
    }
}

fn rows_of(sub: SubArrayId, index: usize) -> WordRows {
    WordRows { subarray: sub, lsb_row: index * DEGREE_WIDTH, width: DEGREE_WIDTH }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeTable {
    pub in_degree: Vec<u64>,
    pub out_degree: Vec<u64>,
    pub edge_cnt: u64,
    pub start: usize,
    /// Per node: out = in + 1, in = out + 1, out = in, as sensed in the fabric.
    pub start_like: Vec<bool>,
    pub end_like: Vec<bool>,
    pub balanced: Vec<bool>,
    pub placement: Option<DegreePlacement>,
}

impl DegreeTable {
    /// Host-computed degrees, used as an oracle and by callers without a fabric.
    pub fn from_graph(g: &SparseGraph) -> DegreeTable {
        let n = g.node_count();
        let mut out_degree = vec![0u64; n];
        let mut in_degree = vec![0u64; n];
        for e in g.edges() {
            out_degree[e.src] += e.mult as u64;
            in_degree[e.dst] += e.mult as u64;
        }
        let start_like: Vec<bool> = (0..n).map(|v| out_degree[v] == in_degree[v] + 1).collect();
        let end_like = (0..n).map(|v| in_degree[v] == out_degree[v] + 1).collect();
        let balanced = (0..n).map(|v| in_degree[v] == out_degree[v]).collect();
        let start = start_like.iter().position(|&b| b).unwrap_or(0);
        DegreeTable {
            edge_cnt: out_degree.iter().sum(),
            in_degree,
            out_degree,
            start,
            start_like,
            end_like,
            balanced,
            placement: None,
        }
    }

    /// Euler-path start among `nodes`: the node with out = in + 1, else the
    /// first node with an out-edge.
    pub fn choose_start(&self, nodes: &[usize]) -> Result<usize> {
        let mut starts = Vec::new();
        let mut ends = 0;
        for &v in nodes {
            if self.start_like[v] {
                starts.push(v);
            } else if self.end_like[v] {
                ends += 1;
            } else if !self.balanced[v] {
                return Err(Error::NonEulerian(format!(
                    "node {v} has out-degree {} and in-degree {}",
                    self.out_degree[v], self.in_degree[v]
                )));
            }
        }
        if starts.len() > 1 || ends > 1 || starts.len() != ends {
            return Err(Error::NonEulerian(format!(
                "{} start-like and {ends} end-like nodes",
                starts.len()
            )));
        }
        if let Some(&s) = starts.first() {
            return Ok(s);
        }
        nodes
            .iter()
            .copied()
            .find(|&v| self.out_degree[v] > 0)
            .or_else(|| nodes.first().copied())
            .ok_or_else(|| Error::State("no nodes to start from".into()))
    }
}

fn group_masks(n: usize, f: usize, cols: usize) -> Vec<Bits> {
    let groups = subarrays_needed(n as u64, f as u64) as usize;
    (0..groups)
        .map(|g| {
            let used = (n - g * f).min(f);
            Bits::range_mask(cols, 0, used)
        })
        .collect()
}

/// Per-column equality of two vertical words, one compare per bit row and a
/// DPU column-AND over the resulting masks.
fn column_equal(m: &mut Machine, a: WordRows, b: WordRows) -> Result<Bits> {
    let cols = m.cols();
    let mut masks = Vec::with_capacity(a.width);
    for i in 0..a.width {
        let r = m.cmp(
            MemAddress::row(a.subarray, a.lsb_row + i, cols),
            MemAddress::row(b.subarray, b.lsb_row + i, cols),
            cols,
        )?;
        masks.push(r.mask);
    }
    m.dpu_column_and(&masks)
}

/// Accumulates in/out degrees and the edge count in the fabric and senses
/// the start/end/balanced condition of every node. No start is chosen.
pub fn degree_pass(m: &mut Machine, g: &SparseGraph) -> Result<DegreeTable> {
    let prev = m.stage();
    m.set_stage(Stage::Traverse);
    let r = degree_pass_inner(m, g);
    m.set_stage(prev);
    r
}

fn degree_pass_inner(m: &mut Machine, g: &SparseGraph) -> Result<DegreeTable> {
    let n = g.node_count();
    let geo = m.geometry();
    let f = geo.rows.min(geo.cols);
    let out_adj = g.out_adjacency();
    let in_adj = g.in_adjacency();
    let data_rows = RowLayout::standard(geo.rows).data_region.len();
    let max_slots = (data_rows / DEGREE_WIDTH).saturating_sub(3);
    let slots_needed = out_adj.iter().map(Vec::len).max().unwrap_or(0);
    if slots_needed > max_slots {
        return Err(Error::Capacity(format!(
            "a node has {slots_needed} distinct successors; degree columns hold {max_slots}"
        )));
    }
    let masks = group_masks(n, f, geo.cols);
    let mut subarrays = Vec::with_capacity(masks.len());
    for _ in 0..masks.len() {
        subarrays.push(m.alloc()?);
    }
    let control = m.alloc()?;
    let place = DegreePlacement { subarrays: subarrays.clone(), control, slots_per_node: slots_needed, f };

    // Multiplicities come out of the edge store and move into the degree
    // columns of their endpoints.
    let mut mult = Vec::with_capacity(g.edges().len());
    for (i, e) in g.edges().iter().enumerate() {
        let v = match g.slots() {
            Some(slots) => {
                let bits = m.read_bits(slots[i].mult_addr(), super::graph::MULT_BITS)?;
                bits.to_u64()
            }
            None => e.mult as u64,
        };
        mult.push(v);
        m.transfer(2, Stage::Traverse);
    }

    let overflow = |ov: Bits| -> Result<()> {
        if ov.any() {
            return Err(Error::Range(format!("degree exceeds {DEGREE_WIDTH}-bit counters")));
        }
        Ok(())
    };
    let tmp_index = 2;
    for (gi, &sub) in subarrays.iter().enumerate() {
        let lo = gi * f;
        let hi = (lo + f).min(n);
        for j in 0..slots_needed {
            let vals: Vec<(usize, u64)> =
                (lo..hi).filter_map(|v| out_adj[v].get(j).map(|&ei| (v - lo, mult[ei]))).collect();
            if vals.is_empty() {
                continue;
            }
            let mask = Bits::from_bools((0..geo.cols).map(|c| vals.iter().any(|&(col, _)| col == c)));
            let slot = rows_of(sub, 3 + j);
            m.write_vertical(slot, &vals)?;
            overflow(m.add_columns(rows_of(sub, 0), Addend::Word(slot), rows_of(sub, 0), &mask)?)?;
        }
        let max_in = (lo..hi).map(|v| in_adj[v].len()).max().unwrap_or(0);
        for j in 0..max_in {
            let vals: Vec<(usize, u64)> =
                (lo..hi).filter_map(|v| in_adj[v].get(j).map(|&ei| (v - lo, mult[ei]))).collect();
            let mask = Bits::from_bools((0..geo.cols).map(|c| vals.iter().any(|&(col, _)| col == c)));
            let tmp = rows_of(sub, tmp_index);
            m.write_vertical(tmp, &vals)?;
            overflow(m.add_columns(rows_of(sub, 1), Addend::Word(tmp), rows_of(sub, 1), &mask)?)?;
        }
    }

    let mut start_like = Vec::with_capacity(n);
    let mut end_like = Vec::with_capacity(n);
    let mut balanced = Vec::with_capacity(n);
    let mut out_degree = Vec::with_capacity(n);
    let mut in_degree = Vec::with_capacity(n);
    for (gi, &sub) in subarrays.iter().enumerate() {
        let used = &masks[gi];
        let width = used.count_ones();
        let (out_w, in_w, tmp) = (rows_of(sub, 0), rows_of(sub, 1), rows_of(sub, tmp_index));
        m.add_columns(in_w, Addend::Const(1), tmp, used)?;
        let s = column_equal(m, out_w, tmp)?;
        m.add_columns(out_w, Addend::Const(1), tmp, used)?;
        let e = column_equal(m, in_w, tmp)?;
        let b = column_equal(m, out_w, in_w)?;
        let outs = m.read_vertical(out_w)?;
        let ins = m.read_vertical(in_w)?;
        for c in 0..width {
            start_like.push(s.get(c));
            end_like.push(e.get(c));
            balanced.push(b.get(c));
            out_degree.push(outs[c]);
            in_degree.push(ins[c]);
        }
    }

    let edge_cnt: u64 = out_degree.iter().sum();
    let in_total: u64 = in_degree.iter().sum();
    m.dpu_work(2 * n as u64);
    if m.dpu_scalar(DpuOp::CompareEq, edge_cnt as i64, in_total as i64)?.as_bool() != Some(true) {
        return Err(Error::Consistency(format!("in-degree total {in_total} differs from out-degree total {edge_cnt}")));
    }
    m.write_vertical(place.edge_cnt_word().rows(), &[(0, edge_cnt)])?;
    Ok(DegreeTable {
        in_degree,
        out_degree,
        edge_cnt,
        start: 0,
        start_like,
        end_like,
        balanced,
        placement: Some(place),
    })
}

/// Degree accumulation plus the start test over the whole graph.
pub fn find_start(m: &mut Machine, g: &SparseGraph) -> Result<DegreeTable> {
    let mut dt = degree_pass(m, g)?;
    let prev = m.stage();
    m.set_stage(Stage::Traverse);
    m.dpu_work(g.node_count() as u64);
    let nodes: Vec<usize> = (0..g.node_count()).collect();
    let r = dt.choose_start(&nodes);
    m.set_stage(prev);
    dt.start = r?;
    Ok(dt)
}

/// Host-side validity test of the next move `u -> v` given the remaining
/// multiplicity of every edge.
pub fn is_valid_next_edge(g: &SparseGraph, remaining: &[u32], u: usize, v: usize) -> Result<bool> {
    let walker = Walker::new(g, remaining.to_vec());
    let ei = walker.out_adj[u]
        .iter()
        .copied()
        .find(|&i| g.edges()[i].dst == v && remaining[i] > 0)
        .ok_or_else(|| Error::Address(format!("no remaining edge {u}->{v}")))?;
    let mut scratch = remaining.to_vec();
    Ok(walker.valid(&mut scratch, u, ei).0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EulerPath {
    pub vertices: Vec<usize>,
}

impl EulerPath {
    pub fn labels<'a>(&self, g: &'a SparseGraph) -> Vec<&'a EncodedSeq> {
        self.vertices.iter().map(|&v| &g.labels()[v]).collect()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

struct Walker<'g> {
    g: &'g SparseGraph,
    out_adj: Vec<Vec<usize>>,
    slot_of: Vec<usize>,
    undirected: Vec<Vec<(usize, usize)>>,
    remaining: Vec<u32>,
}

impl<'g> Walker<'g> {
    fn new(g: &'g SparseGraph, remaining: Vec<u32>) -> Self {
        let out_adj = g.out_adjacency();
        let mut slot_of = vec![0; g.edges().len()];
        for list in &out_adj {
            for (j, &ei) in list.iter().enumerate() {
                slot_of[ei] = j;
            }
        }
        let mut undirected = vec![Vec::new(); g.node_count()];
        for (i, e) in g.edges().iter().enumerate() {
            undirected[e.src].push((e.dst, i));
            if e.src != e.dst {
                undirected[e.dst].push((e.src, i));
            }
        }
        Walker { g, out_adj, slot_of, undirected, remaining }
    }

    fn candidates(&self, u: usize) -> Vec<usize> {
        self.out_adj[u].iter().copied().filter(|&i| self.remaining[i] > 0).collect()
    }

    /// Whether taking one unit of edge `ei` out of `u` is a valid Fleury
    /// move, and the traversal work spent deciding.
    fn valid(&self, remaining: &mut [u32], u: usize, ei: usize) -> (bool, u64) {
        let cands: Vec<usize> = self.out_adj[u].iter().copied().filter(|&i| remaining[i] > 0).collect();
        if cands.len() == 1 {
            return (true, 1);
        }
        if remaining[ei] > 1 {
            return (true, 1);
        }
        let (before, w1) = weak_reach(&self.undirected, remaining, u);
        remaining[ei] -= 1;
        let (after, w2) = weak_reach(&self.undirected, remaining, u);
        remaining[ei] += 1;
        (after == before, w1 + w2)
    }

    /// Picks the next edge out of `u`: the first valid candidate in
    /// destination order, else the first candidate.
    fn choose(&mut self, u: usize) -> (Option<usize>, u64) {
        let cands = self.candidates(u);
        let mut work = 0;
        let mut scratch = std::mem::take(&mut self.remaining);
        let mut pick = None;
        for &ei in &cands {
            let (ok, w) = self.valid(&mut scratch, u, ei);
            work += w;
            if ok {
                pick = Some(ei);
                break;
            }
        }
        self.remaining = scratch;
        (pick.or_else(|| cands.first().copied()), work)
    }
}

/// Fabric-side state of a walk: degree placement plus the path store.
struct PathStore {
    subarrays: Vec<SubArrayId>,
    len: usize,
    per_sub: usize,
    data_start: usize,
}

impl PathStore {
    fn new() -> Self {
        PathStore { subarrays: Vec::new(), len: 0, per_sub: 0, data_start: 0 }
    }

    fn push(&mut self, m: &mut Machine, node: usize) -> Result<()> {
        if node as u64 > u32::MAX as u64 {
            return Err(Error::Range(format!("node id {node} exceeds 32 bits")));
        }
        if self.subarrays.is_empty() || self.len == self.per_sub * self.subarrays.len() {
            let id = m.alloc()?;
            let region = m.subarray(id)?.layout().data_region.clone();
            self.per_sub = region.len() * PATH_IDS_PER_ROW;
            self.data_start = region.start;
            self.subarrays.push(id);
        }
        let local = self.len - self.per_sub * (self.subarrays.len() - 1);
        let sub = *self.subarrays.last().expect("allocated above");
        let addr = MemAddress::new(
            sub,
            self.data_start + local / PATH_IDS_PER_ROW,
            (local % PATH_IDS_PER_ROW) * 32,
            32,
        );
        m.mem_insert(addr, Source::Imm(&Bits::from_u64(node as u64, 32)), 32)?;
        self.len += 1;
        Ok(())
    }
}

/// Walk driver shared by the strict Fleury walk and best-effort assembly.
pub(crate) struct Traversal<'g> {
    walker: Walker<'g>,
    place: DegreePlacement,
    path: PathStore,
    edges_left: u64,
}

impl<'g> Traversal<'g> {
    pub(crate) fn new(g: &'g SparseGraph, dt: &DegreeTable) -> Result<Self> {
        let place = dt
            .placement
            .clone()
            .ok_or_else(|| Error::State("degree table has no fabric placement; run find_start first".into()))?;
        let remaining = g.edges().iter().map(|e| e.mult).collect();
        Ok(Traversal { walker: Walker::new(g, remaining), place, path: PathStore::new(), edges_left: dt.edge_cnt })
    }

    pub(crate) fn out_remaining(&self, v: usize) -> u64 {
        self.walker.out_adj[v].iter().map(|&i| self.walker.remaining[i] as u64).sum()
    }

    pub(crate) fn in_remaining(&self, v: usize, in_adj: &[Vec<usize>]) -> u64 {
        in_adj[v].iter().map(|&i| self.walker.remaining[i] as u64).sum()
    }

    fn decrement(m: &mut Machine, w: VerticalWordRef, what: &str) -> Result<()> {
        // Adding all-ones carries out unless the word was already zero.
        if !m.add_const(w, -1)? {
            return Err(Error::Consistency(format!("{what} counter underflow")));
        }
        Ok(())
    }

    /// Walks from `start` consuming `budget` edge units. Returns the
    /// visited vertices; stops early only when `u` has no remaining edge,
    /// which is an error when `strict`.
    pub(crate) fn walk(&mut self, m: &mut Machine, start: usize, budget: u64, strict: bool) -> Result<Vec<usize>> {
        let mut u = start;
        let mut vertices = vec![start];
        self.path.push(m, start)?;
        let mut left = budget;
        while m.dpu_scalar(DpuOp::CompareGt, left.min(u32::MAX as u64) as i64, 0)?.as_bool() == Some(true) {
            let (pick, work) = self.walker.choose(u);
            m.dpu_work(work);
            let Some(ei) = pick else {
                if strict {
                    return Err(Error::Disconnected(format!("stuck at node {u} with {left} edge(s) unvisited")));
                }
                break;
            };
            let v = self.walker.g.edges()[ei].dst;
            let slot = self.walker.slot_of[ei];
            self.walker.remaining[ei] -= 1;
            self.path.push(m, v)?;
            Self::decrement(m, self.place.out_word(u), "out-degree")?;
            Self::decrement(m, self.place.slot_word(u, slot), "edge multiplicity")?;
            Self::decrement(m, self.place.edge_cnt_word(), "edge")?;
            left -= 1;
            self.edges_left -= 1;
            vertices.push(v);
            u = v;
        }
        Ok(vertices)
    }

    /// Reads the edge counter back and checks that every edge was consumed.
    pub(crate) fn finish(&mut self, m: &mut Machine) -> Result<()> {
        let w = self.place.edge_cnt_word();
        let left = m.read_vertical(w.rows())?[0];
        if m.dpu_scalar(DpuOp::CompareEq, left as i64, self.edges_left as i64)?.as_bool() != Some(true) {
            return Err(Error::Consistency(format!("edge counter reads {left}, expected {}", self.edges_left)));
        }
        Ok(())
    }
}

/// Iterative Fleury walk from `dt.start` until the edge counter reaches zero.
pub fn fleury(m: &mut Machine, g: &SparseGraph, dt: &DegreeTable) -> Result<EulerPath> {
    let prev = m.stage();
    m.set_stage(Stage::Traverse);
    let r = (|| {
        let mut t = Traversal::new(g, dt)?;
        let vertices = t.walk(m, dt.start, dt.edge_cnt, true)?;
        t.finish(m)?;
        if t.edges_left != 0 {
            return Err(Error::Consistency(format!("{} edge(s) left after the walk", t.edges_left)));
        }
        Ok(EulerPath { vertices })
    })();
    m.set_stage(prev);
    r
}

/// Spells a path: the first label followed by the bases each later label
/// adds beyond its (k-2)-base overlap with the previous one.
pub fn contigs_from_path(labels: &[&EncodedSeq], k: usize) -> Result<EncodedSeq> {
    let Some(first) = labels.first() else {
        return Err(Error::State("empty path".into()));
    };
    let ov = k.checked_sub(2).ok_or_else(|| Error::Config("k must be at least 2".into()))?;
    let mut out = (*first).clone();
    for w in labels.windows(2) {
        let (a, b) = (w[0].codes(), w[1].codes());
        if a.len() < ov || b.len() < ov || a[a.len() - ov..] != b[..ov] {
            return Err(Error::Consistency(format!("{} does not overlap {} by {ov} bases", w[0], w[1])));
        }
        out.extend_from(&b[ov..]);
    }
    Ok(out)
}
