// SPDX-License-Identifier: Apache-2.0

//! Data placement: the hash-table row map of a sub-array, interval-block
//! graph partitioning, per-node column slots and capacity planning.

use std::ops::Range;

use serde::Serialize;

use crate::assembly::SparseGraph;
use crate::error::{Error, Result};
use crate::fabric::RowLayout;
use crate::isa::{Geometry, WordRows};
use crate::seq::EncodedSeq;

/// Counter rows per value stripe.
pub const COUNTER_WIDTH: usize = 8;

/// Row map of a hash-table sub-array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HashLayout {
    pub rows: usize,
    pub cols: usize,
    pub k: usize,
    pub kmer_rows: Range<usize>,
    pub value_rows: Range<usize>,
    pub stripes: usize,
    pub counter_width: usize,
    pub temp_rows: Vec<usize>,
    pub init_rows: [usize; 2],
    pub carry_rows: Vec<usize>,
    pub resv_rows: Vec<usize>,
}

impl HashLayout {
    pub fn kmer_bits(&self) -> usize {
        2 * self.k
    }

    pub fn capacity(&self) -> usize {
        self.kmer_rows.len()
    }

    /// Counter owned by the k-mer in `row`: stripe `row / cols`, column
    /// `row % cols`.
    pub fn counter_slot(&self, row: usize) -> (WordRows, usize) {
        let stripe = row / self.cols;
        let rows = WordRows {
            subarray: 0,
            lsb_row: self.value_rows.start + stripe * self.counter_width,
            width: self.counter_width,
        };
        (rows, row % self.cols)
    }

    pub fn stripe_rows(&self, stripe: usize) -> WordRows {
        WordRows {
            subarray: 0,
            lsb_row: self.value_rows.start + stripe * self.counter_width,
            width: self.counter_width,
        }
    }
}

/// Splits the data region of a sub-array into k-mer rows and a vertical
/// counter region large enough to give every k-mer row its own counter.
pub fn layout_hash(dims: Geometry, k: usize) -> Result<HashLayout> {
    if k == 0 || 2 * k > dims.cols {
        return Err(Error::Capacity(format!(
            "a {k}-mer needs {} bits but rows hold {}",
            2 * k,
            dims.cols
        )));
    }
    let fabric = RowLayout::standard(dims.rows);
    let data = fabric.data_region.len();
    let mut best = (0, 0);
    for stripes in 1..=data / COUNTER_WIDTH {
        let n = (stripes * dims.cols).min(data.saturating_sub(stripes * COUNTER_WIDTH));
        if n > best.0 {
            best = (n, stripes);
        }
    }
    let (n, stripes) = best;
    if n == 0 {
        return Err(Error::Capacity(format!("{}x{} sub-array has no room for a hash table", dims.rows, dims.cols)));
    }
    let start = fabric.data_region.start;
    Ok(HashLayout {
        rows: dims.rows,
        cols: dims.cols,
        k,
        kmer_rows: start..start + n,
        value_rows: start + n..start + n + stripes * COUNTER_WIDTH,
        stripes,
        counter_width: COUNTER_WIDTH,
        temp_rows: fabric.temp_rows.clone(),
        init_rows: [fabric.init0_row, fabric.init1_row],
        carry_rows: fabric.carry_rows.clone(),
        resv_rows: fabric.resv_rows.clone(),
    })
}

/// Seeded multiplicative hash of a 2-bit-packed label.
pub fn label_hash(label: &EncodedSeq, seed: u64) -> u64 {
    let x = label.fold64() ^ seed.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let x = (x ^ (x >> 32)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^ (x >> 29)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionPlan {
    pub m: usize,
    pub seed: u64,
    /// Interval of each node id.
    pub vertex_interval: Vec<usize>,
    /// Edge indices per block, block `i * m + j` holding edges from
    /// interval `i` to interval `j`.
    pub blocks: Vec<Vec<usize>>,
    /// Sub-array group of each block.
    pub chip_assignment: Vec<usize>,
}

impl PartitionPlan {
    pub fn block_of(&self, src: usize, dst: usize) -> usize {
        self.vertex_interval[src] * self.m + self.vertex_interval[dst]
    }
}

/// Hashes every node label into one of `m` intervals and buckets edges into
/// the `m * m` blocks. Blocks go round-robin to `m` sub-array groups.
pub fn partition_graph(g: &SparseGraph, m: usize, seed: u64) -> Result<PartitionPlan> {
    if m == 0 {
        return Err(Error::Config("partition count must be at least 1".into()));
    }
    let vertex_interval: Vec<usize> = g.labels().iter().map(|l| (label_hash(l, seed) % m as u64) as usize).collect();
    let mut blocks = vec![Vec::new(); m * m];
    for (i, e) in g.edges().iter().enumerate() {
        blocks[vertex_interval[e.src] * m + vertex_interval[e.dst]].push(i);
    }
    let chip_assignment = (0..m * m).map(|b| b % m).collect();
    Ok(PartitionPlan { m, seed, vertex_interval, blocks, chip_assignment })
}

/// `ceil(n / f)` sub-arrays for `n` column-mapped vertices.
pub fn subarrays_needed(n: u64, f: u64) -> u64 {
    assert!(f >= 1, "slot count per sub-array must be positive");
    n.div_ceil(f)
}

/// Column slot of a node: `(group, column)` with `f` slots per group.
pub fn place_vertical_word(node: usize, f: usize) -> (usize, usize) {
    (node / f, node % f)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityPlan {
    pub genome_size: u64,
    pub k: u64,
    pub hash_bits: u64,
    pub hash_bytes: u64,
    pub hash_gib: f64,
    pub subarrays_needed: u64,
}

/// Hash-table storage for a genome of `g` bases at k-mer length `k`.
pub fn capacity_plan(g: u64, k: u64, dims: Geometry) -> Result<CapacityPlan> {
    if g == 0 {
        return Err(Error::Config("genome size must be at least 1".into()));
    }
    let hash_bits = 2 * g * (k + 1);
    let hash_bytes = hash_bits.div_ceil(8);
    Ok(CapacityPlan {
        genome_size: g,
        k,
        hash_bits,
        hash_bytes,
        hash_gib: hash_bytes as f64 / (1u64 << 30) as f64,
        subarrays_needed: subarrays_needed(hash_bits, (dims.rows * dims.cols) as u64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_hash_layout() {
        let l = layout_hash(Geometry::default(), 25).unwrap();
        assert_eq!(l.kmer_rows, 0..980);
        assert_eq!(l.value_rows, 980..1012);
        assert_eq!(l.stripes, 4);
        assert_eq!(l.temp_rows.len() + l.init_rows.len() + l.carry_rows.len() + l.resv_rows.len(), 12);
        assert!(l.stripes * l.cols >= l.capacity());
    }

    #[test]
    fn k_limits() {
        assert!(matches!(layout_hash(Geometry::default(), 129), Err(Error::Capacity(_))));
        let l = layout_hash(Geometry::default(), 128).unwrap();
        assert_eq!(l.kmer_bits(), 256);
        assert_eq!(256 - layout_hash(Geometry::default(), 32).unwrap().kmer_bits(), 192);
    }

    #[test]
    fn counter_slots_are_injective() {
        let l = layout_hash(Geometry::default(), 25).unwrap();
        let mut seen = std::collections::HashSet::new();
        for r in l.kmer_rows.clone() {
            let (w, c) = l.counter_slot(r);
            assert!(l.value_rows.contains(&w.lsb_row) && l.value_rows.contains(&(w.lsb_row + w.width - 1)));
            assert!(seen.insert((w.lsb_row, c)));
        }
    }

    #[test]
    fn slots_and_ceilings() {
        assert_eq!(subarrays_needed(256, 256), 1);
        assert_eq!(subarrays_needed(257, 256), 2);
        assert_eq!(place_vertical_word(0, 256), (0, 0));
        assert_eq!(place_vertical_word(256, 256), (1, 0));
        assert_eq!(place_vertical_word(300, 256), (1, 44));
    }

    #[test]
    fn capacity_small_cases() {
        let p = capacity_plan(1, 1, Geometry::default()).unwrap();
        assert_eq!(p.hash_bits, 4);
        let p = capacity_plan(10_000, 25, Geometry::default()).unwrap();
        assert_eq!(p.hash_bits, 520_000);
        assert_eq!(p.hash_bytes, 65_000);
    }
}
