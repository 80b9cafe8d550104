// SPDX-License-Identifier: Apache-2.0

//! Stage 1: k-mer counting in hash buckets held by sub-arrays.
//!
//! Each bucket is a chain of sub-arrays laid out by [`layout_hash`]. A k-mer
//! probe is written into the bucket's temp row and compared against the
//! occupied k-mer rows; a hit increments the row's vertical counter, a miss
//! copies the probe into the next free row and sets its counter to one.

use std::collections::HashMap;
use std::fmt::Write as _;

use log::warn;

use crate::error::{Error, Result};
use crate::isa::{Machine, MemAddress, Source, SubArrayId, WordRows};
use crate::mapping::{label_hash, layout_hash, HashLayout};
use crate::seq::EncodedSeq;
use crate::trace::Stage;

/// Fabric location of a stored k-mer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KmerSlot {
    pub subarray: SubArrayId,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KmerEntry {
    pub kmer: EncodedSeq,
    pub freq: u32,
    pub slot: Option<KmerSlot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KmerTable {
    k: usize,
    entries: Vec<KmerEntry>,
    /// Counters that hit their maximum and stopped counting.
    pub saturated: usize,
}

impl KmerTable {
    pub fn new(k: usize) -> Self {
        KmerTable { k, entries: Vec::new(), saturated: 0 }
    }

    /// Host-side table, entries in first-appearance order.
    pub fn from_counts(k: usize, counts: impl IntoIterator<Item = (EncodedSeq, u32)>) -> Result<Self> {
        let mut t = KmerTable::new(k);
        for (kmer, freq) in counts {
            if kmer.len() != k {
                return Err(Error::Shape(format!("key of length {} in a {k}-mer table", kmer.len())));
            }
            if freq == 0 {
                return Err(Error::State("k-mer frequencies start at 1".into()));
            }
            t.entries.push(KmerEntry { kmer, freq, slot: None });
        }
        Ok(t)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &[KmerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.freq as u64).sum()
    }

    pub fn get(&self, kmer: &EncodedSeq) -> Option<u32> {
        self.entries.iter().find(|e| &e.kmer == kmer).map(|e| e.freq)
    }

    pub fn to_map(&self) -> HashMap<EncodedSeq, u32> {
        self.entries.iter().map(|e| (e.kmer.clone(), e.freq)).collect()
    }

    /// `kmer<TAB>count` lines in table order.
    pub fn dump_tsv(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(s, "{}\t{}", e.kmer, e.freq);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashConfig {
    /// Target fraction of k-mer rows filled if every extracted k-mer were
    /// distinct; sets the bucket count.
    pub load_factor: f64,
    pub seed: u64,
}

impl Default for HashConfig {
    fn default() -> Self {
        HashConfig { load_factor: 0.5, seed: 0x5eed }
    }
}

#[derive(Debug, Default)]
struct Bucket {
    chain: Vec<SubArrayId>,
    used: usize,
}

struct Builder<'a> {
    m: &'a mut Machine,
    layout: HashLayout,
    buckets: Vec<Bucket>,
    seed: u64,
    saturated: usize,
}

impl Builder<'_> {
    fn temp(&self, sub: SubArrayId) -> MemAddress {
        MemAddress::new(sub, self.layout.temp_rows[0], 0, self.layout.kmer_bits())
    }

    fn counter(&self, sub: SubArrayId, row: usize) -> (WordRows, usize) {
        let (w, col) = self.layout.counter_slot(row - self.layout.kmer_rows.start);
        (WordRows { subarray: sub, ..w }, col)
    }

    fn insert(&mut self, kmer: &EncodedSeq) -> Result<()> {
        let bits = kmer.to_bits();
        let size = bits.len();
        let b = (label_hash(kmer, self.seed) % self.buckets.len() as u64) as usize;
        let chain = self.buckets[b].chain.clone();
        let used = self.buckets[b].used;
        let cap = self.layout.capacity();
        let start = self.layout.kmer_rows.start;
        for (i, &sub) in chain.iter().enumerate() {
            let occupied = if i + 1 == chain.len() { used } else { cap };
            let probe = self.temp(sub);
            self.m.mem_insert(probe, Source::Imm(&bits), size)?;
            if let Some(row) = self.m.cmp_search(probe, start..start + occupied)? {
                let (w, col) = self.counter(sub, row);
                let word = w.at(col);
                if self.m.increment(word)? {
                    let max = (1u64 << w.width) - 1;
                    self.m.write_vertical(w, &[(col, max)])?;
                    self.saturated += 1;
                    warn!("frequency counter of {kmer} saturated at {max}");
                }
                return Ok(());
            }
        }
        let full = chain.is_empty() || used == cap;
        let (sub, row) = if full {
            let sub = self.m.alloc()?;
            self.buckets[b].chain.push(sub);
            self.buckets[b].used = 0;
            (sub, start)
        } else {
            (*chain.last().expect("chain is nonempty"), start + used)
        };
        let dst = MemAddress::new(sub, row, 0, size);
        if full {
            self.m.mem_insert(dst, Source::Imm(&bits), size)?;
        } else {
            self.m.mem_insert(dst, Source::Mem(self.temp(sub)), size)?;
        }
        let (w, col) = self.counter(sub, row);
        self.m.write_vertical(w, &[(col, 1)])?;
        self.buckets[b].used += 1;
        Ok(())
    }

    fn read_back(&mut self, k: usize) -> Result<Vec<KmerEntry>> {
        let mut entries = Vec::new();
        let cap = self.layout.capacity();
        let start = self.layout.kmer_rows.start;
        let cols = self.layout.cols;
        for b in 0..self.buckets.len() {
            let chain = self.buckets[b].chain.clone();
            let used = self.buckets[b].used;
            for (i, &sub) in chain.iter().enumerate() {
                let occupied = if i + 1 == chain.len() { used } else { cap };
                let mut freqs = Vec::with_capacity(occupied);
                for stripe in 0..occupied.div_ceil(cols) {
                    let w = WordRows { subarray: sub, ..self.layout.stripe_rows(stripe) };
                    freqs.extend(self.m.read_vertical(w)?);
                }
                for (j, &freq) in freqs.iter().take(occupied).enumerate() {
                    let bits = self.m.read_bits(MemAddress::new(sub, start + j, 0, 2 * k), 2 * k)?;
                    entries.push(KmerEntry {
                        kmer: EncodedSeq::from_bits(&bits, k)?,
                        freq: freq as u32,
                        slot: Some(KmerSlot { subarray: sub, row: start + j }),
                    });
                }
            }
        }
        Ok(entries)
    }
}

fn window_count(reads: &[EncodedSeq], k: usize) -> u64 {
    reads.iter().map(|r| (r.len() + 1).saturating_sub(k) as u64).sum()
}

/// Counts every k-mer of `reads` in the fabric. Read ingestion is charged
/// as `io` transfers; everything else is tagged `hashmap`.
pub fn hashmap_build(m: &mut Machine, reads: &[EncodedSeq], k: usize, cfg: &HashConfig) -> Result<KmerTable> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let layout = layout_hash(m.geometry(), k)?;
    let windows = window_count(reads, k);
    if windows == 0 {
        return Ok(KmerTable::new(k));
    }
    if !(cfg.load_factor > 0.0 && cfg.load_factor <= 1.0) {
        return Err(Error::Config(format!("load factor {} outside (0, 1]", cfg.load_factor)));
    }
    let per_bucket = (layout.capacity() as f64 * cfg.load_factor).max(1.0);
    let n_buckets = ((windows as f64 / per_bucket).ceil() as usize).max(1);
    let prev = m.stage();
    let mut b = Builder {
        m,
        layout,
        buckets: (0..n_buckets).map(|_| Bucket::default()).collect(),
        seed: cfg.seed,
        saturated: 0,
    };
    for read in reads {
        if read.len() < k {
            continue;
        }
        b.m.transfer(read.bit_len().div_ceil(8) as u64, Stage::Io);
        b.m.set_stage(Stage::Hashmap);
        for i in 0..=read.len() - k {
            b.insert(&read.sub(i, k))?;
        }
    }
    b.m.set_stage(Stage::Hashmap);
    let entries = b.read_back(k)?;
    let saturated = b.saturated;
    m.set_stage(prev);
    Ok(KmerTable { k, entries, saturated })
}
