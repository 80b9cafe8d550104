// SPDX-License-Identifier: Apache-2.0

//! Three-instruction in-memory ISA (insert, compare, add) plus the shared
//! digital processing unit, executed on a pool of sub-arrays.
//!
//! Every instruction drains the cycle events of the sub-arrays it touched
//! into the machine trace, tagged with the current stage. Events inside one
//! instruction are aggregated per class in order of first appearance.

use std::ops::Range;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::fabric::{SenseConfig, SenseThresholds, SubArray, DEFAULT_COLS, DEFAULT_ROWS};
use crate::trace::{EventKind, OpTrace, Stage};

pub type SubArrayId = usize;

/// A row index with the column range used in it.
type RowSpan = (usize, Range<usize>);

/// Default ceiling on allocated sub-arrays: four chips of 16x16 banks with
/// 4x4 mats each.
pub const DEFAULT_MAX_SUBARRAYS: usize = 4 * 16 * 16 * 4 * 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub rows: usize,
    pub cols: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry { rows: DEFAULT_ROWS, cols: DEFAULT_COLS }
    }
}

/// A row-major operand: `bit_len` bits starting at (`row`, `col_start`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemAddress {
    pub subarray: SubArrayId,
    pub row: usize,
    pub col_start: usize,
    pub bit_len: usize,
}

impl MemAddress {
    pub fn new(subarray: SubArrayId, row: usize, col_start: usize, bit_len: usize) -> Self {
        MemAddress { subarray, row, col_start, bit_len }
    }

    /// A full-row operand starting at column 0.
    pub fn row(subarray: SubArrayId, row: usize, cols: usize) -> Self {
        MemAddress { subarray, row, col_start: 0, bit_len: cols }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Mem(MemAddress),
    Imm(&'a Bits),
}

/// A word stored vertically in one column, LSB at `lsb_row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerticalWordRef {
    pub subarray: SubArrayId,
    pub col: usize,
    pub lsb_row: usize,
    pub width: usize,
}

impl VerticalWordRef {
    pub fn rows(&self) -> WordRows {
        WordRows { subarray: self.subarray, lsb_row: self.lsb_row, width: self.width }
    }
}

/// The row span of a vertical word, shared by every column of a sub-array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordRows {
    pub subarray: SubArrayId,
    pub lsb_row: usize,
    pub width: usize,
}

impl WordRows {
    pub fn at(&self, col: usize) -> VerticalWordRef {
        VerticalWordRef { subarray: self.subarray, col, lsb_row: self.lsb_row, width: self.width }
    }

    fn row_range(&self) -> Range<usize> {
        self.lsb_row..self.lsb_row + self.width
    }
}

/// Second operand of a column-parallel add.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Addend {
    Word(WordRows),
    /// Constant taken modulo 2^width; each bit selects the init-0 or
    /// init-1 row.
    Const(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmpResult {
    pub equal: bool,
    pub mask: Bits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpuOp {
    CompareEq,
    CompareGt,
    AddSmall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpuValue {
    Bool(bool),
    Int(i64),
}

impl DpuValue {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            DpuValue::Bool(b) => Some(b),
            DpuValue::Int(_) => None,
        }
    }

    pub fn as_int(self) -> Option<i64> {
        match self {
            DpuValue::Int(v) => Some(v),
            DpuValue::Bool(_) => None,
        }
    }
}

/// A pool of sub-arrays sharing one geometry, one DPU and one trace.
#[derive(Debug)]
pub struct Machine {
    geometry: Geometry,
    subarrays: Vec<SubArray>,
    max_subarrays: usize,
    thresholds: SenseThresholds,
    trace: OpTrace,
    stage: Stage,
    pending: Vec<(EventKind, u64)>,
}

impl Machine {
    pub fn new(geometry: Geometry) -> Result<Machine> {
        Self::with_limit(geometry, DEFAULT_MAX_SUBARRAYS)
    }

    pub fn with_limit(geometry: Geometry, max_subarrays: usize) -> Result<Machine> {
        // Validate geometry up front.
        SubArray::new(geometry.rows, geometry.cols)?;
        Ok(Machine {
            geometry,
            subarrays: Vec::new(),
            max_subarrays,
            thresholds: SenseThresholds::default(),
            trace: OpTrace::new(),
            stage: Stage::Other,
            pending: Vec::new(),
        })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn cols(&self) -> usize {
        self.geometry.cols
    }

    pub fn allocated(&self) -> usize {
        self.subarrays.len()
    }

    pub fn alloc(&mut self) -> Result<SubArrayId> {
        if self.subarrays.len() >= self.max_subarrays {
            return Err(Error::Capacity(format!("all {} sub-arrays in use", self.max_subarrays)));
        }
        let mut s = SubArray::new(self.geometry.rows, self.geometry.cols)?;
        s.set_thresholds(self.thresholds);
        self.subarrays.push(s);
        Ok(self.subarrays.len() - 1)
    }

    pub fn subarray(&self, id: SubArrayId) -> Result<&SubArray> {
        self.subarrays.get(id).ok_or_else(|| Error::Address(format!("no sub-array {id}")))
    }

    fn sub_mut(&mut self, id: SubArrayId) -> Result<&mut SubArray> {
        self.subarrays.get_mut(id).ok_or_else(|| Error::Address(format!("no sub-array {id}")))
    }

    pub fn set_stage(&mut self, stage: Stage) {
        self.stage = stage;
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn trace(&self) -> &OpTrace {
        &self.trace
    }

    pub fn take_trace(&mut self) -> OpTrace {
        self.trace.take()
    }

    fn tally(&mut self, kind: EventKind, count: u64) {
        if count == 0 {
            return;
        }
        match self.pending.iter_mut().find(|(k, _)| *k == kind) {
            Some(p) => p.1 += count,
            None => self.pending.push((kind, count)),
        }
    }

    fn collect(&mut self, id: SubArrayId) {
        let t = self.subarrays[id].take_trace();
        for e in t.events() {
            self.tally(e.kind, e.count);
        }
    }

    fn commit(&mut self) {
        let stage = self.stage;
        for (kind, count) in std::mem::take(&mut self.pending) {
            self.trace.push(kind, count, stage);
        }
    }

    /// Runs `f` as one instruction: on error, events already emitted are
    /// still charged.
    fn instr<T>(&mut self, subs: &[SubArrayId], f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let r = f(self);
        for &id in subs {
            if id < self.subarrays.len() {
                self.collect(id);
            }
        }
        self.commit();
        r
    }

    /// Span of `size` bits from `addr`: (first row, rows touched, bit ranges per row).
    fn span(&self, addr: &MemAddress, size: usize) -> Result<Vec<(usize, Range<usize>)>> {
        let cols = self.geometry.cols;
        self.subarray(addr.subarray)?;
        if size == 0 {
            return Err(Error::Size("size must be positive".into()));
        }
        if addr.bit_len == 0 || addr.col_start + addr.bit_len > cols {
            return Err(Error::Address(format!(
                "operand [{}, +{}) exceeds the {cols}-column row",
                addr.col_start, addr.bit_len
            )));
        }
        let mut out = Vec::new();
        if addr.col_start + size <= cols {
            if size > addr.bit_len {
                return Err(Error::Size(format!("size {size} exceeds operand length {}", addr.bit_len)));
            }
            out.push((addr.row, addr.col_start..addr.col_start + size));
        } else {
            if addr.col_start != 0 {
                return Err(Error::Size(format!(
                    "size {size} spans several rows; operand must start at column 0"
                )));
            }
            let n = size.div_ceil(cols);
            for j in 0..n {
                let w = if j + 1 == n { size - j * cols } else { cols };
                out.push((addr.row + j, 0..w));
            }
        }
        let last = out.last().map(|(r, _)| *r).unwrap_or(addr.row);
        if last >= self.geometry.rows {
            return Err(Error::Address(format!("operand runs past row {}", self.geometry.rows - 1)));
        }
        Ok(out)
    }

    /// Copies `size` bits from `src` to `dst`, one read and one write per row touched.
    pub fn mem_insert(&mut self, dst: MemAddress, src: Source<'_>, size: usize) -> Result<()> {
        let dst_span = self.span(&dst, size)?;
        {
            let layout = self.subarray(dst.subarray)?.layout();
            for (r, _) in &dst_span {
                if layout.is_init_row(*r) || layout.carry_rows.contains(r) {
                    return Err(Error::Protection { row: *r });
                }
            }
        }
        let data: Bits = match src {
            Source::Imm(b) => {
                if b.len() < size {
                    return Err(Error::Size(format!("immediate has {} bits, need {size}", b.len())));
                }
                b.slice(0, size)
            }
            Source::Mem(a) => {
                let src_span = self.span(&a, size)?;
                let mut acc = Bits::zeros(size);
                let mut off = 0;
                let sid = a.subarray;
                let res: Result<()> = self.instr(&[sid], |m| {
                    for (r, range) in &src_span {
                        let row = m.sub_mut(sid)?.read_row(*r)?;
                        acc.splice(off, &row.slice(range.start, range.len()));
                        off += range.len();
                    }
                    Ok(())
                });
                res?;
                acc
            }
        };
        let cross = matches!(src, Source::Mem(a) if a.subarray != dst.subarray);
        let cols = self.geometry.cols;
        let did = dst.subarray;
        self.instr(&[did], |m| {
            let mut off = 0;
            for (r, range) in &dst_span {
                let mut value = Bits::zeros(cols);
                value.splice(range.start, &data.slice(off, range.len()));
                let mask = Bits::range_mask(cols, range.start, range.len());
                m.sub_mut(did)?.write_row_masked(*r, &value, &mask)?;
                off += range.len();
            }
            if cross {
                m.tally(EventKind::Xfer, size.div_ceil(8) as u64);
            }
            Ok(())
        })
    }

    /// Reads `size` bits at `addr` into the controller.
    pub fn read_bits(&mut self, addr: MemAddress, size: usize) -> Result<Bits> {
        let span = self.span(&addr, size)?;
        let sid = addr.subarray;
        self.instr(&[sid], |m| {
            let mut acc = Bits::zeros(size);
            let mut off = 0;
            for (r, range) in &span {
                let row = m.sub_mut(sid)?.read_row(*r)?;
                acc.splice(off, &row.slice(range.start, range.len()));
                off += range.len();
            }
            Ok(acc)
        })
    }

    fn cmp_spans(
        &self,
        src1: &MemAddress,
        src2: &MemAddress,
        size: usize,
    ) -> Result<(Vec<RowSpan>, Vec<RowSpan>)> {
        if src1.subarray != src2.subarray {
            return Err(Error::Placement(format!(
                "compare operands live in sub-arrays {} and {}; copy one into a temp row first",
                src1.subarray, src2.subarray
            )));
        }
        if src1.col_start != src2.col_start {
            return Err(Error::Placement("compare operands must share a column span".into()));
        }
        Ok((self.span(src1, size)?, self.span(src2, size)?))
    }

    fn xnor_rows(&mut self, sid: SubArrayId, r1: usize, r2: usize) -> Result<Bits> {
        let sub = self.sub_mut(sid)?;
        let init1 = sub.layout().init1_row;
        let out = sub.activate([r1, r2, init1], SenseConfig::XOR3)?;
        Ok(out.xor3.expect("XOR3 setting drives the sum output"))
    }

    /// Bulk bit-wise equality: one XNOR activation per row chunk, then a DPU
    /// AND-reduction of the mask.
    pub fn cmp(&mut self, src1: MemAddress, src2: MemAddress, size: usize) -> Result<CmpResult> {
        let (s1, s2) = self.cmp_spans(&src1, &src2, size)?;
        let sid = src1.subarray;
        self.instr(&[sid], |m| {
            let mut mask = Bits::zeros(size);
            let mut off = 0;
            for ((r1, range), (r2, _)) in s1.iter().zip(&s2) {
                let x = m.xnor_rows(sid, *r1, *r2)?;
                mask.splice(off, &x.slice(range.start, range.len()));
                off += range.len();
            }
            m.tally(EventKind::Dpu, 1);
            Ok(CmpResult { equal: mask.all(), mask })
        })
    }

    /// Compares `probe` against the same column span of each candidate row in
    /// turn and stops at the first match. Each probe costs one compare cycle
    /// and one DPU reduction.
    pub fn cmp_search(
        &mut self,
        probe: MemAddress,
        candidates: impl IntoIterator<Item = usize>,
    ) -> Result<Option<usize>> {
        let size = probe.bit_len;
        if probe.col_start + size > self.geometry.cols {
            return Err(Error::Size("search probes must fit one row".into()));
        }
        let sid = probe.subarray;
        self.subarray(sid)?;
        let span = Bits::range_mask(self.geometry.cols, probe.col_start, size);
        self.instr(&[sid], |m| {
            for row in candidates {
                let x = m.xnor_rows(sid, probe.row, row)?;
                m.tally(EventKind::Dpu, 1);
                if x.covers(&span) {
                    return Ok(Some(row));
                }
            }
            Ok(None)
        })
    }

    fn check_word(&self, w: &WordRows) -> Result<()> {
        let sub = self.subarray(w.subarray)?;
        if w.width == 0 {
            return Err(Error::Shape("vertical words need width >= 1".into()));
        }
        let data = &sub.layout().data_region;
        if w.lsb_row < data.start || w.lsb_row + w.width > data.end {
            return Err(Error::Address(format!(
                "vertical word rows [{}, {}) leave the data region {:?}",
                w.lsb_row,
                w.lsb_row + w.width,
                data
            )));
        }
        Ok(())
    }

    /// Column-parallel bit-serial addition `out = a + b (mod 2^w)` on the
    /// columns selected by `cols`. Costs `w` compare cycles and `2w` writes
    /// regardless of how many columns are selected. Returns the per-column
    /// final carry.
    pub fn add_columns(&mut self, a: WordRows, b: Addend, out: WordRows, cols: &Bits) -> Result<Bits> {
        let ncols = self.geometry.cols;
        self.check_word(&a)?;
        self.check_word(&out)?;
        if a.width != out.width {
            return Err(Error::Shape(format!("operand widths {} and {} differ", a.width, out.width)));
        }
        if a.subarray != out.subarray {
            return Err(Error::Placement("add operands must share a sub-array".into()));
        }
        if let Addend::Word(bw) = b {
            self.check_word(&bw)?;
            if bw.width != a.width {
                return Err(Error::Shape(format!("operand widths {} and {} differ", a.width, bw.width)));
            }
            if bw.subarray != a.subarray {
                return Err(Error::Placement("add operands must share a sub-array".into()));
            }
        }
        if cols.len() != ncols {
            return Err(Error::Shape(format!("column mask needs {ncols} bits")));
        }
        let sid = a.subarray;
        let (carry, init0, init1) = {
            let l = self.subarray(sid)?.layout();
            (l.carry_rows[0], l.init0_row, l.init1_row)
        };
        if self.subarray(sid)?.peek_row(carry)?.and(cols).any() {
            return Err(Error::State("carry row is not zeroed".into()));
        }
        let width = a.width;
        let b_rows: Vec<usize> = match b {
            Addend::Word(bw) => bw.row_range().collect(),
            Addend::Const(c) => {
                (0..width).map(|i| if i < 64 && (c >> i) & 1 == 1 { init1 } else { init0 }).collect()
            }
        };
        self.instr(&[sid], |m| {
            let zeros = Bits::zeros(ncols);
            let mut overflow = Bits::zeros(ncols);
            for (i, &b_row) in b_rows.iter().enumerate() {
                let sub = m.sub_mut(sid)?;
                let fa = sub.full_add_cycle([a.lsb_row + i, b_row, carry])?;
                sub.write_row_masked(out.lsb_row + i, &fa.sum, cols)?;
                if i + 1 < width {
                    sub.write_row_masked(carry, &fa.carry, cols)?;
                } else {
                    // The final carry leaves through the sense amplifier; the
                    // carry row is cleared for the next instruction.
                    sub.write_row_masked(carry, &zeros, cols)?;
                    overflow = fa.carry.and(cols);
                }
            }
            Ok(overflow)
        })
    }

    /// Adds two vertical words of the same column.
    pub fn add(&mut self, a: VerticalWordRef, b: VerticalWordRef, out: VerticalWordRef) -> Result<bool> {
        if a.subarray != b.subarray || a.subarray != out.subarray {
            return Err(Error::Placement("add operands must share a sub-array".into()));
        }
        if a.col != b.col || a.col != out.col {
            return Err(Error::Placement("add operands must share a column".into()));
        }
        if a.width != b.width || a.width != out.width {
            return Err(Error::Shape("add operands must share a width".into()));
        }
        let mask = self.column_mask(a.col)?;
        let ov = self.add_columns(a.rows(), Addend::Word(b.rows()), out.rows(), &mask)?;
        Ok(ov.get(a.col))
    }

    /// `ctr += delta` modulo 2^width, in place.
    pub fn add_const(&mut self, ctr: VerticalWordRef, delta: i64) -> Result<bool> {
        let mask = self.column_mask(ctr.col)?;
        let ov = self.add_columns(ctr.rows(), Addend::Const(delta), ctr.rows(), &mask)?;
        Ok(ov.get(ctr.col))
    }

    pub fn increment(&mut self, ctr: VerticalWordRef) -> Result<bool> {
        self.add_const(ctr, 1)
    }

    fn column_mask(&self, col: usize) -> Result<Bits> {
        if col >= self.geometry.cols {
            return Err(Error::Address(format!("column {col} out of bounds")));
        }
        let mut m = Bits::zeros(self.geometry.cols);
        m.set(col, true);
        Ok(m)
    }

    /// Writes one value per listed column into the vertical word rows; one
    /// write cycle per bit row.
    pub fn write_vertical(&mut self, word: WordRows, values: &[(usize, u64)]) -> Result<()> {
        self.check_word(&word)?;
        let ncols = self.geometry.cols;
        let mut mask = Bits::zeros(ncols);
        for &(c, _) in values {
            if c >= ncols {
                return Err(Error::Address(format!("column {c} out of bounds")));
            }
            mask.set(c, true);
        }
        if values.is_empty() {
            return Ok(());
        }
        let sid = word.subarray;
        self.instr(&[sid], |m| {
            for i in 0..word.width {
                let mut row = Bits::zeros(ncols);
                for &(c, v) in values {
                    row.set(c, i < 64 && (v >> i) & 1 == 1);
                }
                m.sub_mut(sid)?.write_row_masked(word.lsb_row + i, &row, &mask)?;
            }
            Ok(())
        })
    }

    /// Reads a vertical word back for every column; one read per bit row.
    pub fn read_vertical(&mut self, word: WordRows) -> Result<Vec<u64>> {
        self.check_word(&word)?;
        if word.width > 64 {
            return Err(Error::Shape("vertical reads return at most 64-bit words".into()));
        }
        let ncols = self.geometry.cols;
        let sid = word.subarray;
        self.instr(&[sid], |m| {
            let mut vals = vec![0u64; ncols];
            for i in 0..word.width {
                let row = m.sub_mut(sid)?.read_row(word.lsb_row + i)?;
                for c in row.iter_ones() {
                    vals[c] |= 1 << i;
                }
            }
            Ok(vals)
        })
    }

    /// Cost-free inspection of a vertical word (tests and assertions).
    pub fn peek_vertical(&self, w: VerticalWordRef) -> Result<u64> {
        let sub = self.subarray(w.subarray)?;
        let mut v = 0u64;
        for i in 0..w.width.min(64) {
            if sub.peek_row(w.lsb_row + i)?.get(w.col) {
                v |= 1 << i;
            }
        }
        Ok(v)
    }

    pub fn dpu_and_reduce(&mut self, mask: &Bits) -> Result<bool> {
        if mask.is_empty() {
            return Err(Error::Shape("cannot reduce an empty mask".into()));
        }
        self.instr(&[], |m| {
            m.tally(EventKind::Dpu, 1);
            Ok(mask.all())
        })
    }

    /// Column-wise AND over a stack of row masks.
    pub fn dpu_column_and(&mut self, rows: &[Bits]) -> Result<Bits> {
        let first = rows.first().ok_or_else(|| Error::Shape("cannot reduce an empty mask".into()))?;
        let mut acc = first.clone();
        for r in &rows[1..] {
            if r.len() != acc.len() {
                return Err(Error::Shape("mask rows differ in length".into()));
            }
            acc = acc.and(r);
        }
        self.instr(&[], |m| {
            m.tally(EventKind::Dpu, 1);
            Ok(acc)
        })
    }

    pub fn dpu_scalar(&mut self, op: DpuOp, x: i64, y: i64) -> Result<DpuValue> {
        let fits = |v: i64| (-(1i64 << 31)..(1i64 << 32)).contains(&v);
        if !fits(x) || !fits(y) {
            return Err(Error::Range(format!("DPU operands {x}, {y} exceed 32 bits")));
        }
        self.instr(&[], |m| {
            m.tally(EventKind::Dpu, 1);
            Ok(match op {
                DpuOp::CompareEq => DpuValue::Bool(x == y),
                DpuOp::CompareGt => DpuValue::Bool(x > y),
                DpuOp::AddSmall => DpuValue::Int(x + y),
            })
        })
    }

    /// Charges `ops` DPU operations for controller-side work such as graph
    /// traversals.
    pub fn dpu_work(&mut self, ops: u64) {
        self.trace.push(EventKind::Dpu, ops, self.stage);
    }

    /// Charges a data movement of `bytes` tagged with `stage`.
    pub fn transfer(&mut self, bytes: u64, stage: Stage) {
        self.trace.push(EventKind::Xfer, bytes, stage);
    }

    /// Fault-injection hook: applies to existing and future sub-arrays.
    pub fn set_thresholds(&mut self, t: SenseThresholds) {
        self.thresholds = t;
        for s in &mut self.subarrays {
            s.set_thresholds(t);
        }
    }
}
