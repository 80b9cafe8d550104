// SPDX-License-Identifier: Apache-2.0

//! Bit-level model of a computational SOT-MRAM sub-array.
//!
//! A cell stores `1` as the anti-parallel (high resistance) state and `0` as
//! the parallel state. Reads sense one row against the memory reference.
//! Compute sensing activates exactly three rows and compares the combined
//! bit-line signal against the OR3/MAJ/AND3 references, which reduces to
//! thresholding the number of `1` cells in each column. Sensing never
//! disturbs the stored state.

use std::ops::Range;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::trace::{EventKind, OpTrace, Stage};

pub const DEFAULT_ROWS: usize = 1024;
pub const DEFAULT_COLS: usize = 256;

/// Positions of the reserved rows inside a sub-array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowLayout {
    pub init0_row: usize,
    pub init1_row: usize,
    pub carry_rows: Vec<usize>,
    pub temp_rows: Vec<usize>,
    pub resv_rows: Vec<usize>,
    pub data_region: Range<usize>,
}

impl RowLayout {
    /// Number of rows reserved at the top of a full-size sub-array:
    /// 2 temp, 2 init, 2 carry and 6 reserved.
    pub const STANDARD_SPECIAL_ROWS: usize = 12;

    /// Reserved rows packed at the top of the array. Arrays with fewer than
    /// 32 rows get a compact layout with only init and carry rows.
    pub fn standard(rows: usize) -> RowLayout {
        if rows >= 32 {
            let base = rows - Self::STANDARD_SPECIAL_ROWS;
            RowLayout {
                temp_rows: vec![base, base + 1],
                init0_row: base + 2,
                init1_row: base + 3,
                carry_rows: vec![base + 4, base + 5],
                resv_rows: (base + 6..rows).collect(),
                data_region: 0..base,
            }
        } else {
            let base = rows.saturating_sub(4);
            RowLayout {
                temp_rows: vec![],
                init0_row: base,
                init1_row: base + 1,
                carry_rows: vec![base + 2, base + 3],
                resv_rows: vec![],
                data_region: 0..base,
            }
        }
    }

    pub fn special_rows(&self) -> Vec<usize> {
        let mut v = vec![self.init0_row, self.init1_row];
        v.extend(&self.carry_rows);
        v.extend(&self.temp_rows);
        v.extend(&self.resv_rows);
        v
    }

    pub fn is_init_row(&self, row: usize) -> bool {
        row == self.init0_row || row == self.init1_row
    }

    pub fn validate(&self, rows: usize) -> Result<()> {
        let special = self.special_rows();
        if self.carry_rows.len() < 2 {
            return Err(Error::Config("layout needs at least two carry rows".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &r in &special {
            if r >= rows {
                return Err(Error::Config(format!("special row {r} outside {rows} rows")));
            }
            if !seen.insert(r) {
                return Err(Error::Config(format!("special row {r} assigned twice")));
            }
            if self.data_region.contains(&r) {
                return Err(Error::Config(format!("special row {r} inside data region")));
            }
        }
        if self.data_region.end > rows {
            return Err(Error::Config("data region exceeds array".into()));
        }
        Ok(())
    }
}

/// The four enable bits of the reconfigurable sense amplifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SenseConfig {
    pub c_and3: bool,
    pub c_maj: bool,
    pub c_or3: bool,
    pub c_m: bool,
}

impl SenseConfig {
    pub const READ: SenseConfig = SenseConfig::bits(false, false, false, true);
    pub const AND3: SenseConfig = SenseConfig::bits(true, false, false, false);
    pub const OR3: SenseConfig = SenseConfig::bits(false, false, true, false);
    pub const MAJ: SenseConfig = SenseConfig::bits(false, true, false, false);
    /// XOR3 (sum) and X(N)OR2 share this setting.
    pub const XOR3: SenseConfig = SenseConfig::bits(true, true, true, false);

    /// All legal settings, read first.
    pub const LEGAL: [SenseConfig; 5] =
        [SenseConfig::READ, SenseConfig::AND3, SenseConfig::OR3, SenseConfig::MAJ, SenseConfig::XOR3];

    pub const fn bits(c_and3: bool, c_maj: bool, c_or3: bool, c_m: bool) -> SenseConfig {
        SenseConfig { c_and3, c_maj, c_or3, c_m }
    }

    pub fn is_legal(&self) -> bool {
        Self::LEGAL.contains(self)
    }

    pub fn name(&self) -> &'static str {
        match *self {
            SenseConfig::READ => "READ",
            SenseConfig::AND3 => "AND3",
            SenseConfig::OR3 => "OR3",
            SenseConfig::MAJ => "MAJ",
            SenseConfig::XOR3 => "XOR3",
            _ => "ILLEGAL",
        }
    }

    /// Cost class of one activation under this setting.
    pub fn cost_class(&self) -> EventKind {
        match *self {
            SenseConfig::READ => EventKind::R,
            SenseConfig::XOR3 => EventKind::CAdd,
            _ => EventKind::CAnd3,
        }
    }
}

/// Reference thresholds, expressed as the minimum number of `1` cells in a
/// column for the sub-SA to output `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SenseThresholds {
    pub read: u8,
    pub or3: u8,
    pub maj: u8,
    pub and3: u8,
}

impl Default for SenseThresholds {
    fn default() -> Self {
        SenseThresholds { read: 1, or3: 1, maj: 2, and3: 3 }
    }
}

/// Per-column sense outputs. Only the sub-SAs enabled by the configuration
/// drive an output; the rest are `None`. Complements come from the
/// differential outputs of the same sub-SA.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SenseOutput {
    pub or3: Option<Bits>,
    pub maj: Option<Bits>,
    pub and3: Option<Bits>,
    pub xor3: Option<Bits>,
    pub read: Option<Bits>,
}

impl SenseOutput {
    pub fn nor3(&self) -> Option<Bits> {
        self.or3.as_ref().map(Bits::not)
    }

    pub fn min(&self) -> Option<Bits> {
        self.maj.as_ref().map(Bits::not)
    }

    pub fn nand3(&self) -> Option<Bits> {
        self.and3.as_ref().map(Bits::not)
    }
}

/// Two-input functions built from a 3-row activation plus one init row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Logic2 {
    And2,
    Nand2,
    Or2,
    Nor2,
    Xor2,
    Xnor2,
}

impl Logic2 {
    pub const ALL: [Logic2; 6] = [Logic2::And2, Logic2::Nand2, Logic2::Or2, Logic2::Nor2, Logic2::Xor2, Logic2::Xnor2];

    /// (sense setting, value of the init row used as third operand)
    pub fn routing(self) -> (SenseConfig, bool) {
        match self {
            Logic2::And2 | Logic2::Nand2 => (SenseConfig::AND3, true),
            Logic2::Or2 | Logic2::Nor2 => (SenseConfig::OR3, false),
            Logic2::Xor2 => (SenseConfig::XOR3, false),
            Logic2::Xnor2 => (SenseConfig::XOR3, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullAdd {
    pub sum: Bits,
    pub carry: Bits,
}

#[derive(Debug, Clone)]
pub struct SubArray {
    rows: usize,
    cols: usize,
    cells: Vec<Bits>,
    layout: RowLayout,
    thresholds: SenseThresholds,
    trace: OpTrace,
}

#[inline]
fn at_least(t: u8, a: &Bits, b: &Bits, c: &Bits) -> Bits {
    a.zip3(b, c, |x, y, z| match t {
        0 => !0,
        1 => x | y | z,
        2 => (x & y) | (x & z) | (y & z),
        3 => x & y & z,
        _ => 0,
    })
}

impl SubArray {
    pub fn new(rows: usize, cols: usize) -> Result<SubArray> {
        Self::with_layout(rows, cols, RowLayout::standard(rows))
    }

    pub fn with_layout(rows: usize, cols: usize, layout: RowLayout) -> Result<SubArray> {
        if rows < 8 || cols < 1 {
            return Err(Error::Config(format!("sub-array must be at least 8x1, got {rows}x{cols}")));
        }
        layout.validate(rows)?;
        let mut cells = vec![Bits::zeros(cols); rows];
        cells[layout.init1_row] = Bits::ones(cols);
        Ok(SubArray { rows, cols, cells, layout, thresholds: SenseThresholds::default(), trace: OpTrace::new() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn layout(&self) -> &RowLayout {
        &self.layout
    }

    pub fn trace(&self) -> &OpTrace {
        &self.trace
    }

    pub fn take_trace(&mut self) -> OpTrace {
        self.trace.take()
    }

    /// Fault-injection hook used by the truth-table self-check.
    pub fn set_thresholds(&mut self, t: SenseThresholds) {
        self.thresholds = t;
    }

    fn check_row(&self, row: usize) -> Result<()> {
        if row >= self.rows {
            return Err(Error::Address(format!("row {row} out of bounds ({} rows)", self.rows)));
        }
        Ok(())
    }

    fn check_writable(&self, row: usize) -> Result<()> {
        self.check_row(row)?;
        if self.layout.is_init_row(row) {
            return Err(Error::Protection { row });
        }
        Ok(())
    }

    pub fn write_cell(&mut self, row: usize, col: usize, value: bool) -> Result<()> {
        self.check_writable(row)?;
        if col >= self.cols {
            return Err(Error::Address(format!("column {col} out of bounds ({} cols)", self.cols)));
        }
        self.cells[row].set(col, value);
        self.trace.push(EventKind::W, 1, Stage::Other);
        Ok(())
    }

    /// Writes the bits of `value` wherever `mask` is set; one write cycle.
    pub fn write_row_masked(&mut self, row: usize, value: &Bits, mask: &Bits) -> Result<()> {
        self.check_writable(row)?;
        if value.len() != self.cols || mask.len() != self.cols {
            return Err(Error::Shape(format!("row write needs {} bits", self.cols)));
        }
        self.cells[row] = self.cells[row].merge_masked(value, mask);
        self.trace.push(EventKind::W, 1, Stage::Other);
        Ok(())
    }

    pub fn write_row(&mut self, row: usize, value: &Bits) -> Result<()> {
        self.write_row_masked(row, value, &Bits::ones(self.cols))
    }

    pub fn read_row(&mut self, row: usize) -> Result<Bits> {
        self.check_row(row)?;
        let bits = &self.cells[row];
        let read = if self.thresholds.read <= 1 {
            if self.thresholds.read == 0 {
                Bits::ones(self.cols)
            } else {
                bits.clone()
            }
        } else {
            Bits::zeros(self.cols)
        };
        self.trace.push(EventKind::R, 1, Stage::Other);
        Ok(read)
    }

    /// Simultaneous activation of three rows.
    pub fn activate(&mut self, rows: [usize; 3], cfg: SenseConfig) -> Result<SenseOutput> {
        if !cfg.is_legal() || cfg == SenseConfig::READ {
            return Err(Error::Config(format!(
                "sense setting (C_AND3={}, C_MAJ={}, C_OR3={}, C_M={}) is not a compute mode",
                cfg.c_and3 as u8, cfg.c_maj as u8, cfg.c_or3 as u8, cfg.c_m as u8
            )));
        }
        for &r in &rows {
            self.check_row(r)?;
        }
        if rows[0] == rows[1] || rows[0] == rows[2] || rows[1] == rows[2] {
            return Err(Error::Address(format!("activated rows must be distinct: {rows:?}")));
        }
        let (a, b, c) = (&self.cells[rows[0]], &self.cells[rows[1]], &self.cells[rows[2]]);
        let th = self.thresholds;
        let mut out = SenseOutput::default();
        let or3 = cfg.c_or3.then(|| at_least(th.or3, a, b, c));
        let maj = cfg.c_maj.then(|| at_least(th.maj, a, b, c));
        let and3 = cfg.c_and3.then(|| at_least(th.and3, a, b, c));
        if let (Some(o), Some(m), Some(n)) = (&or3, &maj, &and3) {
            // Add-box multiplexer: OR3 when the carry is 0, AND3 when it is 1.
            out.xor3 = Some(o.zip3(m, n, |o, m, n| (!m & o) | (m & n)));
        }
        out.or3 = or3;
        out.maj = maj;
        out.and3 = and3;
        self.trace.push(cfg.cost_class(), 1, Stage::Other);
        Ok(out)
    }

    /// Two-input logic between rows `a` and `b`, routed through an init row.
    pub fn activate2(&mut self, a: usize, b: usize, op: Logic2) -> Result<Bits> {
        let (cfg, init_one) = op.routing();
        let init = if init_one { self.layout.init1_row } else { self.layout.init0_row };
        let out = self.activate([a, b, init], cfg)?;
        let pick = match op {
            Logic2::And2 => out.and3,
            Logic2::Nand2 => out.nand3(),
            Logic2::Or2 => out.or3,
            Logic2::Nor2 => out.nor3(),
            Logic2::Xor2 | Logic2::Xnor2 => out.xor3,
        };
        Ok(pick.expect("routing enables the selected sub-SA"))
    }

    /// One column-parallel full-adder step: carry from MAJ, sum from XOR3.
    pub fn full_add_cycle(&mut self, rows: [usize; 3]) -> Result<FullAdd> {
        let out = self.activate(rows, SenseConfig::XOR3)?;
        Ok(FullAdd {
            sum: out.xor3.expect("XOR3 setting drives sum"),
            carry: out.maj.expect("XOR3 setting drives MAJ"),
        })
    }

    /// Cost-free inspection of a row (debugging and precondition checks).
    pub fn peek_row(&self, row: usize) -> Result<&Bits> {
        self.check_row(row)?;
        Ok(&self.cells[row])
    }

    /// Rows as lines of `0`/`1` characters, row 0 first.
    pub fn dump(&self) -> String {
        let mut s = String::with_capacity(self.rows * (self.cols + 1));
        for row in &self.cells {
            s.push_str(&row.to_string());
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SubArray {
        SubArray::new(16, 8).unwrap()
    }

    #[test]
    fn store_load_identity_and_last_write_wins() {
        let mut s = small();
        s.write_cell(0, 0, true).unwrap();
        assert!(s.read_row(0).unwrap().get(0));
        s.write_cell(0, 0, false).unwrap();
        assert!(!s.read_row(0).unwrap().get(0));
    }

    #[test]
    fn full_row_write_is_one_event() {
        let mut s = SubArray::new(DEFAULT_ROWS, DEFAULT_COLS).unwrap();
        s.write_row(3, &Bits::ones(DEFAULT_COLS)).unwrap();
        assert_eq!(s.trace().total(EventKind::W), 1);
        assert_eq!(s.trace().events().len(), 1);
    }

    #[test]
    fn reads_emit_events_without_state_change() {
        let mut s = small();
        let pattern = Bits::from_str01("10101010").unwrap();
        s.write_row(2, &pattern).unwrap();
        let before = s.dump();
        assert_eq!(s.read_row(2).unwrap(), pattern);
        assert_eq!(s.read_row(2).unwrap(), pattern);
        assert_eq!(s.trace().total(EventKind::R), 2);
        assert_eq!(s.dump(), before);
        assert_eq!(s.read_row(5).unwrap(), Bits::zeros(8));
    }

    #[test]
    fn out_of_bounds_and_protection() {
        let mut s = small();
        assert!(matches!(s.write_cell(16, 0, true), Err(Error::Address(_))));
        assert!(matches!(s.write_cell(0, 8, true), Err(Error::Address(_))));
        assert!(matches!(s.read_row(99), Err(Error::Address(_))));
        let init = s.layout().init1_row;
        assert!(matches!(s.write_cell(init, 0, false), Err(Error::Protection { .. })));
        assert!(s.peek_row(init).unwrap().all());
    }

    #[test]
    fn illegal_config_and_duplicate_rows() {
        let mut s = small();
        let bad = SenseConfig::bits(true, true, false, false);
        assert!(matches!(s.activate([0, 1, 2], bad), Err(Error::Config(_))));
        assert!(matches!(s.activate([0, 1, 2], SenseConfig::READ), Err(Error::Config(_))));
        assert!(matches!(s.activate([0, 0, 2], SenseConfig::AND3), Err(Error::Address(_))));
    }

    #[test]
    fn truth_table_spot_checks() {
        let mut s = small();
        // column 0: (1,1,1); column 1: (0,1,1)
        s.write_row(0, &Bits::from_str01("10000000").unwrap()).unwrap();
        s.write_row(1, &Bits::from_str01("11000000").unwrap()).unwrap();
        s.write_row(2, &Bits::from_str01("11000000").unwrap()).unwrap();
        let out = s.activate([0, 1, 2], SenseConfig::XOR3).unwrap();
        let col = |b: &Option<Bits>, i| b.as_ref().unwrap().get(i);
        assert!(col(&out.and3, 0) && col(&out.or3, 0) && col(&out.maj, 0) && col(&out.xor3, 0));
        assert!(!col(&out.and3, 1) && col(&out.or3, 1) && col(&out.maj, 1) && !col(&out.xor3, 1));
    }

    #[test]
    fn single_sa_configs_only_drive_their_outputs() {
        let mut s = small();
        let out = s.activate([0, 1, 2], SenseConfig::AND3).unwrap();
        assert!(out.and3.is_some() && out.nand3().is_some());
        assert!(out.or3.is_none() && out.maj.is_none() && out.xor3.is_none());
        assert_eq!(s.trace().total(EventKind::CAnd3), 1);
    }

    #[test]
    fn xnor2_via_init_one_row() {
        let mut s = small();
        // columns hold (a,b) = (0,0),(0,1),(1,0),(1,1)
        s.write_row(0, &Bits::from_str01("00110000").unwrap()).unwrap();
        s.write_row(1, &Bits::from_str01("01010000").unwrap()).unwrap();
        let init1 = s.layout().init1_row;
        let out = s.activate([0, 1, init1], SenseConfig::XOR3).unwrap();
        let x = out.xor3.unwrap();
        assert_eq!(&x.to_string()[..4], "1001");
    }

    #[test]
    fn full_adder_example() {
        let mut s = small();
        s.write_cell(0, 0, true).unwrap();
        s.write_cell(2, 0, true).unwrap();
        let fa = s.full_add_cycle([0, 1, 2]).unwrap();
        assert!(!fa.sum.get(0));
        assert!(fa.carry.get(0));
        assert!(!fa.sum.get(1) && !fa.carry.get(1));
        assert_eq!(s.trace().total(EventKind::CAdd), 1);
    }

    #[test]
    fn dump_format() {
        let mut s = SubArray::new(8, 3).unwrap();
        s.write_cell(0, 1, true).unwrap();
        let d = s.dump();
        assert_eq!(d.lines().next().unwrap(), "010");
        assert_eq!(d.lines().count(), 8);
    }

    #[test]
    fn layout_too_small_rejected() {
        assert!(SubArray::new(4, 8).is_err());
        assert!(SubArray::new(8, 0).is_err());
    }
}
