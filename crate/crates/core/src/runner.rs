// SPDX-License-Identifier: Apache-2.0

//! Run descriptions and the end-to-end drivers behind the command line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::assembly::{assemble, Assembly, AssemblyConfig, GraphConfig, HashConfig, Multiplicity};
use crate::error::{Error, Result};
use crate::fabric::{Logic2, SenseConfig, SenseThresholds, SubArray};
use crate::isa::{Geometry, Machine};
use crate::perf::{account_pd, CostConfig, StageReport};
use crate::seq::{encode_records, parse_reads, write_fasta, EncodedSeq};
use crate::trace::OpTrace;
use crate::Bits;

pub const MAX_K: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub inputs: Vec<PathBuf>,
    pub k: usize,
    pub geometry: Geometry,
    pub pd: u32,
    pub cost_config: Option<PathBuf>,
    pub seed: u64,
    pub simplify: bool,
    /// Fail on components without an Euler path instead of emitting greedy
    /// walks.
    pub strict: bool,
    pub out: PathBuf,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            inputs: Vec::new(),
            k: 25,
            geometry: Geometry::default(),
            pd: 1,
            cost_config: None,
            seed: 0,
            simplify: false,
            strict: false,
            out: PathBuf::from("out"),
        }
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_K).contains(&self.k) {
            return Err(Error::Config(format!("k = {} outside [2, {MAX_K}]", self.k)));
        }
        if self.pd == 0 {
            return Err(Error::Config("parallelism degree must be at least 1".into()));
        }
        Ok(())
    }

    pub fn assembly_config(&self) -> AssemblyConfig {
        AssemblyConfig {
            k: self.k,
            simplify: self.simplify,
            multiplicity: Multiplicity::Auto,
            strict: self.strict,
            hash: HashConfig { seed: self.seed, ..HashConfig::default() },
            graph: GraphConfig { seed: self.seed, ..GraphConfig::default() },
        }
    }

    pub fn cost(&self) -> Result<CostConfig> {
        match &self.cost_config {
            Some(p) => CostConfig::load(p),
            None => Ok(CostConfig::default()),
        }
    }
}

pub struct RunOutput {
    pub assembly: Assembly,
    pub trace: OpTrace,
    pub report: StageReport,
}

pub fn load_reads(paths: &[PathBuf]) -> Result<Vec<EncodedSeq>> {
    let mut reads = Vec::new();
    for p in paths {
        let text = fs::read_to_string(p)?;
        let records = parse_reads(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", p.display())),
            e => e,
        })?;
        reads.extend(encode_records(&records));
    }
    Ok(reads)
}

/// Assembles `reads` on a fresh machine and prices the trace.
pub fn run_reads(spec: &RunSpec, reads: &[EncodedSeq]) -> Result<RunOutput> {
    spec.validate()?;
    let cost = spec.cost()?;
    let mut m = Machine::new(spec.geometry)?;
    let assembly = assemble(&mut m, reads, &spec.assembly_config())?;
    let trace = m.take_trace();
    let report = account_pd(&trace, &cost, spec.pd)?;
    Ok(RunOutput { assembly, trace, report })
}

pub fn contig_records(contigs: &[EncodedSeq]) -> Vec<(String, String)> {
    contigs
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("contig_{} len={}", i + 1, c.len()), c.to_ascii()))
        .collect()
}

pub fn write_contigs(path: &Path, contigs: &[EncodedSeq]) -> Result<()> {
    let mut buf = Vec::new();
    write_fasta(&mut buf, &contig_records(contigs))?;
    fs::write(path, buf)?;
    Ok(())
}

/// Which optional artifacts `write_run` emits next to contigs and report.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub report: Option<PathBuf>,
    pub trace: bool,
    pub kmers: bool,
    pub edges: bool,
}

pub fn write_run(out: &Path, run: &RunOutput, art: &Artifacts) -> Result<()> {
    fs::create_dir_all(out)?;
    write_contigs(&out.join("contigs.fa"), &run.assembly.contigs)?;
    let report = art.report.clone().unwrap_or_else(|| out.join("report.json"));
    fs::write(report, run.report.to_json() + "\n")?;
    if art.trace {
        fs::write(out.join("trace.tsv"), run.trace.to_lines())?;
    }
    if art.kmers {
        fs::write(out.join("kmers.tsv"), run.assembly.table.dump_tsv())?;
    }
    if art.edges {
        fs::write(out.join("edges.tsv"), run.assembly.graph.dump_tsv())?;
    }
    Ok(())
}

fn bit(v: bool) -> u8 {
    v as u8
}

/// Runs every legal sense setting over all eight input patterns and every
/// two-input function over its four patterns, and checks each output
/// against plain boolean logic. Returns the listing and the number of
/// mismatches.
pub fn truth_table(th: SenseThresholds) -> Result<(String, usize)> {
    let mut sa = SubArray::new(32, 8)?;
    sa.set_thresholds(th);
    for r in 0..3 {
        sa.write_row(r, &Bits::from_bools((0..8).map(|p| p >> (2 - r) & 1 == 1)))?;
    }
    let mut s = String::new();
    let mut bad = 0;
    let mut check = |s: &mut String, name: &str, got: Option<&Bits>, want: &dyn Fn(bool, bool, bool) -> bool| {
        let Some(got) = got else { return };
        for p in 0..8 {
            let (a, b, c) = (p & 4 != 0, p & 2 != 0, p & 1 != 0);
            let w = want(a, b, c);
            let ok = got.get(p) == w;
            bad += usize::from(!ok);
            let _ = writeln!(
                s,
                "{name:<6} {} {} {} -> {}{}",
                bit(a),
                bit(b),
                bit(c),
                bit(got.get(p)),
                if ok { "" } else { "  MISMATCH" }
            );
        }
    };
    for cfg in SenseConfig::LEGAL {
        let _ = writeln!(
            s,
            "# {} (C_AND3={} C_MAJ={} C_OR3={} C_M={})",
            cfg.name(),
            bit(cfg.c_and3),
            bit(cfg.c_maj),
            bit(cfg.c_or3),
            bit(cfg.c_m)
        );
        if cfg == SenseConfig::READ {
            let row = sa.read_row(0)?;
            check(&mut s, "READ", Some(&row), &|a, _, _| a);
            continue;
        }
        let out = sa.activate([0, 1, 2], cfg)?;
        check(&mut s, "OR3", out.or3.as_ref(), &|a, b, c| a | b | c);
        check(&mut s, "NOR3", out.nor3().as_ref(), &|a, b, c| !(a | b | c));
        check(&mut s, "MAJ", out.maj.as_ref(), &|a, b, c| (a & b) | (a & c) | (b & c));
        check(&mut s, "MIN", out.min().as_ref(), &|a, b, c| !((a & b) | (a & c) | (b & c)));
        check(&mut s, "AND3", out.and3.as_ref(), &|a, b, c| a & b & c);
        check(&mut s, "NAND3", out.nand3().as_ref(), &|a, b, c| !(a & b & c));
        check(&mut s, "XOR3", out.xor3.as_ref(), &|a, b, c| a ^ b ^ c);
    }
    let _ = writeln!(s, "# two-input functions through init rows");
    for op in Logic2::ALL {
        let got = sa.activate2(1, 2, op)?;
        for p in 0..4usize {
            // Columns 0..4 hold a = 0 in row 0, so rows 1 and 2 give the pairs.
            let (a, b) = (p & 2 != 0, p & 1 != 0);
            let w = match op {
                Logic2::And2 => a & b,
                Logic2::Nand2 => !(a & b),
                Logic2::Or2 => a | b,
                Logic2::Nor2 => !(a | b),
                Logic2::Xor2 => a ^ b,
                Logic2::Xnor2 => !(a ^ b),
            };
            let ok = got.get(p) == w;
            bad += usize::from(!ok);
            let _ = writeln!(
                s,
                "{:<6} {} {} -> {}{}",
                format!("{op:?}").to_uppercase(),
                bit(a),
                bit(b),
                bit(got.get(p)),
                if ok { "" } else { "  MISMATCH" }
            );
        }
    }
    let _ = writeln!(s, "{bad} mismatch(es)");
    Ok((s, bad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stock_table_is_clean() {
        let (text, bad) = truth_table(SenseThresholds::default()).unwrap();
        assert_eq!(bad, 0, "{text}");
        let sections: Vec<&str> = text.split("\n# ").collect();
        let and3 = sections.iter().find(|s| s.starts_with("AND3 ")).unwrap();
        assert_eq!(and3.lines().count(), 1 + 8 * 2);
    }

    #[test]
    fn raised_majority_threshold_is_caught() {
        let (_, bad) = truth_table(SenseThresholds { maj: 3, ..Default::default() }).unwrap();
        assert!(bad > 0);
    }

    #[test]
    fn spec_bounds() {
        assert!(RunSpec { k: 1, ..Default::default() }.validate().is_err());
        assert!(RunSpec { k: 129, ..Default::default() }.validate().is_err());
        assert!(RunSpec { pd: 0, ..Default::default() }.validate().is_err());
        assert!(RunSpec::default().validate().is_ok());
    }
}
