// SPDX-License-Identifier: Apache-2.0

//! Reads to contigs: counting, graph construction, optional chain
//! simplification, degree pass and one Euler walk per weakly connected
//! component.

use log::warn;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::isa::{Machine, Source};
use crate::seq::EncodedSeq;
use crate::trace::Stage;

use super::euler::{contigs_from_path, degree_pass, Traversal};
use super::graph::{debruijn_build, simplify, GraphConfig, SparseGraph, MULT_BITS};
use super::hashmap::{hashmap_build, HashConfig, KmerTable};

/// How many times the traversal consumes each k-mer edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Multiplicity {
    /// Once per counted occurrence.
    Frequency,
    /// Once per distinct k-mer.
    Distinct,
    /// Frequency where a component has an Euler path under it, otherwise
    /// distinct. Overlapping reads inflate counts unevenly near sequence
    /// ends, which breaks degree balance under frequency weights.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyConfig {
    pub k: usize,
    pub simplify: bool,
    pub multiplicity: Multiplicity,
    /// Fail on components without an Euler path instead of emitting
    /// greedy walks.
    pub strict: bool,
    pub hash: HashConfig,
    pub graph: GraphConfig,
}

impl AssemblyConfig {
    pub fn new(k: usize) -> Self {
        AssemblyConfig { k, simplify: false, multiplicity: Multiplicity::Auto, strict: true, hash: HashConfig::default(), graph: GraphConfig::default() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Assembly {
    pub contigs: Vec<EncodedSeq>,
    pub table: KmerTable,
    /// Graph as built, multiplicities equal to k-mer frequencies.
    pub graph: SparseGraph,
    /// Graph the walks consumed, after reweighting and simplification.
    pub traversed: SparseGraph,
    pub warnings: Vec<String>,
}

fn note(warnings: &mut Vec<String>, msg: String) {
    warn!("{msg}");
    warnings.push(msg);
}

/// Runs the full pipeline on the machine; the machine trace records every
/// stage.
pub fn assemble(m: &mut Machine, reads: &[EncodedSeq], cfg: &AssemblyConfig) -> Result<Assembly> {
    let k = cfg.k;
    let table = hashmap_build(m, reads, k, &cfg.hash)?;
    let mut out = Assembly { table: KmerTable::new(k), ..Default::default() };
    if table.saturated > 0 {
        note(&mut out.warnings, format!("{} frequency counter update(s) saturated", table.saturated));
    }
    if table.is_empty() {
        out.table = table;
        return Ok(out);
    }
    let mut g = debruijn_build(m, &table, &cfg.graph)?;
    out.graph = g.clone();
    let reweighted = reweight(m, &mut g, cfg.multiplicity)?;
    if reweighted > 0 {
        note(&mut out.warnings, format!("{reweighted} component(s) traversed once per distinct k-mer"));
    }
    if cfg.simplify {
        m.set_stage(Stage::Graph);
        m.dpu_work((g.node_count() + g.edges().len()) as u64);
        g = simplify(&g);
    }
    let dt = degree_pass(m, &g)?;
    m.set_stage(Stage::Traverse);
    let in_adj = g.in_adjacency();
    let mut walk = Traversal::new(&g, &dt)?;
    let mut contigs = Vec::new();
    for (ci, (comp, members)) in g.components().into_iter().enumerate() {
        let mut left = comp.total_mult();
        m.dpu_work(comp.edges().len() as u64);
        match dt.choose_start(&members) {
            Ok(start) => {
                let path = walk.walk(m, start, left, false)?;
                left -= (path.len() - 1) as u64;
                contigs.push(spell(&g, &path, k)?);
                if left > 0 {
                    let msg = format!("component {ci}: walk stuck with {left} edge(s) left");
                    if cfg.strict {
                        return Err(Error::Disconnected(msg));
                    }
                    note(&mut out.warnings, msg);
                }
            }
            Err(e @ Error::NonEulerian(_)) => {
                if cfg.strict {
                    return Err(e);
                }
                note(&mut out.warnings, format!("component {ci}: {e}; emitting greedy walks"));
            }
            Err(e) => return Err(e),
        }
        while left > 0 {
            let start = members
                .iter()
                .copied()
                .find(|&v| walk.out_remaining(v) > walk.in_remaining(v, &in_adj))
                .or_else(|| members.iter().copied().find(|&v| walk.out_remaining(v) > 0))
                .expect("edges remain in the component");
            m.dpu_work(members.len() as u64);
            let path = walk.walk(m, start, left, false)?;
            left -= (path.len() - 1) as u64;
            contigs.push(spell(&g, &path, k)?);
        }
    }
    walk.finish(m)?;
    for c in &contigs {
        m.transfer(c.bit_len().div_ceil(8) as u64, Stage::Io);
    }
    m.set_stage(Stage::Other);
    out.contigs = contigs;
    out.table = table;
    out.traversed = g;
    Ok(out)
}

/// Rewrites the stored multiplicity of every edge to 1 in the components
/// selected by `mode`. Returns the number of components rewritten.
fn reweight(m: &mut Machine, g: &mut SparseGraph, mode: Multiplicity) -> Result<usize> {
    let comps = g.components();
    let pick: Vec<bool> = match mode {
        Multiplicity::Frequency => return Ok(0),
        Multiplicity::Distinct => vec![true; comps.len()],
        Multiplicity::Auto => {
            let dt = degree_pass(m, g)?;
            m.set_stage(Stage::Traverse);
            m.dpu_work(g.node_count() as u64);
            comps.iter().map(|(_, members)| dt.choose_start(members).is_err()).collect()
        }
    };
    let mut comp_of = vec![usize::MAX; g.node_count()];
    for (c, (_, members)) in comps.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    m.set_stage(Stage::Graph);
    let one = Bits::from_u64(1, MULT_BITS);
    for i in 0..g.edges().len() {
        let e = g.edges()[i];
        if !pick[comp_of[e.src]] || e.mult == 1 {
            continue;
        }
        if let Some(slots) = g.slots() {
            let addr = slots[i].mult_addr();
            m.mem_insert(addr, Source::Imm(&one), MULT_BITS)?;
        }
        g.set_mult(i, 1);
    }
    Ok(pick.iter().filter(|&&p| p).count())
}

fn spell(g: &SparseGraph, path: &[usize], k: usize) -> Result<EncodedSeq> {
    let labels: Vec<&EncodedSeq> = path.iter().map(|&v| &g.labels()[v]).collect();
    contigs_from_path(&labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::Geometry;

    fn run(reads: &[&str], k: usize, simplify: bool) -> Assembly {
        let mut m = Machine::new(Geometry::default()).unwrap();
        let reads: Vec<EncodedSeq> = reads.iter().map(|r| r.parse().unwrap()).collect();
        let cfg = AssemblyConfig { simplify, ..AssemblyConfig::new(k) };
        assemble(&mut m, &reads, &cfg).unwrap()
    }

    #[test]
    fn tiled_reads_round_trip() {
        for simplify in [false, true] {
            let a = run(&["CGTGTG", "GTGTGC", "TGTGCA"], 5, simplify);
            assert_eq!(a.contigs.len(), 1);
            assert_eq!(a.contigs[0].to_ascii(), "CGTGTGCA");
        }
    }

    #[test]
    fn fabric_degrees_match_host() {
        let mut m = Machine::new(Geometry::default()).unwrap();
        let reads: Vec<EncodedSeq> = ["CGTGTGCA"].iter().map(|r| r.parse().unwrap()).collect();
        let t = hashmap_build(&mut m, &reads, 5, &HashConfig::default()).unwrap();
        let g = debruijn_build(&mut m, &t, &GraphConfig::default()).unwrap();
        let dt = degree_pass(&mut m, &g).unwrap();
        let host = super::super::euler::DegreeTable::from_graph(&g);
        assert_eq!(dt.out_degree, host.out_degree);
        assert_eq!(dt.in_degree, host.in_degree);
        assert_eq!(dt.start_like, host.start_like);
        assert_eq!(dt.end_like, host.end_like);
    }

    #[test]
    fn empty_input() {
        assert!(run(&[], 5, false).contigs.is_empty());
        assert!(run(&["ACG"], 5, false).contigs.is_empty());
    }

    #[test]
    fn separate_components_give_separate_contigs() {
        let a = run(&["AAACCCGGG", "TTTGTTTAT"], 4, false);
        assert_eq!(a.contigs.len(), 2);
    }

    #[test]
    fn non_eulerian_is_strict_error_or_greedy() {
        // A fork: ACGT and ACGA share the prefix ACG.
        let reads: Vec<EncodedSeq> = ["ACGT", "ACGA"].iter().map(|r| r.parse().unwrap()).collect();
        let mut m = Machine::new(Geometry::default()).unwrap();
        let err = assemble(&mut m, &reads, &AssemblyConfig::new(3)).unwrap_err();
        assert!(matches!(err, Error::NonEulerian(_)));
        let mut m = Machine::new(Geometry::default()).unwrap();
        let cfg = AssemblyConfig { strict: false, ..AssemblyConfig::new(3) };
        let a = assemble(&mut m, &reads, &cfg).unwrap();
        assert_eq!(a.contigs.len(), 2);
        assert!(!a.warnings.is_empty());
    }
}
