// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use pimasm::fabric::SenseThresholds;
use pimasm::isa::Geometry;
use pimasm::perf::{calibrate, sweep_pd, CalibrationTarget};
use pimasm::runner::{load_reads, run_reads, truth_table, write_run, Artifacts, RunSpec};
use pimasm::seq::write_fasta;
use pimasm::workload::{distinct_window_genome, random_genome, sample_reads, tile_reads};
use pimasm::{Error, Result};

#[derive(Parser)]
#[command(name = "pimasm", version, about = "De Bruijn assembly on a simulated processing-in-MRAM fabric")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// JSON cost table; unknown keys are rejected.
    #[arg(long, global = true)]
    cost_config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1024)]
    rows: usize,
    #[arg(long, global = true, default_value_t = 256)]
    cols: usize,
    /// Parallelism degree (replicated sub-array groups).
    #[arg(long, global = true, default_value_t = 1)]
    pd: u32,
    #[arg(long, global = true, default_value_t = 25)]
    k: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Merge unbranched chains before traversal.
    #[arg(long, global = true)]
    simplify: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assemble FASTA/FASTQ reads into contigs.
    Assemble {
        inputs: Vec<PathBuf>,
        /// Report path (default: <out>/report.json).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the operation trace to <out>/trace.tsv.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        dump_kmers: bool,
        #[arg(long)]
        dump_edges: bool,
        /// Fail on components without an Euler path.
        #[arg(long)]
        strict: bool,
    },
    /// Generate a seeded genome and reads.
    Gen {
        #[arg(long, default_value_t = 10_000)]
        genome_len: usize,
        #[arg(long, default_value_t = 100)]
        read_len: usize,
        #[arg(long, conflicts_with = "coverage")]
        stride: Option<usize>,
        #[arg(long)]
        coverage: Option<f64>,
        /// Make every (k-1)-base window of the genome unique.
        #[arg(long)]
        distinct: bool,
    },
    /// Price runs over parallelism degrees and k values as CSV.
    Sweep {
        inputs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        pd_list: Vec<u32>,
        /// Defaults to --k.
        #[arg(long, value_delimiter = ',')]
        k_list: Vec<usize>,
    },
    /// Print and self-check the sense-amplifier truth tables.
    Truthtable {
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
    /// Fit parallel fraction and per-group leakage to the parallelism targets.
    Calibrate {
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 8)]
        pd_hi: u32,
        #[arg(long, default_value_t = 3.0)]
        speedup: f64,
        #[arg(long, default_value_t = 7.0)]
        power_ratio: f64,
        /// Config path (default: <out>/calibrated_cost.json).
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    Maj,
}

impl Global {
    fn spec(&self, inputs: Vec<PathBuf>) -> RunSpec {
        RunSpec {
            inputs,
            k: self.k,
            geometry: Geometry { rows: self.rows, cols: self.cols },
            pd: self.pd,
            cost_config: self.cost_config.clone(),
            seed: self.seed,
            simplify: self.simplify,
            strict: false,
            out: self.out.clone(),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.cmd {
        Cmd::Assemble { inputs, report, trace, dump_kmers, dump_edges, strict } => {
            let spec = RunSpec { strict, ..g.spec(inputs) };
            spec.validate()?;
            spec.cost()?;
            let reads = load_reads(&spec.inputs)?;
            info!("{} read(s) loaded", reads.len());
            let out = run_reads(&spec, &reads)?;
            write_run(&spec.out, &out, &Artifacts { report, trace, kmers: dump_kmers, edges: dump_edges })?;
            println!(
                "{} contig(s), {:.3} us, {:.3} W",
                out.assembly.contigs.len(),
                out.report.headline().latency_ns / 1000.0,
                out.report.headline().avg_power_w
            );
        }
        Cmd::Gen { genome_len, read_len, stride, coverage, distinct } => {
            let genome = if distinct {
                distinct_window_genome(genome_len, g.k.saturating_sub(1).max(1), g.seed)?
            } else {
                random_genome(genome_len, g.seed)
            };
            let reads = match coverage {
                Some(c) => sample_reads(&genome, read_len, c, g.seed.wrapping_add(1))?,
                None => tile_reads(&genome, read_len, stride.unwrap_or(1))?,
            };
            fs::create_dir_all(&g.out)?;
            let mut buf = Vec::new();
            write_fasta(&mut buf, &[(format!("genome len={genome_len} seed={}", g.seed), genome.to_ascii())])?;
            fs::write(g.out.join("genome.fa"), &buf)?;
            let recs: Vec<(String, String)> =
                reads.iter().enumerate().map(|(i, r)| (format!("read_{}", i + 1), r.to_ascii())).collect();
            buf.clear();
            write_fasta(&mut buf, &recs)?;
            fs::write(g.out.join("reads.fa"), &buf)?;
            println!("{} read(s)", reads.len());
        }
        Cmd::Sweep { inputs, pd_list, k_list } => {
            let spec = g.spec(inputs);
            let cost = spec.cost()?;
            let reads = load_reads(&spec.inputs)?;
            let ks = if k_list.is_empty() { vec![g.k] } else { k_list };
            let mut csv = String::from("k,pd,runtime_ns,avg_power_w,energy_nj\n");
            for k in ks {
                let run = run_reads(&RunSpec { k, pd: 1, ..spec.clone() }, &reads)?;
                for p in sweep_pd(&run.trace, &cost, &pd_list)?.points {
                    let _ = writeln!(csv, "{k},{},{},{},{}", p.pd, p.runtime_ns, p.avg_power_w, p.energy_nj);
                }
            }
            fs::create_dir_all(&g.out)?;
            fs::write(g.out.join("sweep.csv"), &csv)?;
            print!("{csv}");
        }
        Cmd::Truthtable { inject_fault } => {
            let th = match inject_fault {
                Some(Fault::Maj) => SenseThresholds { maj: 3, ..SenseThresholds::default() },
                None => SenseThresholds::default(),
            };
            let (text, bad) = truth_table(th)?;
            print!("{text}");
            if bad > 0 {
                return Err(Error::SelfCheck(format!("{bad} truth-table mismatch(es)")));
            }
        }
        Cmd::Calibrate { inputs, pd_hi, speedup, power_ratio, write } => {
            let spec = RunSpec { pd: 1, ..g.spec(inputs) };
            let base = spec.cost()?;
            let reads = load_reads(&spec.inputs)?;
            let run = run_reads(&spec, &reads)?;
            let cfg = calibrate(&run.trace, &base, CalibrationTarget { pd_hi, speedup, power_ratio })?;
            let path = write.unwrap_or_else(|| g.out.join("calibrated_cost.json"));
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(&path, cfg.to_json() + "\n")?;
            println!(
                "parallel_fraction {:.6}, leakage_per_group_mw {:.3} -> {}",
                cfg.parallel_fraction,
                cfg.leakage_per_group_mw,
                path.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
