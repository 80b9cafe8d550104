// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic genomes and read sets.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seq::EncodedSeq;

pub fn random_genome(len: usize, seed: u64) -> EncodedSeq {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EncodedSeq::from_codes((0..len).map(|_| rng.gen_range(0..4u8)).collect())
}

/// Random genome in which every window of `w` bases occurs once. Bases that
/// would repeat a window are redrawn; a dead end restarts the genome.
pub fn distinct_window_genome(len: usize, w: usize, seed: u64) -> Result<EncodedSeq> {
    if w == 0 {
        return Err(Error::Config("window length must be positive".into()));
    }
    let windows = (len + 1).saturating_sub(w) as f64;
    if windows > 4f64.powi(w.min(64) as i32) {
        return Err(Error::Config(format!("{len} bases cannot hold distinct {w}-base windows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..64 {
        let mut codes: Vec<u8> = Vec::with_capacity(len);
        let mut seen: HashSet<Vec<u8>> = HashSet::new();
        while codes.len() < len {
            let first = rng.gen_range(0..4u8);
            let mut placed = false;
            for d in 0..4u8 {
                codes.push((first + d) % 4);
                if codes.len() < w || seen.insert(codes[codes.len() - w..].to_vec()) {
                    placed = true;
                    break;
                }
                codes.pop();
            }
            if !placed {
                continue 'attempt;
            }
        }
        return Ok(EncodedSeq::from_codes(codes));
    }
    Err(Error::Config(format!("no {len}-base genome with distinct {w}-base windows found")))
}

/// Reads of `read_len` starting every `stride` bases. A final read ending at
/// the last base is added when the stride skips it, so every base is covered.
pub fn tile_reads(genome: &EncodedSeq, read_len: usize, stride: usize) -> Result<Vec<EncodedSeq>> {
    if read_len == 0 || stride == 0 {
        return Err(Error::Config("read length and stride must be positive".into()));
    }
    if genome.len() <= read_len {
        return Ok(if genome.is_empty() { Vec::new() } else { vec![genome.clone()] });
    }
    let last = genome.len() - read_len;
    let mut starts: Vec<usize> = (0..=last).step_by(stride).collect();
    if starts.last() != Some(&last) {
        starts.push(last);
    }
    Ok(starts.into_iter().map(|s| genome.sub(s, read_len)).collect())
}

/// `round(coverage * len / read_len)` reads at uniform random starts.
pub fn sample_reads(genome: &EncodedSeq, read_len: usize, coverage: f64, seed: u64) -> Result<Vec<EncodedSeq>> {
    if read_len == 0 || coverage < 0.0 || !coverage.is_finite() {
        return Err(Error::Config(format!("bad sampling parameters: read length {read_len}, coverage {coverage}")));
    }
    if genome.len() < read_len {
        return Err(Error::Config(format!("read length {read_len} exceeds genome length {}", genome.len())));
    }
    let n = (coverage * genome.len() as f64 / read_len as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = genome.len() - read_len;
    Ok((0..n).map(|_| genome.sub(rng.gen_range(0..=last), read_len)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiling_counts() {
        let g = random_genome(1000, 1);
        assert_eq!(tile_reads(&g, 100, 1).unwrap().len(), 901);
        let r = tile_reads(&g, 100, 40).unwrap();
        assert_eq!(r.last().unwrap(), &g.sub(900, 100));
        assert_eq!(r.len(), 24);
    }

    #[test]
    fn coverage_count() {
        let g = random_genome(10_000, 2);
        assert_eq!(sample_reads(&g, 100, 30.0, 3).unwrap().len(), 3000);
    }

    #[test]
    fn distinct_windows_hold() {
        let g = distinct_window_genome(2000, 6, 9).unwrap();
        let mut seen = HashSet::new();
        assert!(g.codes().windows(6).all(|w| seen.insert(w.to_vec())));
        assert!(distinct_window_genome(100, 2, 0).is_err());
    }

    #[test]
    fn seeded_is_deterministic() {
        assert_eq!(random_genome(500, 7), random_genome(500, 7));
        assert_ne!(random_genome(500, 7), random_genome(500, 8));
    }
}
