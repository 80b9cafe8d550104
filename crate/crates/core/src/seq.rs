// SPDX-License-Identifier: Apache-2.0

//! Nucleotide sequences packed at 2 bits per base, and FASTA/FASTQ I/O.
//!
//! Codes: A=00, C=01, G=10, T=11. In a packed bit vector, base `i` occupies
//! bits `2i` (high bit of the code) and `2i + 1` (low bit), so a row printed
//! bit 0 first reads as the codes in base order.

use std::fmt;
use std::io::Write;

use log::warn;

use crate::bits::Bits;
use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct EncodedSeq {
    codes: Vec<u8>,
}

pub fn encode_base(b: u8) -> Option<u8> {
    match b {
        b'A' | b'a' => Some(0),
        b'C' | b'c' => Some(1),
        b'G' | b'g' => Some(2),
        b'T' | b't' => Some(3),
        _ => None,
    }
}

pub fn decode_base(c: u8) -> u8 {
    b"ACGT"[(c & 3) as usize]
}

impl EncodedSeq {
    pub fn new() -> Self {
        Self::default()
    }

    /// Encodes an ACGT string (either case).
    pub fn from_ascii(s: &[u8]) -> Result<Self> {
        let codes = s
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                encode_base(b).ok_or_else(|| Error::Parse(format!("non-ACGT symbol `{}` at {i}", b as char)))
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(EncodedSeq { codes })
    }

    pub fn from_codes(codes: Vec<u8>) -> Self {
        debug_assert!(codes.iter().all(|&c| c < 4));
        EncodedSeq { codes }
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn bit_len(&self) -> usize {
        2 * self.codes.len()
    }

    pub fn push(&mut self, code: u8) {
        self.codes.push(code & 3);
    }

    pub fn extend_from(&mut self, other: &[u8]) {
        self.codes.extend_from_slice(other);
    }

    pub fn sub(&self, start: usize, len: usize) -> EncodedSeq {
        EncodedSeq { codes: self.codes[start..start + len].to_vec() }
    }

    pub fn to_ascii(&self) -> String {
        self.codes.iter().map(|&c| decode_base(c) as char).collect()
    }

    pub fn to_bits(&self) -> Bits {
        Bits::from_bools(self.codes.iter().flat_map(|&c| [c & 2 != 0, c & 1 != 0]))
    }

    /// Decodes the first `bases` bases from a packed bit vector.
    pub fn from_bits(bits: &Bits, bases: usize) -> Result<Self> {
        if bits.len() < 2 * bases {
            return Err(Error::Shape(format!("{} bits cannot hold {bases} bases", bits.len())));
        }
        let codes = (0..bases).map(|i| (bits.get(2 * i) as u8) << 1 | bits.get(2 * i + 1) as u8).collect();
        Ok(EncodedSeq { codes })
    }

    /// 64-bit fingerprint of the packed codes, used for bucket hashing.
    pub fn fold64(&self) -> u64 {
        let mut h = self.codes.len() as u64;
        for chunk in self.codes.chunks(32) {
            let mut w = 0u64;
            for &c in chunk {
                w = w << 2 | c as u64;
            }
            h = (h.rotate_left(29) ^ w).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
        h
    }
}

impl fmt::Display for EncodedSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ascii())
    }
}

impl fmt::Debug for EncodedSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EncodedSeq({})", self.to_ascii())
    }
}

impl std::str::FromStr for EncodedSeq {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::from_ascii(s.as_bytes())
    }
}

/// Sliding windows of length `k`, in order. Shorter inputs give no windows.
pub fn extract_kmers(s: &EncodedSeq, k: usize) -> Vec<EncodedSeq> {
    if k == 0 || s.len() < k {
        return Vec::new();
    }
    s.codes.windows(k).map(|w| EncodedSeq { codes: w.to_vec() }).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub seq: Vec<u8>,
}

/// Parses FASTA or FASTQ text, chosen by the first non-blank character.
/// FASTQ quality strings are checked for length and discarded.
pub fn parse_reads(text: &str) -> Result<Vec<Record>> {
    let mut lines = text.lines().enumerate().peekable();
    while let Some((_, l)) = lines.peek() {
        if l.trim().is_empty() {
            lines.next();
        } else {
            break;
        }
    }
    let Some((_, first)) = lines.peek() else {
        return Ok(Vec::new());
    };
    match first.trim_start().as_bytes()[0] {
        b'>' => parse_fasta(lines),
        b'@' => parse_fastq(lines),
        c => Err(Error::Parse(format!("expected `>` or `@` at start of input, found `{}`", c as char))),
    }
}

fn parse_fasta<'a>(lines: impl Iterator<Item = (usize, &'a str)>) -> Result<Vec<Record>> {
    let mut out: Vec<Record> = Vec::new();
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        if let Some(id) = line.strip_prefix('>') {
            out.push(Record { id: id.trim().to_string(), seq: Vec::new() });
        } else {
            let rec = out.last_mut().ok_or_else(|| Error::Parse(format!("line {}: sequence before header", n + 1)))?;
            if let Some(b) = line.bytes().find(|b| !b.is_ascii_alphabetic() && *b != b'*' && *b != b'-') {
                return Err(Error::Parse(format!("line {}: unexpected character `{}`", n + 1, b as char)));
            }
            rec.seq.extend_from_slice(line.as_bytes());
        }
    }
    Ok(out)
}

fn parse_fastq<'a>(lines: impl Iterator<Item = (usize, &'a str)>) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    let mut it = lines.filter(|(_, l)| !l.trim().is_empty());
    while let Some((n, header)) = it.next() {
        let id = header
            .trim()
            .strip_prefix('@')
            .ok_or_else(|| Error::Parse(format!("line {}: expected FASTQ header", n + 1)))?;
        let (_, seq) = it.next().ok_or_else(|| Error::Parse(format!("line {}: record truncated", n + 1)))?;
        let (pn, plus) = it.next().ok_or_else(|| Error::Parse(format!("line {}: record truncated", n + 1)))?;
        if !plus.trim_start().starts_with('+') {
            return Err(Error::Parse(format!("line {}: expected `+` separator", pn + 1)));
        }
        let (qn, qual) = it.next().ok_or_else(|| Error::Parse(format!("line {}: missing quality line", pn + 1)))?;
        let seq = seq.trim();
        if qual.trim().len() != seq.len() {
            return Err(Error::Parse(format!("line {}: quality length differs from sequence", qn + 1)));
        }
        out.push(Record { id: id.trim().to_string(), seq: seq.as_bytes().to_vec() });
    }
    Ok(out)
}

/// Encodes a raw read, splitting it at every non-ACGT symbol.
pub fn split_acgt(seq: &[u8]) -> (Vec<EncodedSeq>, usize) {
    let mut parts = Vec::new();
    let mut cur = Vec::new();
    let mut rejected = 0;
    for &b in seq {
        match encode_base(b) {
            Some(c) => cur.push(c),
            None => {
                rejected += 1;
                if !cur.is_empty() {
                    parts.push(EncodedSeq { codes: std::mem::take(&mut cur) });
                }
            }
        }
    }
    if !cur.is_empty() {
        parts.push(EncodedSeq { codes: cur });
    }
    (parts, rejected)
}

/// Encodes all records, splitting reads at non-ACGT symbols with a warning.
pub fn encode_records(records: &[Record]) -> Vec<EncodedSeq> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let (parts, rejected) = split_acgt(&r.seq);
        if rejected > 0 {
            warn!("read `{}`: {rejected} non-ACGT symbol(s), split into {} fragment(s)", r.id, parts.len());
        }
        out.extend(parts);
    }
    out
}

pub fn write_fasta<W: Write>(mut w: W, records: &[(String, String)]) -> std::io::Result<()> {
    for (id, seq) in records {
        writeln!(w, ">{id}")?;
        for chunk in seq.as_bytes().chunks(60) {
            w.write_all(chunk)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}
