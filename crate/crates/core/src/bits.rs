// SPDX-License-Identifier: Apache-2.0

//! Fixed-length bit vectors backing sub-array rows and sense outputs.

use std::fmt;

/// A fixed-length vector of bits, packed little-endian into `u64` words
/// (bit `i` lives in word `i / 64` at position `i % 64`).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits {
    len: usize,
    words: Vec<u64>,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = Bits { len, words: vec![!0; len.div_ceil(64)] };
        b.clear_tail();
        b
    }

    pub fn splat(len: usize, value: bool) -> Self {
        if value {
            Self::ones(len)
        } else {
            Self::zeros(len)
        }
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if b {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        Bits { len, words }
    }

    /// Parses a string of `0`/`1` characters, first character = bit 0.
    pub fn from_str01(s: &str) -> Option<Self> {
        let mut out = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                _ => return None,
            }
        }
        Some(Self::from_bools(out))
    }

    /// Low `width` bits of `value`, bit 0 first.
    pub fn from_u64(value: u64, width: usize) -> Self {
        Self::from_bools((0..width).map(|i| i < 64 && (value >> i) & 1 == 1))
    }

    pub fn to_u64(&self) -> u64 {
        (0..self.len.min(64)).filter(|&i| self.get(i)).fold(0, |acc, i| acc | 1 << i)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let m = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn all(&self) -> bool {
        self.count_ones() == self.len
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + t)
            })
        })
    }

    /// Copy of bits `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Bits {
        assert!(start + len <= self.len);
        let mut out = Bits::zeros(len);
        for (wi, w) in out.words.iter_mut().enumerate() {
            *w = self.word_at(start + wi * 64);
        }
        out.clear_tail();
        out
    }

    /// 64 bits starting at bit `pos`, zero-filled past the end.
    fn word_at(&self, pos: usize) -> u64 {
        let (q, r) = (pos / 64, pos % 64);
        let lo = self.words.get(q).copied().unwrap_or(0) >> r;
        let hi = if r == 0 { 0 } else { self.words.get(q + 1).copied().unwrap_or(0) << (64 - r) };
        lo | hi
    }

    /// Overwrite bits `[start, start + src.len())` with `src`.
    pub fn splice(&mut self, start: usize, src: &Bits) {
        assert!(start + src.len <= self.len);
        let mut done = 0;
        while done < src.len {
            let n = (src.len - done).min(64 - (start + done) % 64);
            let chunk = src.word_at(done) & low_mask(n);
            let pos = start + done;
            let (q, r) = (pos / 64, pos % 64);
            self.words[q] = (self.words[q] & !(low_mask(n) << r)) | (chunk << r);
            done += n;
        }
    }

    /// Mask with bits `[start, start + len)` set.
    pub fn range_mask(total: usize, start: usize, len: usize) -> Bits {
        assert!(start + len <= total);
        let mut m = Bits::zeros(total);
        m.splice(start, &Bits::ones(len));
        m
    }

    pub fn and(&self, o: &Bits) -> Bits {
        self.zip(o, |a, b| a & b)
    }

    pub fn or(&self, o: &Bits) -> Bits {
        self.zip(o, |a, b| a | b)
    }

    pub fn xor(&self, o: &Bits) -> Bits {
        self.zip(o, |a, b| a ^ b)
    }

    pub fn not(&self) -> Bits {
        let mut b = Bits { len: self.len, words: self.words.iter().map(|w| !w).collect() };
        b.clear_tail();
        b
    }

    /// `self` where `mask` is 0, `value` where `mask` is 1.
    pub fn merge_masked(&self, value: &Bits, mask: &Bits) -> Bits {
        assert_eq!(self.len, value.len);
        assert_eq!(self.len, mask.len);
        let words = self
            .words
            .iter()
            .zip(&value.words)
            .zip(&mask.words)
            .map(|((&s, &v), &m)| (s & !m) | (v & m))
            .collect();
        Bits { len: self.len, words }
    }

    pub(crate) fn zip(&self, o: &Bits, f: impl Fn(u64, u64) -> u64) -> Bits {
        assert_eq!(self.len, o.len, "bit-vector length mismatch");
        let words = self.words.iter().zip(&o.words).map(|(&a, &b)| f(a, b)).collect();
        let mut b = Bits { len: self.len, words };
        b.clear_tail();
        b
    }

    pub(crate) fn zip3(&self, b: &Bits, c: &Bits, f: impl Fn(u64, u64, u64) -> u64) -> Bits {
        assert!(self.len == b.len && self.len == c.len, "bit-vector length mismatch");
        let words = (0..self.words.len()).map(|i| f(self.words[i], b.words[i], c.words[i])).collect();
        let mut out = Bits { len: self.len, words };
        out.clear_tail();
        out
    }

    /// True when every bit selected by `mask` is set.
    pub fn covers(&self, mask: &Bits) -> bool {
        assert_eq!(self.len, mask.len, "bit-vector length mismatch");
        self.words.iter().zip(&mask.words).all(|(&w, &m)| w & m == m)
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }
}

#[inline]
fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        !0
    } else {
        (1u64 << n) - 1
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits[{}]({})", self.len, self)
    }
}
