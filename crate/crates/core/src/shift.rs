//! Alphabets, finite words and cylinder indexing over the one-sided shift.
//!
//! A depth-`m` cylinder `[w]` is addressed by the big-endian base-`k` value of
//! `w`, so the `k^m` cylinders of one depth occupy `0..k^m` and every word
//! extending a prefix `u` lies in one contiguous index range.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of cylinders we allow at one depth (2^53, exact in f64).
pub const MAX_CYLINDERS: u64 = 1 << 53;

/// Finite alphabet `{0, .., k-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet(usize);

impl Alphabet {
    pub fn new(k: usize) -> Result<Self> {
        if (2..=64).contains(&k) {
            Ok(Alphabet(k))
        } else {
            Err(Error::AlphabetSize(k))
        }
    }

    pub fn size(self) -> usize {
        self.0
    }

    /// Number of words of length `m`, or an error when it exceeds [`MAX_CYLINDERS`].
    pub fn cylinder_count(self, m: usize) -> Result<usize> {
        let k = self.0 as u64;
        let count = u32::try_from(m)
            .ok()
            .and_then(|m| k.checked_pow(m))
            .filter(|&c| c <= MAX_CYLINDERS)
            .ok_or(Error::IndexOverflow { k: self.0, m })?;
        Ok(count as usize)
    }

    pub fn word(self, symbols: &[usize]) -> Result<Word> {
        let mut out = Vec::with_capacity(symbols.len());
        for &s in symbols {
            if s >= self.0 {
                return Err(Error::SymbolOutOfRange { symbol: s, k: self.0 });
            }
            out.push(s as u8);
        }
        Ok(Word(out))
    }

    pub fn check(self, w: &[u8]) -> Result<()> {
        match w.iter().find(|&&s| s as usize >= self.0) {
            Some(&s) => Err(Error::SymbolOutOfRange { symbol: s as usize, k: self.0 }),
            None => Ok(()),
        }
    }

    /// All words of length `m` in cylinder-index order.
    pub fn words(self, m: usize) -> Result<impl Iterator<Item = Word>> {
        let count = self.cylinder_count(m)?;
        Ok((0..count).map(move |i| cylinder_word(self, i, m)))
    }
}

/// A finite word `(w_0, .., w_{m-1})`; the empty word stands for the whole space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Wraps raw symbols without an alphabet check.
    pub fn from_symbols(symbols: Vec<u8>) -> Self {
        Word(symbols)
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, s: u8) {
        self.0.push(s);
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n].to_vec())
    }

    pub fn into_symbols(self) -> Vec<u8> {
        self.0
    }
}

impl From<&[u8]> for Word {
    fn from(s: &[u8]) -> Self {
        Word(s.to_vec())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "]")
    }
}

/// A window of the past `(x_{-n}, .., x_{-1})`, stored in time order so that
/// `symbols()[0]` is `x_{-n}` and the last entry is `x_{-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PastWord(Vec<u8>);

impl PastWord {
    pub fn from_symbols(symbols: Vec<u8>) -> Self {
        PastWord(symbols)
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Symbol at negative time `t`, for `-n <= t <= -1`.
    pub fn at(&self, t: isize) -> Option<u8> {
        if t >= 0 {
            return None;
        }
        let n = self.0.len() as isize;
        let idx = n + t;
        (idx >= 0).then(|| self.0[idx as usize])
    }

    /// The window read left to right as an ordinary word; by shift invariance
    /// its measure equals that of the past cylinder.
    pub fn as_word(&self) -> Word {
        Word(self.0.clone())
    }

    /// The last `n` symbols `(x_{-n}, .., x_{-1})`.
    pub fn tail(&self, n: usize) -> &[u8] {
        &self.0[self.0.len() - n..]
    }
}

/// Concatenation `past ++ future` after checking both against the alphabet.
pub fn concat(alphabet: Alphabet, past: &[u8], future: &[u8]) -> Result<Word> {
    alphabet.check(past)?;
    alphabet.check(future)?;
    let mut out = Vec::with_capacity(past.len() + future.len());
    out.extend_from_slice(past);
    out.extend_from_slice(future);
    Ok(Word(out))
}

/// Big-endian base-`k` index of `w` among words of its length.
pub fn cylinder_index(alphabet: Alphabet, w: &[u8]) -> Result<usize> {
    alphabet.cylinder_count(w.len())?;
    alphabet.check(w)?;
    Ok(index_unchecked(alphabet.size(), w))
}

pub(crate) fn index_unchecked(k: usize, w: &[u8]) -> usize {
    w.iter().fold(0usize, |acc, &s| acc * k + s as usize)
}

/// Inverse of [`cylinder_index`] for words of length `m`.
pub fn cylinder_word(alphabet: Alphabet, mut index: usize, m: usize) -> Word {
    let k = alphabet.size();
    let mut out = vec![0u8; m];
    for slot in out.iter_mut().rev() {
        *slot = (index % k) as u8;
        index /= k;
    }
    Word(out)
}

/// `d(x, y) = 2^{-n(x,y)}` on equal-length windows, where `n(x,y)` is the last
/// index through which `x` and `y` agree; `n = -1` when the first symbols differ.
pub fn shift_distance(x: &[u8], y: &[u8]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.is_empty() {
        return Err(Error::EmptyWord);
    }
    match x.iter().zip(y).position(|(a, b)| a != b) {
        None => Ok(0.0),
        Some(first_diff) => {
            let n = first_diff as i32 - 1;
            Ok(2f64.powi(-n))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(k: usize) -> Alphabet {
        Alphabet::new(k).unwrap()
    }

    #[test]
    fn concat_examples() {
        let w = concat(a(2), &[0, 1], &[1]).unwrap();
        assert_eq!(w.symbols(), &[0, 1, 1]);
        assert_eq!(concat(a(2), &[1, 0], &[]).unwrap().symbols(), &[1, 0]);
        assert_eq!(concat(a(2), &[], &[0, 1]).unwrap().symbols(), &[0, 1]);
        assert!(matches!(
            concat(a(2), &[2], &[]),
            Err(Error::SymbolOutOfRange { symbol: 2, k: 2 })
        ));
    }

    #[test]
    fn index_examples() {
        assert_eq!(cylinder_index(a(2), &[0, 0]).unwrap(), 0);
        assert_eq!(cylinder_index(a(2), &[1, 0]).unwrap(), 2);
        assert_eq!(cylinder_index(a(3), &[2, 1]).unwrap(), 2 * 3 + 1);
        assert_eq!(cylinder_index(a(5), &[]).unwrap(), 0);
    }

    #[test]
    fn index_overflow_is_rejected() {
        assert!(cylinder_index(a(2), &[0; 53]).is_ok());
        assert!(matches!(
            cylinder_index(a(2), &[0; 54]),
            Err(Error::IndexOverflow { .. })
        ));
        assert!(a(64).cylinder_count(9).is_err());
    }

    #[test]
    fn index_round_trip_exhaustive() {
        for k in 2..=4 {
            for m in 0..=10usize {
                if k == 4 && m > 8 {
                    continue;
                }
                for (i, w) in a(k).words(m).unwrap().enumerate() {
                    assert_eq!(cylinder_index(a(k), w.symbols()).unwrap(), i);
                }
            }
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(shift_distance(&[0, 1, 1], &[0, 1, 0]).unwrap(), 0.5);
        assert_eq!(shift_distance(&[0, 1, 1], &[0, 1, 1]).unwrap(), 0.0);
        assert_eq!(shift_distance(&[0, 1], &[1, 1]).unwrap(), 2.0);
        assert_eq!(shift_distance(&[0, 0, 0], &[0, 1, 0]).unwrap(), 1.0);
        assert!(shift_distance(&[0], &[0, 1]).is_err());
        assert!(shift_distance(&[], &[]).is_err());
    }

    #[test]
    fn past_word_indexing() {
        let p = PastWord::from_symbols(vec![2, 0, 1]);
        assert_eq!(p.at(-1), Some(1));
        assert_eq!(p.at(-3), Some(2));
        assert_eq!(p.at(-4), None);
        assert_eq!(p.at(0), None);
        assert_eq!(p.tail(2), &[0, 1]);
    }

    fn word_strategy(len: usize) -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(0u8..3, len)
    }

    proptest! {
        #[test]
        fn distance_is_an_ultrametric(
            (x, y, z) in (1usize..12).prop_flat_map(|n| (word_strategy(n), word_strategy(n), word_strategy(n)))
        ) {
            let dxy = shift_distance(&x, &y).unwrap();
            let dyx = shift_distance(&y, &x).unwrap();
            let dxz = shift_distance(&x, &z).unwrap();
            let dyz = shift_distance(&y, &z).unwrap();
            prop_assert_eq!(dxy, dyx);
            prop_assert_eq!(dxy == 0.0, x == y);
            prop_assert!(dxz <= dxy.max(dyz));
        }

        #[test]
        fn word_round_trip(k in 2usize..=4, w in proptest::collection::vec(0u8..2, 0..10)) {
            let al = a(k);
            let idx = cylinder_index(al, &w).unwrap();
            let back = cylinder_word(al, idx, w.len());
            prop_assert_eq!(back.symbols(), &w[..]);
        }
    }
}
