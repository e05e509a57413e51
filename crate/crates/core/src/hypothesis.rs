//! Joint tag states.
//!
//! Hypothesis `j` maps to tag bits by its binary expansion with the least
//! significant bit belonging to tag 1: `b_{j,i} = (j >> (i - 1)) & 1`.

use crate::config::MAX_TAGS;
use crate::{Error, Result};

/// One of the `2^N` joint tag states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hypothesis {
    index: usize,
    n_tags: usize,
}

impl Hypothesis {
    pub fn new(index: usize, n_tags: usize) -> Result<Self> {
        if n_tags == 0 || n_tags > MAX_TAGS {
            return Err(Error::config("n_tags", format!("must be in 1..={MAX_TAGS}")));
        }
        if index >= 1 << n_tags {
            return Err(Error::config(
                "hypothesis",
                format!("index {index} out of range for {n_tags} tags"),
            ));
        }
        Ok(Hypothesis { index, n_tags })
    }

    /// Encodes tag states `(c_1, ..., c_N)` into their hypothesis.
    pub fn from_states(states: &[bool], n_tags: usize) -> Result<Self> {
        Error::check_len("tag states", n_tags, states.len())?;
        let index = states
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &b)| acc | (usize::from(b) << i));
        Hypothesis::new(index, n_tags)
    }

    pub fn index(self) -> usize {
        self.index
    }

    pub fn n_tags(self) -> usize {
        self.n_tags
    }

    /// State of tag `tag` (zero-based).
    pub fn bit(self, tag: usize) -> bool {
        (self.index >> tag) & 1 == 1
    }

    pub fn bits(self) -> Vec<bool> {
        (0..self.n_tags).map(|i| self.bit(i)).collect()
    }

    /// Number of tags whose state differs.
    pub fn hamming(self, other: Hypothesis) -> u32 {
        bit_errors(self.index, other.index)
    }
}

/// Bit errors between a true and a decided hypothesis index.
pub fn bit_errors(truth: usize, decided: usize) -> u32 {
    (truth ^ decided).count_ones()
}

/// Decisions laid out as a `rows x n_tags` bit matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<bool>,
}

impl BitMatrix {
    pub fn from_hypotheses(hyps: &[Hypothesis], n_tags: usize) -> Self {
        let data = hyps
            .iter()
            .flat_map(|h| (0..n_tags).map(move |i| h.bit(i)))
            .collect();
        BitMatrix {
            rows: hyps.len(),
            cols: n_tags,
            data,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.cols + col]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_lsb_first() {
        assert_eq!(Hypothesis::from_states(&[false, false], 2).unwrap().index(), 0);
        assert_eq!(Hypothesis::from_states(&[true, false, true], 3).unwrap().index(), 5);
    }

    #[test]
    fn length_mismatch_is_config_error() {
        assert!(matches!(
            Hypothesis::from_states(&[true], 2),
            Err(Error::Dimension { .. })
        ));
        assert!(Hypothesis::new(4, 2).is_err());
    }

    #[test]
    fn exhaustive_round_trip_and_hamming() {
        for n in 1..=5 {
            for j in 0..1usize << n {
                let h = Hypothesis::new(j, n).unwrap();
                assert_eq!(Hypothesis::from_states(&h.bits(), n).unwrap().index(), j);
                for l in 0..1usize << n {
                    let o = Hypothesis::new(l, n).unwrap();
                    let differing = h
                        .bits()
                        .iter()
                        .zip(o.bits())
                        .filter(|(a, b)| **a != *b)
                        .count() as u32;
                    assert_eq!(h.hamming(o), differing);
                }
            }
        }
    }

    #[test]
    fn bit_matrix_layout() {
        let hyps: Vec<_> = [0, 3, 2].iter().map(|&j| Hypothesis::new(j, 2).unwrap()).collect();
        let m = BitMatrix::from_hypotheses(&hyps, 2);
        assert_eq!((m.rows, m.cols), (3, 2));
        assert!(!m.get(0, 0) && m.get(1, 0) && m.get(1, 1) && !m.get(2, 0) && m.get(2, 1));
    }
}
