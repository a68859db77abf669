//! Bit-packed matrices over GF(2).
//!
//! Rows are stored contiguously as `u64` words, least significant bit first.
//! The only heavy operation is [`BitMatrix::rank`], which backs the
//! stabilizer entropy computation.

use std::cell::RefCell;

use crate::error::{Error, Result};

pub const WORD_BITS: usize = 64;

#[inline]
pub fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// Dense row-major GF(2) matrix.
///
/// Invariant: bits beyond `cols` in the last word of every row are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

thread_local! {
    static SCRATCH: RefCell<Vec<u64>> = const { RefCell::new(Vec::new()) };
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self { rows, cols, stride, data: vec![0; rows * stride] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from rows of `'0'`/`'1'` characters, column 0 first.
    pub fn from_bit_strings(rows: &[&str]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Contract(format!("row {i} has {} bits, expected {cols}", r.len())));
            }
            for (j, ch) in r.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => m.set(i, j, true),
                    _ => return Err(Error::Contract(format!("invalid bit character {ch:?}"))),
                }
            }
        }
        Ok(m)
    }

    /// Builds a matrix from pre-packed rows. Pad bits past `cols` are cleared.
    pub fn from_words(rows: usize, cols: usize, mut data: Vec<u64>) -> Result<Self> {
        let stride = words_for(cols);
        if data.len() != rows * stride {
            return Err(Error::Contract(format!(
                "expected {} words for a {rows}x{cols} matrix, got {}",
                rows * stride,
                data.len()
            )));
        }
        let tail = cols % WORD_BITS;
        if tail != 0 {
            let mask = (1u64 << tail) - 1;
            for r in 0..rows {
                data[r * stride + stride - 1] &= mask;
            }
        }
        Ok(Self { rows, cols, stride, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        (self.data[r * self.stride + c / WORD_BITS] >> (c % WORD_BITS)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        assert!(r < self.rows && c < self.cols, "bit ({r}, {c}) out of range");
        let w = &mut self.data[r * self.stride + c / WORD_BITS];
        let bit = 1u64 << (c % WORD_BITS);
        if v {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    /// `dst <- dst XOR src`, word-wise.
    pub fn xor_row_into(&mut self, src: usize, dst: usize) -> Result<()> {
        if src >= self.rows || dst >= self.rows {
            return Err(Error::Contract(format!(
                "row index out of range (src={src}, dst={dst}, rows={})",
                self.rows
            )));
        }
        if src == dst {
            return Err(Error::Contract("xor_row_into requires src != dst".into()));
        }
        let s = self.stride;
        let (a, b) = if src < dst {
            let (lo, hi) = self.data.split_at_mut(dst * s);
            (&lo[src * s..(src + 1) * s], &mut hi[..s])
        } else {
            let (lo, hi) = self.data.split_at_mut(src * s);
            (&hi[..s], &mut lo[dst * s..(dst + 1) * s])
        };
        for (d, x) in b.iter_mut().zip(a) {
            *d ^= *x;
        }
        Ok(())
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let s = self.stride;
        for w in 0..s {
            self.data.swap(a * s + w, b * s + w);
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    /// Vertical concatenation.
    pub fn stack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Contract("stacked matrices must have equal column counts".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { rows: self.rows + other.rows, cols: self.cols, stride: self.stride, data })
    }

    /// GF(2) rank. Elimination runs on a thread-local scratch copy; `self`
    /// is left untouched.
    pub fn rank(&self) -> usize {
        SCRATCH.with(|cell| {
            let mut buf = cell.borrow_mut();
            buf.clear();
            buf.extend_from_slice(&self.data);
            eliminate(&mut buf, self.rows, self.stride)
        })
    }

    /// GF(2) rank, destroying the contents of `self` in the process.
    pub fn rank_in_place(&mut self) -> usize {
        eliminate(&mut self.data, self.rows, self.stride)
    }
}

/// Forward elimination over packed rows; returns the number of pivots.
pub(crate) fn eliminate(data: &mut [u64], rows: usize, stride: usize) -> usize {
    let mut rank = 0;
    for w in 0..stride {
        loop {
            if rank == rows {
                return rank;
            }
            // lowest set bit in word `w` among the unreduced rows
            let mut pivot = None;
            let mut best = u32::MAX;
            for r in rank..rows {
                let v = data[r * stride + w];
                if v != 0 {
                    let tz = v.trailing_zeros();
                    if tz < best {
                        best = tz;
                        pivot = Some(r);
                        if tz == 0 {
                            break;
                        }
                    }
                }
            }
            let Some(p) = pivot else { break };
            if p != rank {
                for k in w..stride {
                    data.swap(p * stride + k, rank * stride + k);
                }
            }
            let bit = 1u64 << best;
            let (head, tail) = data.split_at_mut((rank + 1) * stride);
            let prow = &head[rank * stride + w..rank * stride + stride];
            for row in tail.chunks_exact_mut(stride) {
                if row[w] & bit != 0 {
                    for (d, s) in row[w..].iter_mut().zip(prow) {
                        *d ^= *s;
                    }
                }
            }
            rank += 1;
        }
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference eliminator on unpacked booleans, independent of the packed path.
    fn dense_rank(m: &[Vec<bool>]) -> usize {
        let mut m: Vec<Vec<bool>> = m.to_vec();
        let rows = m.len();
        let cols = m.first().map_or(0, |r| r.len());
        let mut rank = 0;
        for c in 0..cols {
            if let Some(p) = (rank..rows).find(|&r| m[r][c]) {
                m.swap(p, rank);
                for r in 0..rows {
                    if r != rank && m[r][c] {
                        for k in 0..cols {
                            let v = m[rank][k];
                            m[r][k] ^= v;
                        }
                    }
                }
                rank += 1;
            }
        }
        rank
    }

    fn to_bools(m: &BitMatrix) -> Vec<Vec<bool>> {
        (0..m.rows()).map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect()).collect()
    }

    fn arb_matrix(max: usize) -> impl Strategy<Value = BitMatrix> {
        (0..=max, 0..=max).prop_flat_map(|(r, c)| {
            proptest::collection::vec(any::<bool>(), r * c).prop_map(move |bits| {
                let mut m = BitMatrix::zeros(r, c);
                for (k, b) in bits.into_iter().enumerate() {
                    if b {
                        m.set(k / c, k % c, true);
                    }
                }
                m
            })
        })
    }

    #[test]
    fn identity_and_zero() {
        assert_eq!(BitMatrix::identity(4).rank(), 4);
        assert_eq!(BitMatrix::zeros(3, 5).rank(), 0);
        assert_eq!(BitMatrix::zeros(0, 0).rank(), 0);
    }

    #[test]
    fn dependent_third_row() {
        let m = BitMatrix::from_bit_strings(&["1100", "0110", "1010"]).unwrap();
        assert_eq!(m.rank(), 2);
        // rank() must not consume the input
        assert_eq!(m, BitMatrix::from_bit_strings(&["1100", "0110", "1010"]).unwrap());
    }

    #[test]
    fn xor_rows() {
        let mut m = BitMatrix::from_bit_strings(&["101", "011"]).unwrap();
        m.xor_row_into(0, 1).unwrap();
        assert_eq!(m, BitMatrix::from_bit_strings(&["101", "110"]).unwrap());

        let mut m = BitMatrix::from_bit_strings(&["101", "101", "111"]).unwrap();
        m.xor_row_into(0, 1).unwrap();
        assert_eq!(m.row(1), &[0]);
        assert_eq!(m.row(2), &[0b111]);

        let mut m = BitMatrix::from_bit_strings(&["000", "110"]).unwrap();
        m.xor_row_into(0, 1).unwrap();
        assert_eq!(m, BitMatrix::from_bit_strings(&["000", "110"]).unwrap());
    }

    #[test]
    fn xor_row_errors() {
        let mut m = BitMatrix::zeros(2, 3);
        assert!(m.xor_row_into(0, 2).is_err());
        assert!(m.xor_row_into(1, 1).is_err());
    }

    #[test]
    fn wide_rows_cross_word_boundary() {
        let mut m = BitMatrix::zeros(3, 130);
        m.set(0, 129, true);
        m.set(1, 64, true);
        m.set(2, 129, true);
        m.set(2, 64, true);
        assert_eq!(m.rank(), 2);
    }

    #[test]
    fn from_words_clears_padding() {
        let m = BitMatrix::from_words(1, 3, vec![u64::MAX]).unwrap();
        assert_eq!(m.row(0), &[0b111]);
    }

    proptest! {
        #[test]
        fn rank_matches_dense_and_transpose(m in arb_matrix(16)) {
            let r = m.rank();
            prop_assert_eq!(r, dense_rank(&to_bools(&m)));
            prop_assert_eq!(r, m.transpose().rank());
            prop_assert!(r <= m.rows().min(m.cols()));
        }

        #[test]
        fn rank_invariant_under_row_ops(m in arb_matrix(12), ops in proptest::collection::vec((0usize..12, 0usize..12, any::<bool>()), 0..20)) {
            let r0 = m.rank();
            let mut m2 = m.clone();
            for (a, b, swap) in ops {
                if m2.rows() < 2 { break; }
                let (a, b) = (a % m2.rows(), b % m2.rows());
                if swap { m2.swap_rows(a, b); } else if a != b { m2.xor_row_into(a, b).unwrap(); }
            }
            prop_assert_eq!(m2.rank(), r0);
            prop_assert_eq!(m.stack(&m).unwrap().rank(), r0);
        }
    }
}
