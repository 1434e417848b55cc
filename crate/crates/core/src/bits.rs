//! Fixed-length bit vectors packed into `u64` words.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = BitVec {
            words: vec![u64::MAX; len.div_ceil(64)],
            len,
        };
        v.clear_tail();
        v
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v = BitVec::zeros(len);
        for i in indices {
            v.set(i, true);
        }
        v
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, on: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if on {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn or_assign(&mut self, other: &BitVec) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn not(&self) -> BitVec {
        let mut v = BitVec {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        v.clear_tail();
        v
    }

    /// Every set bit of `self` is also set in `other`.
    pub fn is_subset(&self, other: &BitVec) -> bool {
        assert_eq!(self.len, other.len);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &BitVec) -> bool {
        assert_eq!(self.len, other.len);
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Boolean matrix stored column by column.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BitMatrix {
    rows: usize,
    columns: Vec<BitVec>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BitMatrix {
            rows,
            columns: vec![BitVec::zeros(rows); cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.columns[col].get(row)
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.columns[col].set(row, on);
    }

    pub fn column(&self, col: usize) -> &BitVec {
        &self.columns[col]
    }

    /// Boolean product `M · x` (OR of AND): bit i set when some column j with
    /// `x_j` has bit i.
    pub fn mul_vec(&self, x: &BitVec) -> BitVec {
        assert_eq!(x.len(), self.cols());
        let mut out = BitVec::zeros(self.rows);
        for j in x.iter_ones() {
            out.or_assign(&self.columns[j]);
        }
        out
    }

    /// Boolean product `Mᵀ · y`: bit j set when column j shares a set bit with y.
    pub fn transpose_mul_vec(&self, y: &BitVec) -> BitVec {
        BitVec::from_indices(
            self.cols(),
            self.columns
                .iter()
                .enumerate()
                .filter(|(_, c)| c.intersects(y))
                .map(|(j, _)| j),
        )
    }

    /// Columns entirely contained in `y` (conjunctive premise test).
    pub fn columns_within(&self, y: &BitVec) -> BitVec {
        BitVec::from_indices(
            self.cols(),
            self.columns
                .iter()
                .enumerate()
                .filter(|(_, c)| c.is_subset(y))
                .map(|(j, _)| j),
        )
    }

    /// Row `i` as a string of `0`/`1` over the columns.
    pub fn row_string(&self, row: usize) -> String {
        self.columns
            .iter()
            .map(|c| if c.get(row) { '1' } else { '0' })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_and_not_respect_length() {
        let v = BitVec::ones(70);
        assert_eq!(v.count_ones(), 70);
        assert!(v.not().is_zero());
        assert_eq!(BitVec::zeros(70).not(), v);
    }

    #[test]
    fn subset_and_intersection() {
        let a = BitVec::from_indices(100, [3, 70]);
        let b = BitVec::from_indices(100, [3, 70, 99]);
        assert!(a.is_subset(&b));
        assert!(!b.is_subset(&a));
        assert!(a.intersects(&b));
        assert!(!a.intersects(&BitVec::from_indices(100, [4])));
    }

    #[test]
    fn matrix_products() {
        // 3x2: column 0 = {0,1}, column 1 = {2}
        let mut m = BitMatrix::zeros(3, 2);
        m.set(0, 0, true);
        m.set(1, 0, true);
        m.set(2, 1, true);
        assert_eq!(m.mul_vec(&BitVec::from_indices(2, [0])), BitVec::from_indices(3, [0, 1]));
        assert_eq!(
            m.transpose_mul_vec(&BitVec::from_indices(3, [1])),
            BitVec::from_indices(2, [0])
        );
        assert_eq!(
            m.columns_within(&BitVec::from_indices(3, [1, 2])),
            BitVec::from_indices(2, [1])
        );
        assert_eq!(m.row_string(0), "10");
        assert_eq!(m.row_string(2), "01");
    }
}
