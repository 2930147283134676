//! Bit-packed vectors and matrices over GF(2).

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitRow {
    len: usize,
    words: Vec<u64>,
}

impl BitRow {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut row = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 == 1 {
                row.set(i, true);
            }
        }
        row
    }

    pub fn from_indices(len: usize, ones: &[usize]) -> Self {
        let mut row = Self::zeros(len);
        for &i in ones {
            row.flip(i);
        }
        row
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitRow) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn xor(&self, other: &BitRow) -> BitRow {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    /// Parity of the overlap, i.e. the GF(2) inner product.
    pub fn dot(&self, other: &BitRow) -> bool {
        assert_eq!(self.len, other.len);
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones()).sum::<u32>() % 2 == 1
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| u8::from(self.get(i))).collect()
    }

    fn lowest_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(k, w)| k * 64 + w.trailing_zeros() as usize)
    }
}

impl fmt::Debug for BitRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gf2Matrix {
    cols: usize,
    rows: Vec<BitRow>,
}

impl Gf2Matrix {
    pub fn new(cols: usize, rows: Vec<BitRow>) -> Self {
        assert!(rows.iter().all(|r| r.len() == cols));
        Self { cols, rows }
    }

    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Self::new(cols, rows.iter().map(|r| BitRow::from_bits(r)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[BitRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &BitRow {
        &self.rows[i]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].get(c)
    }

    /// `H v` over GF(2).
    pub fn mul_vec(&self, v: &BitRow) -> BitRow {
        let mut out = BitRow::zeros(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            if r.dot(v) {
                out.set(i, true);
            }
        }
        out
    }

    pub fn column(&self, c: usize) -> BitRow {
        let mut out = BitRow::zeros(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            out.set(i, r.get(c));
        }
        out
    }

    pub fn stack(&self, other: &Gf2Matrix) -> Gf2Matrix {
        assert_eq!(self.cols, other.cols);
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Gf2Matrix { cols: self.cols, rows }
    }

    /// Rank by Gaussian elimination.
    pub fn rank(&self) -> usize {
        let mut pivots: Vec<(usize, BitRow)> = Vec::new();
        for row in &self.rows {
            let mut r = row.clone();
            for (p, pr) in &pivots {
                if r.get(*p) {
                    r.xor_assign(pr);
                }
            }
            if let Some(p) = r.lowest_one() {
                // keep earlier pivots reduced with respect to the new one
                for (_, pr) in pivots.iter_mut() {
                    if pr.get(p) {
                        pr.xor_assign(&r);
                    }
                }
                pivots.push((p, r));
            }
        }
        pivots.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_examples() {
        let m = Gf2Matrix::from_rows(&[&[1, 1, 0], &[0, 1, 1], &[1, 0, 1]]);
        assert_eq!(m.rank(), 2);
        let id = Gf2Matrix::from_rows(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]);
        assert_eq!(id.rank(), 3);
        assert_eq!(Gf2Matrix::new(5, vec![BitRow::zeros(5)]).rank(), 0);
    }

    #[test]
    fn wide_rows_cross_word_boundary() {
        let mut a = BitRow::zeros(130);
        a.set(0, true);
        a.set(129, true);
        let b = BitRow::from_indices(130, &[129, 64]);
        assert!(a.dot(&b));
        assert_eq!(a.xor(&b).ones().collect::<Vec<_>>(), vec![0, 64]);
        let m = Gf2Matrix::new(130, vec![a.clone(), b.clone(), a.xor(&b)]);
        assert_eq!(m.rank(), 2);
    }
}
