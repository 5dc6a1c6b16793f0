use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{FlamError, Result};

/// Symmetric matrix stored as dense blocks on a fixed block partition.
/// Only blocks with `row <= col` are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparse {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    dim: usize,
    blocks: BTreeMap<(usize, usize), DMatrix<f64>>,
}

impl BlockSparse {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut dim = 0;
        for &s in &sizes {
            offsets.push(dim);
            dim += s;
        }
        Self { offsets, sizes, dim, blocks: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn block_size(&self, b: usize) -> usize {
        self.sizes[b]
    }

    pub fn block_offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    /// Number of stored (upper-triangular) blocks.
    pub fn stored_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize, j: usize) -> Option<DMatrix<f64>> {
        if i <= j {
            self.blocks.get(&(i, j)).cloned()
        } else {
            self.blocks.get(&(j, i)).map(|m| m.transpose())
        }
    }

    /// Adds `m` to block `(i, j)` (and implicitly its transpose to `(j, i)`).
    pub fn add_block<S>(&mut self, i: usize, j: usize, m: &nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::Dyn, S>)
    where
        S: nalgebra::storage::Storage<f64, nalgebra::Dyn, nalgebra::Dyn>,
    {
        let (key, owned) = if i <= j { ((i, j), m.clone_owned()) } else { ((j, i), m.transpose()) };
        debug_assert_eq!(owned.shape(), (self.sizes[key.0], self.sizes[key.1]));
        match self.blocks.get_mut(&key) {
            Some(b) => *b += owned,
            None => {
                self.blocks.insert(key, owned);
            }
        }
    }

    /// Adds `w * I` to the diagonal block `b`.
    pub fn add_diagonal_block(&mut self, b: usize, w: f64) {
        let n = self.sizes[b];
        self.add_block(b, b, &(DMatrix::identity(n, n) * w));
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim {
            return Err(FlamError::DimensionMismatch { expected: self.dim, actual: x.len() });
        }
        let mut y = DVector::zeros(self.dim);
        self.mul_vec_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn mul_vec_into(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        y.fill(0.0);
        for (&(i, j), b) in &self.blocks {
            let (oi, oj) = (self.offsets[i], self.offsets[j]);
            let (ri, cj) = b.shape();
            for r in 0..ri {
                let mut acc = 0.0;
                for c in 0..cj {
                    acc += b[(r, c)] * x[oj + c];
                }
                y[oi + r] += acc;
            }
            if i != j {
                for c in 0..cj {
                    let mut acc = 0.0;
                    for r in 0..ri {
                        acc += b[(r, c)] * x[oi + r];
                    }
                    y[oj + c] += acc;
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for (&(i, j), b) in &self.blocks {
            let (oi, oj) = (self.offsets[i], self.offsets[j]);
            d.view_mut((oi, oj), b.shape()).copy_from(b);
            if i != j {
                d.view_mut((oj, oi), (b.ncols(), b.nrows())).copy_from(&b.transpose());
            }
        }
        d
    }

    pub fn block_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.blocks.keys().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mul_matches_dense() {
        let mut m = BlockSparse::new(vec![2, 3, 1]);
        m.add_block(0, 0, &DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]));
        m.add_block(2, 0, &DMatrix::from_row_slice(1, 2, &[0.5, -1.0]));
        m.add_block(1, 1, &DMatrix::identity(3, 3));
        m.add_block(1, 2, &DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]));
        m.add_diagonal_block(2, 7.0);
        let dense = m.to_dense();
        assert_eq!(dense, dense.transpose());
        assert_eq!(dense[(5, 0)], 0.5);
        assert_eq!(dense[(0, 5)], 0.5);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 1.0, 2.0]);
        assert!((m.mul_vec(&x).unwrap() - &dense * &x).norm() < 1e-14);
        assert_eq!(m.stored_blocks(), 5);
        assert!(m.mul_vec(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn repeated_adds_accumulate() {
        let mut m = BlockSparse::new(vec![1, 1]);
        m.add_diagonal_block(0, 1.0);
        m.add_diagonal_block(0, 1.0);
        m.add_block(1, 0, &DMatrix::from_element(1, 1, 2.0));
        m.add_block(0, 1, &DMatrix::from_element(1, 1, 2.0));
        assert_eq!(m.to_dense(), DMatrix::from_row_slice(2, 2, &[2.0, 4.0, 4.0, 0.0]));
    }
}
