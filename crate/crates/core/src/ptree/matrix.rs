use rand::Rng;

use super::{check_exponent, WeightedVectorTree};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// SQ_p(A): one [`WeightedVectorTree`] per column plus a top tree whose leaf
/// `j` holds `||A^(j)||_p^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMatrixTree {
    p: f64,
    rows: usize,
    cols: usize,
    columns: Vec<WeightedVectorTree>,
    column_norms: WeightedVectorTree,
}

impl WeightedMatrixTree {
    /// Builds from column vectors, each of length `rows`.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C], p: f64) -> Result<Self> {
        check_exponent(p)?;
        if columns.is_empty() {
            return Err(Error::EmptyInput);
        }
        let rows = columns[0].as_ref().len();
        let trees = columns
            .iter()
            .map(|c| {
                let c = c.as_ref();
                if c.len() != rows {
                    return Err(Error::DimensionMismatch {
                        expected: rows,
                        got: c.len(),
                    });
                }
                WeightedVectorTree::new(c, p)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(p, rows, trees)
    }

    pub fn from_dense(a: &DenseMatrix, p: f64) -> Result<Self> {
        let columns: Vec<Vec<f64>> = (0..a.cols()).map(|j| a.column(j)).collect();
        Self::from_columns(&columns, p)
    }

    /// Builds from 0-based `(row, col, value)` triplets; the matrix is
    /// densified and duplicate coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, entries: &[(usize, usize, f64)], p: f64) -> Result<Self> {
        let mut a = DenseMatrix::zeros(rows, cols);
        for &(i, j, v) in entries {
            if i >= rows {
                return Err(Error::IndexOutOfRange { index: i, len: rows });
            }
            if j >= cols {
                return Err(Error::IndexOutOfRange { index: j, len: cols });
            }
            a.set(i, j, a.get(i, j) + v);
        }
        Self::from_dense(&a, p)
    }

    fn assemble(p: f64, rows: usize, columns: Vec<WeightedVectorTree>) -> Result<Self> {
        let weights: Vec<f64> = columns.iter().map(|t| t.pnorm_power()).collect();
        let column_norms = WeightedVectorTree::from_weights(&weights, p)?;
        Ok(Self {
            p,
            rows,
            cols: columns.len(),
            columns,
            column_norms,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Result<&WeightedVectorTree> {
        self.columns.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.cols,
        })
    }

    pub fn column_norm_tree(&self) -> &WeightedVectorTree {
        &self.column_norms
    }

    /// `||A^(j)||_p^p`.
    pub fn column_pnorm_power(&self, j: usize) -> Result<f64> {
        self.column_norms.weight(j)
    }

    /// `sum_j ||A^(j)||_p^p`, the entrywise `p`-norm power of `A`.
    pub fn pnorm_power(&self) -> f64 {
        self.column_norms.pnorm_power()
    }

    pub fn query_entry(&self, i: usize, j: usize) -> Result<f64> {
        self.column(j)?.query_entry(i)
    }

    #[inline]
    pub(crate) fn entry_unchecked(&self, i: usize, j: usize) -> f64 {
        self.columns[j].entry_unchecked(i)
    }

    pub fn sample_column<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        self.column_norms.sample(rng)
    }

    pub fn sample_row<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> Result<usize> {
        self.column(j)?.sample(rng)
    }

    /// Two-level draw of `(i, j)` with probability `|A_ij|^p / sum |A|^p`.
    pub fn sample_entry<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, usize)> {
        let j = self.sample_column(rng)?;
        let i = self.columns[j].sample(rng)?;
        Ok((i, j))
    }

    /// Sets `A_ij = value`. Returns the number of nodes written across the
    /// column tree and the top tree.
    pub fn update(&mut self, i: usize, j: usize, value: f64) -> Result<usize> {
        if j >= self.cols {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.cols,
            });
        }
        let mut visits = self.columns[j].update(i, value)?;
        let weight = self.columns[j].pnorm_power();
        visits += self.column_norms.set_weight(j, weight)?;
        Ok(visits)
    }

    /// Audits every tree and the column-norm linkage.
    pub fn audit(&self) -> Result<()> {
        for (j, column) in self.columns.iter().enumerate() {
            column.audit()?;
            let top = self.column_norms.weight_unchecked(j);
            if top != column.pnorm_power() {
                return Err(Error::Invariant(format!(
                    "top leaf {j} = {top} but column root = {}",
                    column.pnorm_power()
                )));
            }
        }
        self.column_norms.audit()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                a.set(i, j, self.entry_unchecked(i, j));
            }
        }
        a
    }
}
