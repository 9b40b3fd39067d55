//! Sample-query trees over `|x_i|^p`.
//!
//! A [`WeightedVectorTree`] is an implicit complete binary tree stored in an
//! array: node 1 is the root, node `k` has children `2k` and `2k + 1`, and the
//! leaves occupy `capacity..capacity + len` where `capacity` is the next power
//! of two at or above `len`. Padding leaves hold zero. Each leaf stores
//! `|x_i|^p` together with `sgn(x_i)`; each internal node stores the sum of its
//! two children, so the root is `||x||_p^p`.
//!
//! Indices are 0-based throughout.

mod codec;
mod matrix;

pub use matrix::WeightedMatrixTree;

use rand::Rng;

use crate::error::{Error, Result};

/// Relative tolerance used by [`WeightedVectorTree::audit`].
pub const AUDIT_TOLERANCE: f64 = 1e-9;

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// `|value|^p` with the common exponents special-cased.
#[inline]
pub(crate) fn abs_pow(value: f64, p: f64) -> f64 {
    let a = value.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

#[inline]
fn sign_of(value: f64) -> i8 {
    if value > 0.0 {
        1
    } else if value < 0.0 {
        -1
    } else {
        // covers -0.0
        0
    }
}

/// SQ_p(x): sample, query and update access to a real vector under the
/// distribution `|x_i|^p / ||x||_p^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedVectorTree {
    p: f64,
    len: usize,
    capacity: usize,
    nodes: Vec<f64>,
    signs: Vec<i8>,
}

impl WeightedVectorTree {
    /// Builds the tree in O(n).
    pub fn new(values: &[f64], p: f64) -> Result<Self> {
        check_exponent(p)?;
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let len = values.len();
        let capacity = len.next_power_of_two();
        let mut nodes = vec![0.0; 2 * capacity];
        let mut signs = vec![0i8; len];
        for (i, &v) in values.iter().enumerate() {
            let (w, s) = Self::leaf_of(i, v, p)?;
            nodes[capacity + i] = w;
            signs[i] = s;
        }
        let mut tree = Self {
            p,
            len,
            capacity,
            nodes,
            signs,
        };
        tree.rebuild();
        Ok(tree)
    }

    /// Builds a tree whose leaves hold the given nonnegative weights directly
    /// (sign +1 for positive weights). Used for proposal distributions and the
    /// column-norm tree, where the weights are already `p`-th powers.
    pub fn from_weights(weights: &[f64], p: f64) -> Result<Self> {
        check_exponent(p)?;
        if weights.is_empty() {
            return Err(Error::EmptyInput);
        }
        let len = weights.len();
        let capacity = len.next_power_of_two();
        let mut nodes = vec![0.0; 2 * capacity];
        let mut signs = vec![0i8; len];
        for (i, &w) in weights.iter().enumerate() {
            Self::check_weight(i, w)?;
            nodes[capacity + i] = w;
            signs[i] = sign_of(w);
        }
        let mut tree = Self {
            p,
            len,
            capacity,
            nodes,
            signs,
        };
        tree.rebuild();
        Ok(tree)
    }

    fn leaf_of(index: usize, value: f64, p: f64) -> Result<(f64, i8)> {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
        let s = sign_of(value);
        if s == 0 {
            return Ok((0.0, 0));
        }
        let w = abs_pow(value, p);
        if !w.is_finite() {
            return Err(Error::NonFinite { index, value: w });
        }
        if w == 0.0 {
            // |x|^p underflowed; the entry carries no probability mass
            return Ok((0.0, 0));
        }
        Ok((w, s))
    }

    fn check_weight(index: usize, w: f64) -> Result<()> {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::NonFinite { index, value: w });
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.len,
            })
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of leaf slots, the next power of two at or above `len`.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Tree depth in edges, `ceil(log2 n)`.
    pub fn depth(&self) -> usize {
        self.capacity.trailing_zeros() as usize
    }

    /// `||x||_p^p`, read from the root.
    #[inline]
    pub fn pnorm_power(&self) -> f64 {
        self.nodes[1]
    }

    /// Stored leaf value `|x_i|^p`.
    pub fn weight(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.nodes[self.capacity + i])
    }

    /// Unchecked leaf read for hot loops.
    #[inline]
    pub(crate) fn weight_unchecked(&self, i: usize) -> f64 {
        self.nodes[self.capacity + i]
    }

    pub fn sign(&self, i: usize) -> Result<i8> {
        self.check_index(i)?;
        Ok(self.signs[i])
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn weights(&self) -> &[f64] {
        &self.nodes[self.capacity..self.capacity + self.len]
    }

    /// Signed entry `sgn(x_i) * (|x_i|^p)^(1/p)`.
    pub fn query_entry(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.entry_unchecked(i))
    }

    #[inline]
    pub(crate) fn entry_unchecked(&self, i: usize) -> f64 {
        let w = self.nodes[self.capacity + i];
        let magnitude = if self.p == 1.0 {
            w
        } else if self.p == 2.0 {
            w.sqrt()
        } else {
            w.powf(1.0 / self.p)
        };
        f64::from(self.signs[i]) * magnitude
    }

    /// Reconstructed vector `x`.
    pub fn to_values(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.entry_unchecked(i)).collect()
    }

    /// Probability that [`sample`](Self::sample) returns `i`.
    pub fn probability(&self, i: usize) -> Result<f64> {
        let w = self.weight(i)?;
        let total = self.pnorm_power();
        if total > 0.0 {
            Ok(w / total)
        } else {
            Err(Error::EmptyDistribution)
        }
    }

    /// Draws `i` with probability `|x_i|^p / ||x||_p^p`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        self.sample_traced(rng).map(|(i, _)| i)
    }

    /// Like [`sample`](Self::sample), also returning the number of nodes
    /// visited on the way from the root to the leaf.
    pub fn sample_traced<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, usize)> {
        if !(self.nodes[1] > 0.0) {
            return Err(Error::EmptyDistribution);
        }
        let mut node = 1;
        let mut visits = 1;
        while node < self.capacity {
            let left = self.nodes[2 * node];
            let right = self.nodes[2 * node + 1];
            // The child sum is used instead of the stored parent value so the
            // branch probabilities are exact ratios of the children. A zero
            // subtree is never entered.
            let go_left = if right == 0.0 {
                true
            } else if left == 0.0 {
                false
            } else {
                rng.random::<f64>() * (left + right) < left
            };
            node = if go_left { 2 * node } else { 2 * node + 1 };
            visits += 1;
        }
        Ok((node - self.capacity, visits))
    }

    /// Sets `x_i = value`, refreshing exactly the ancestors of leaf `i`.
    /// Returns the number of nodes written.
    pub fn update(&mut self, i: usize, value: f64) -> Result<usize> {
        self.check_index(i)?;
        let (w, s) = Self::leaf_of(i, value, self.p)?;
        self.signs[i] = s;
        Ok(self.write_leaf(i, w))
    }

    /// Replaces the stored weight of leaf `i` directly, sign +1 (or 0 for a
    /// zero weight).
    pub fn set_weight(&mut self, i: usize, weight: f64) -> Result<usize> {
        self.check_index(i)?;
        Self::check_weight(i, weight)?;
        self.signs[i] = sign_of(weight);
        Ok(self.write_leaf(i, weight))
    }

    fn write_leaf(&mut self, i: usize, w: f64) -> usize {
        let mut node = self.capacity + i;
        self.nodes[node] = w;
        let mut visits = 1;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
            visits += 1;
        }
        visits
    }

    /// Recomputes every internal node bottom-up from the leaves.
    pub fn rebuild(&mut self) {
        for node in (1..self.capacity).rev() {
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Checks the parent-sum invariant at every internal node and the root
    /// against a fresh sum of the leaves, both to [`AUDIT_TOLERANCE`]
    /// relative to the root.
    pub fn audit(&self) -> Result<()> {
        let root = self.nodes[1];
        let scale = root.abs().max(f64::MIN_POSITIVE);
        for node in 1..self.capacity {
            let children = self.nodes[2 * node] + self.nodes[2 * node + 1];
            if (self.nodes[node] - children).abs() > AUDIT_TOLERANCE * scale {
                return Err(Error::Invariant(format!(
                    "node {node} holds {} but its children sum to {children}",
                    self.nodes[node]
                )));
            }
        }
        let fresh: f64 = self.weights().iter().sum();
        if (fresh - root).abs() > AUDIT_TOLERANCE * scale {
            return Err(Error::Invariant(format!(
                "root {root} differs from leaf sum {fresh}"
            )));
        }
        for (i, (&s, &w)) in self.signs.iter().zip(self.weights()).enumerate() {
            if (s == 0) != (w == 0.0) {
                return Err(Error::Invariant(format!(
                    "leaf {i} has sign {s} and weight {w}"
                )));
            }
        }
        Ok(())
    }

    /// Rebuilds the structure for a different exponent.
    pub fn with_exponent(&self, p: f64) -> Result<Self> {
        Self::new(&self.to_values(), p)
    }
}
