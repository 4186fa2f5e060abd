//! Ordered, labeled tensor-factor dimensions.
//!
//! Basis ordering is row-major lexicographic over the factor list: factor 0
//! is the slowest index. Duals of factors are tracked purely through a `*`
//! label suffix; no metric is ever applied.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// One tensor factor: a label and its dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dim {
    pub label: String,
    pub d: usize,
}

impl Dim {
    pub fn new(label: impl Into<String>, d: usize) -> Self {
        Dim {
            label: label.into(),
            d,
        }
    }
}

/// Ordered list of tensor factors with unique labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dims {
    factors: Vec<Dim>,
}

/// Label of the dual of the factor labeled `label`.
pub fn dual_label(label: &str) -> String {
    let mut s = String::with_capacity(label.len() + 1);
    s.push_str(label);
    s.push('*');
    s
}

impl Dims {
    pub fn new(factors: Vec<Dim>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            if f.d == 0 {
                return Err(CoreError::InvalidParameter {
                    detail: alloc::format!("factor {:?} has dimension 0", f.label),
                });
            }
            if factors[..i].iter().any(|g| g.label == f.label) {
                return Err(CoreError::LabelCollision {
                    label: f.label.clone(),
                });
            }
        }
        Ok(Dims { factors })
    }

    /// Convenience constructor from `(label, dim)` pairs.
    pub fn of(pairs: &[(&str, usize)]) -> Self {
        Dims::new(pairs.iter().map(|(l, d)| Dim::new(*l, *d)).collect())
            .expect("static factor list must be valid")
    }

    /// A single anonymous factor, for unlabeled vectors and scalars.
    pub fn single(label: &str, d: usize) -> Self {
        Dims::of(&[(label, d)])
    }

    /// No factors: the one-dimensional scalar space.
    pub fn scalar() -> Self {
        Dims { factors: Vec::new() }
    }

    pub fn factors(&self) -> &[Dim] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.d).product()
    }

    pub fn labels(&self) -> Vec<String> {
        self.factors.iter().map(|f| f.label.clone()).collect()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.factors.iter().any(|f| f.label == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| CoreError::LabelNotFound {
                label: label.to_string(),
            })
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.position(label)?].d)
    }

    /// Concatenation; errors on any label collision.
    pub fn joined(&self, other: &Dims) -> Result<Dims> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Dims::new(factors)
    }

    /// Factors restricted to `labels`, keeping this list's original order.
    pub fn subset_in_order(&self, labels: &[String]) -> Result<Dims> {
        for l in labels {
            self.position(l)?;
        }
        let factors = self
            .factors
            .iter()
            .filter(|f| labels.contains(&f.label))
            .cloned()
            .collect();
        Dims::new(factors)
    }

    /// Same factors with starred labels; used for channel dual-input spaces.
    pub fn dual(&self) -> Dims {
        Dims {
            factors: self
                .factors
                .iter()
                .map(|f| Dim::new(dual_label(&f.label), f.d))
                .collect(),
        }
    }

    /// Row-major strides: stride of the last factor is 1.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = alloc::vec![1usize; self.factors.len()];
        for i in (0..self.factors.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.factors[i + 1].d;
        }
        strides
    }

    /// Decomposes a flat index into per-factor indices.
    pub fn unravel(&self, mut index: usize, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.factors.len());
        for i in (0..self.factors.len()).rev() {
            out[i] = index % self.factors[i].d;
            index /= self.factors[i].d;
        }
    }

    /// Recomposes per-factor indices into a flat index.
    pub fn ravel(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.factors.len());
        let mut flat = 0usize;
        for (i, f) in self.factors.iter().enumerate() {
            debug_assert!(idx[i] < f.d);
            flat = flat * f.d + idx[i];
        }
        flat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ravel_is_row_major_lexicographic() {
        let dims = Dims::of(&[("A", 2), ("B", 3)]);
        // (a, b) orders as a*3 + b: factor 0 is slowest.
        assert_eq!(dims.ravel(&[0, 0]), 0);
        assert_eq!(dims.ravel(&[0, 2]), 2);
        assert_eq!(dims.ravel(&[1, 0]), 3);
        let mut idx = [0usize; 2];
        dims.unravel(4, &mut idx);
        assert_eq!(idx, [1, 1]);
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(matches!(
            Dims::new(alloc::vec![Dim::new("A", 2), Dim::new("A", 3)]),
            Err(CoreError::LabelCollision { .. })
        ));
    }

    #[test]
    fn dual_stars_labels() {
        let dims = Dims::of(&[("A", 2)]).dual();
        assert_eq!(dims.factors()[0].label, "A*");
        assert_eq!(dims.factors()[0].d, 2);
    }

    #[test]
    fn strides_match_ravel() {
        let dims = Dims::of(&[("A", 2), ("B", 3), ("C", 4)]);
        let s = dims.strides();
        assert_eq!(s, alloc::vec![12, 4, 1]);
        assert_eq!(dims.ravel(&[1, 2, 3]), 12 + 8 + 3);
    }
}
