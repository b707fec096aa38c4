use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted `(index, value)` pairs with strictly increasing indices.
///
/// Zeros are never stored, so iteration cost is the number of nonzeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from unordered entries. Zero values are dropped;
    /// duplicate indices and non-finite values are rejected.
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        for window in entries.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::InvalidArgument(format!(
                    "duplicate sparse index {}",
                    window[0].0
                )));
            }
        }
        if let Some(&(i, v)) = entries.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value {v} at index {i}"
            )));
        }
        Ok(Self { entries })
    }

    /// Appends an entry that must sort after every existing one.
    pub(crate) fn push_sorted(&mut self, index: usize, value: f64) {
        debug_assert!(self.entries.last().is_none_or(|&(last, _)| last < index));
        debug_assert!(value.is_finite());
        if value != 0.0 {
            self.entries.push((index, value));
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|&(i, _)| i)
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |pos| self.entries[pos].1)
    }

    /// Concatenates `self` with `tail`, whose indices must all exceed ours.
    pub fn concat(&self, tail: &SparseVector) -> Result<SparseVector> {
        if let (Some(a), Some(&(b, _))) = (self.max_index(), tail.entries.first()) {
            if b <= a {
                return Err(Error::InvalidArgument(format!(
                    "cannot append index {b} after {a}"
                )));
            }
        }
        let mut entries = Vec::with_capacity(self.nnz() + tail.nnz());
        entries.extend_from_slice(&self.entries);
        entries.extend_from_slice(&tail.entries);
        Ok(SparseVector { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn sorts_and_drops_zeros() {
        let v = SparseVector::from_entries(vec![(5, 1.0), (2, 0.0), (1, -3.0)]).unwrap();
        assert_eq!(v.entries(), &[(1, -3.0), (5, 1.0)]);
        assert_eq!(v.get(5), 1.0);
        assert_eq!(v.get(2), 0.0);
    }

    #[test]
    fn rejects_duplicates_and_nan() {
        assert!(SparseVector::from_entries(vec![(1, 1.0), (1, 2.0)]).is_err());
        assert!(SparseVector::from_entries(vec![(1, f64::NAN)]).is_err());
        assert!(SparseVector::from_entries(vec![(1, f64::INFINITY)]).is_err());
    }

    #[test]
    fn concat_requires_ordering() {
        let a = SparseVector::from_entries(vec![(0, 1.0)]).unwrap();
        let b = SparseVector::from_entries(vec![(3, 1.0), (4, 0.5)]).unwrap();
        assert_eq!(a.concat(&b).unwrap().nnz(), 3);
        assert!(b.concat(&a).is_err());
    }
}
