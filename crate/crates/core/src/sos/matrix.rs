use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size of the monomial basis `[1, y1, z1, a1, b1, y2, z2, a2, b2]`.
pub const DIM: usize = 9;

/// Symmetric 9x9 coefficient matrix over the monomial basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CertificateMatrix(pub [[f64; DIM]; DIM]);

impl Default for CertificateMatrix {
    fn default() -> Self {
        Self::zeros()
    }
}

impl CertificateMatrix {
    pub const fn zeros() -> Self {
        Self([[0.0; DIM]; DIM])
    }

    pub fn identity() -> Self {
        Self::diagonal([1.0; DIM])
    }

    pub fn diagonal(d: [f64; DIM]) -> Self {
        let mut m = Self::zeros();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = v;
        }
        m
    }

    /// Rejects matrices that are not exactly symmetric.
    pub fn from_rows(rows: [[f64; DIM]; DIM]) -> Result<Self> {
        let m = Self(rows);
        if !m.is_symmetric() {
            return Err(Error::InvalidParameter("matrix is not symmetric".into()));
        }
        Ok(m)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    pub fn rows(&self) -> &[[f64; DIM]; DIM] {
        &self.0
    }

    pub fn is_symmetric(&self) -> bool {
        (0..DIM).all(|i| (0..i).all(|j| self.0[i][j] == self.0[j][i]))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `v^T Q v`.
    pub fn quadratic_form(&self, v: &[f64; DIM]) -> f64 {
        let mut acc = 0.0;
        for (i, row) in self.0.iter().enumerate() {
            let mut r = 0.0;
            for (j, q) in row.iter().enumerate() {
                r += q * v[j];
            }
            acc += v[i] * r;
        }
        acc
    }

    /// Positions `(row, col)` with a non-zero entry, 0-based.
    pub fn sparsity(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..DIM {
            for j in 0..DIM {
                if self.0[i][j] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Non-empty subset of `{0, .., 8}` stored as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IndexSet(u16);

impl IndexSet {
    pub const FULL: IndexSet = IndexSet((1 << DIM) - 1);

    pub fn from_mask(mask: u16) -> Result<Self> {
        if mask == 0 || mask > Self::FULL.0 {
            return Err(Error::InvalidParameter(format!(
                "index set mask {mask:#x} is empty or out of range"
            )));
        }
        Ok(Self(mask))
    }

    /// From 0-based indices.
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut mask = 0u16;
        for &i in indices {
            if i >= DIM {
                return Err(Error::InvalidParameter(format!("index {i} out of range")));
            }
            mask |= 1 << i;
        }
        Self::from_mask(mask)
    }

    pub fn singleton(i: usize) -> Self {
        assert!(i < DIM);
        Self(1 << i)
    }

    pub fn mask(&self) -> u16 {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        i < DIM && self.0 & (1 << i) != 0
    }

    /// Ascending 0-based indices.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..DIM).filter(move |i| self.contains(*i))
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.indices().collect()
    }

    /// All 511 non-empty subsets.
    pub fn all() -> impl Iterator<Item = IndexSet> {
        (1..=Self::FULL.0).map(IndexSet)
    }

    /// Smaller cardinality first, then lexicographic on the sorted indices.
    pub fn tie_break_cmp(&self, other: &IndexSet) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.to_vec().cmp(&other.to_vec()))
    }
}

impl fmt::Display for IndexSet {
    /// 1-based, matching the usual matrix notation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.indices().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

impl Serialize for IndexSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let one_based: Vec<usize> = self.indices().map(|i| i + 1).collect();
        one_based.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let one_based = Vec::<usize>::deserialize(d)?;
        let zero_based: Vec<usize> = one_based
            .iter()
            .map(|i| i.checked_sub(1).ok_or_else(|| serde::de::Error::custom("indices are 1-based")))
            .collect::<std::result::Result<_, _>>()?;
        IndexSet::from_indices(&zero_based).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_set_basics() {
        let s = IndexSet::from_indices(&[4, 0, 2]).unwrap();
        assert_eq!(s.to_vec(), vec![0, 2, 4]);
        assert_eq!(s.len(), 3);
        assert_eq!(s.to_string(), "{1,3,5}");
        assert!(IndexSet::from_indices(&[]).is_err());
        assert!(IndexSet::from_indices(&[9]).is_err());
        assert_eq!(IndexSet::all().count(), 511);
    }

    #[test]
    fn tie_break_order() {
        let a = IndexSet::from_indices(&[8]).unwrap();
        let b = IndexSet::from_indices(&[0, 1]).unwrap();
        let c = IndexSet::from_indices(&[0, 2]).unwrap();
        assert!(a.tie_break_cmp(&b).is_lt());
        assert!(b.tie_break_cmp(&c).is_lt());
    }

    #[test]
    fn index_set_serde_is_one_based() {
        let s = IndexSet::from_indices(&[0, 8]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "[1,9]");
        let back: IndexSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<IndexSet>("[0]").is_err());
    }
}
