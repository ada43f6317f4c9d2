use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Provenance;

/// Fixed-dimension vectors for one provenance class, aligned 1:1 with record ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEmbeddingSet")]
pub struct EmbeddingSet {
    vectors: Vec<Vec<f64>>,
    dim: usize,
    source: Provenance,
    ids: Vec<String>,
}

#[derive(Deserialize)]
struct RawEmbeddingSet {
    vectors: Vec<Vec<f64>>,
    dim: usize,
    source: Provenance,
    ids: Vec<String>,
}

impl TryFrom<RawEmbeddingSet> for EmbeddingSet {
    type Error = Error;
    fn try_from(r: RawEmbeddingSet) -> Result<Self> {
        let set = EmbeddingSet::new(r.vectors, r.source, r.ids)?;
        if set.dim != r.dim {
            return Err(Error::DimensionMismatch { expected: r.dim, found: set.dim });
        }
        Ok(set)
    }
}

impl EmbeddingSet {
    /// Rejects empty sets, ragged vectors, non-finite entries and misaligned ids.
    pub fn new(vectors: Vec<Vec<f64>>, source: Provenance, ids: Vec<String>) -> Result<Self> {
        let dim = vectors.first().ok_or(Error::EmptyEmbeddings)?.len();
        if dim == 0 {
            return Err(Error::EmptyEmbeddings);
        }
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("embedding"));
            }
        }
        if ids.len() != vectors.len() {
            return Err(Error::MisalignedIds { ids: ids.len(), vectors: vectors.len() });
        }
        Ok(EmbeddingSet { vectors, dim, source, ids })
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> Provenance {
        self.source
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Componentwise empirical mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for v in &self.vectors {
            for (acc, x) in m.iter_mut().zip(v) {
                *acc += x;
            }
        }
        let n = self.vectors.len() as f64;
        m.iter_mut().for_each(|x| *x /= n);
        m
    }
}

pub(crate) fn check_same_dim(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, found: b.dim });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn rejects_bad_shapes() {
        assert_eq!(EmbeddingSet::new(vec![], Provenance::Original, vec![]), Err(Error::EmptyEmbeddings));
        assert_eq!(
            EmbeddingSet::new(vec![vec![1.0, 2.0], vec![1.0]], Provenance::Original, vec!["a".into(), "b".into()]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
        assert_eq!(
            EmbeddingSet::new(vec![vec![1.0]], Provenance::Original, vec![]),
            Err(Error::MisalignedIds { ids: 0, vectors: 1 })
        );
    }

    #[test]
    fn mean_vector() {
        let s = EmbeddingSet::new(vec![vec![0.0, 0.0], vec![2.0, 2.0]], Provenance::Original, vec!["a".to_string(), "b".to_string()]).unwrap();
        assert_eq!(s.mean(), vec![1.0, 1.0]);
    }
}
