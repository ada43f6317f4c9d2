use crate::embedding::{check_same_dim, EmbeddingSet};
use crate::error::Result;

/// Euclidean distance between the mean vectors of two sets.
pub fn embedding_distance(orig: &EmbeddingSet, aug: &EmbeddingSet) -> Result<f64> {
    check_same_dim(orig, aug)?;
    let (a, b) = (orig.mean(), aug.mean());
    Ok(nrm2(a.iter().zip(&b).map(|(x, y)| x - y)))
}

/// Overflow-safe 2-norm with a running scale.
fn nrm2(xs: impl Iterator<Item = f64>) -> f64 {
    let mut scale = 0.0f64;
    let mut ssq = 1.0f64;
    for x in xs {
        if x == 0.0 {
            continue;
        }
        let ax = x.abs();
        if scale < ax {
            ssq = 1.0 + ssq * (scale / ax) * (scale / ax);
            scale = ax;
        } else {
            ssq += (ax / scale) * (ax / scale);
        }
    }
    scale * libm::sqrt(ssq)
}
