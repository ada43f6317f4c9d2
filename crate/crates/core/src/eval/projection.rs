use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embedding::{check_same_dim, EmbeddingSet};
use crate::error::{Error, Result};
use crate::sample::SplitMix64;

pub const MAX_ITERATIONS: usize = 1000;
/// Convergence: every leading Ritz residual below this times the top eigenvalue.
pub const TOLERANCE: f64 = 1e-10;
const BLOCK: usize = 6;
const START_SEED: u64 = 0x5EED_0003;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// 3-d coordinates, grouped like the input sets.
    pub coords: Vec<Vec<[f64; 3]>>,
    /// Unit principal directions; zero vectors past the data rank.
    pub components: [Vec<f64>; 3],
    pub variances: [f64; 3],
    /// Share of total variance per component.
    pub explained: [f64; 3],
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// Top-3 principal-component coordinates of the pooled, centered vectors.
///
/// Blocked subspace iteration with Rayleigh–Ritz on the sample covariance,
/// applied implicitly so the cost is linear in the dimension. The start
/// block is fixed, so output depends only on the input and its order. Each
/// direction is signed so its largest-magnitude entry is positive.
pub fn project3(sets: &[EmbeddingSet]) -> Result<Projection> {
    let first = sets.first().ok_or(Error::EmptyEmbeddings)?;
    for s in &sets[1..] {
        check_same_dim(first, s)?;
    }
    let d = first.dim();
    if d < 3 {
        return Err(Error::TooFewForProjection { what: "dimensions", needed: 3, got: d });
    }
    let n: usize = sets.iter().map(EmbeddingSet::len).sum();
    if n < 3 {
        return Err(Error::TooFewForProjection { what: "vectors", needed: 3, got: n });
    }

    let mut mean = vec![0.0; d];
    for v in sets.iter().flat_map(|s| s.vectors()) {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x: Vec<Vec<f64>> = sets
        .iter()
        .flat_map(|s| s.vectors())
        .map(|v| v.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let cov = Covariance { x: &x, d };
    let trace: f64 = x.iter().map(|r| dot(r, r)).sum::<f64>() / (n - 1) as f64;

    let mut warnings = Vec::new();
    let zero = [vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    if trace <= 0.0 {
        warnings.push(String::from("all vectors identical: zero variance"));
        return Ok(Projection {
            coords: sets.iter().map(|s| vec![[0.0; 3]; s.len()]).collect(),
            components: zero,
            variances: [0.0; 3],
            explained: [0.0; 3],
            iterations: 0,
            warnings,
        });
    }

    let p = d.min(BLOCK);
    let mut rng = SplitMix64::new(START_SEED);
    let mut q: Vec<Vec<f64>> = (0..p).map(|_| (0..d).map(|_| rng.next_f64() - 0.5).collect()).collect();
    orthonormalize(&mut q);

    let mut theta = vec![0.0; p];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut y: Vec<Vec<f64>> = q.iter().map(|c| cov.apply(c)).collect();
        let mut t = vec![0.0; p * p];
        for i in 0..p {
            for j in i..p {
                let v = 0.5 * (dot(&q[i], &y[j]) + dot(&q[j], &y[i]));
                t[i * p + j] = v;
                t[j * p + i] = v;
            }
        }
        let (vals, vecs) = jacobi_eigen(&mut t, p);
        theta = vals;
        q = rotate(&q, &vecs, p);
        y = rotate(&y, &vecs, p);
        let top = theta[0].max(0.0);
        let worst = (0..3)
            .map(|k| {
                let r: Vec<f64> = y[k].iter().zip(&q[k]).map(|(a, b)| a - theta[k] * b).collect();
                libm::sqrt(dot(&r, &r))
            })
            .fold(0.0, f64::max);
        if worst <= TOLERANCE * top {
            converged = true;
            break;
        }
        q = y;
        orthonormalize(&mut q);
    }
    if !converged {
        warnings.push(format!("eigensolver stopped after {MAX_ITERATIONS} iterations without converging"));
    }

    let floor = theta[0] * 1e-12;
    let mut components = zero;
    let mut variances = [0.0; 3];
    let mut rank = 0;
    for k in 0..3 {
        if theta[k] > floor {
            rank += 1;
            variances[k] = theta[k];
            let mut c = q[k].clone();
            orient(&mut c);
            components[k] = c;
        }
    }
    if rank < 3 {
        warnings.push(format!("data rank {rank} is below 3; missing components are zero"));
    }
    let explained = variances.map(|v| v / trace);

    let mut coords = Vec::with_capacity(sets.len());
    let mut rows = x.iter();
    for s in sets {
        let block: Vec<[f64; 3]> = rows
            .by_ref()
            .take(s.len())
            .map(|r| [dot(r, &components[0]), dot(r, &components[1]), dot(r, &components[2])])
            .collect();
        coords.push(block);
    }
    Ok(Projection { coords, components, variances, explained, iterations, warnings })
}

struct Covariance<'a> {
    x: &'a [Vec<f64>],
    d: usize,
}

impl Covariance<'_> {
    /// `Xᵀ X v / (n − 1)`.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for row in self.x {
            let s = dot(row, v);
            for (o, r) in out.iter_mut().zip(row) {
                *o += s * r;
            }
        }
        let scale = 1.0 / (self.x.len() - 1) as f64;
        out.iter_mut().for_each(|o| *o *= scale);
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram–Schmidt, two passes. A column that vanishes is replaced
/// by the first coordinate axis that survives orthogonalization.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    let d = cols.first().map_or(0, Vec::len);
    let mut axis = 0;
    for j in 0..cols.len() {
        let original = libm::sqrt(dot(&cols[j], &cols[j]));
        let mut norm = reduce(cols, j);
        while norm <= 1e-13 * original.max(f64::MIN_POSITIVE) || norm == 0.0 {
            cols[j] = vec![0.0; d];
            cols[j][axis % d] = 1.0;
            axis += 1;
            norm = reduce(cols, j);
        }
        let inv = 1.0 / norm;
        cols[j].iter_mut().for_each(|v| *v *= inv);
    }
}

fn reduce(cols: &mut [Vec<f64>], j: usize) -> f64 {
    let (done, rest) = cols.split_at_mut(j);
    let c = &mut rest[0];
    for _ in 0..2 {
        for prev in done.iter() {
            let r = dot(prev, c);
            c.iter_mut().zip(prev).for_each(|(x, p)| *x -= r * p);
        }
    }
    libm::sqrt(dot(c, c))
}

/// New columns `Σ_i cols[i] · v[i][k]`.
fn rotate(cols: &[Vec<f64>], v: &[f64], p: usize) -> Vec<Vec<f64>> {
    let d = cols[0].len();
    (0..p)
        .map(|k| {
            let mut out = vec![0.0; d];
            for (i, c) in cols.iter().enumerate() {
                let w = v[i * p + k];
                out.iter_mut().zip(c).for_each(|(o, x)| *o += w * x);
            }
            out
        })
        .collect()
}

/// Cyclic Jacobi on a symmetric row-major `p × p` matrix. Returns
/// eigenvalues in descending order and the eigenvectors as columns.
pub(crate) fn jacobi_eigen(a: &mut [f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; p * p];
    for i in 0..p {
        v[i * p + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..p).flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * p + j] * a[i * p + j]).sum();
        let diag: f64 = (0..p).map(|i| a[i * p + i] * a[i * p + i]).sum();
        if off <= 1e-32 * diag || off == 0.0 {
            break;
        }
        for r in 0..p {
            for s in r + 1..p {
                let apq = a[r * p + s];
                if apq == 0.0 {
                    continue;
                }
                let th = (a[s * p + s] - a[r * p + r]) / (2.0 * apq);
                let t = th.signum() / (th.abs() + libm::sqrt(th * th + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let sn = t * c;
                for k in 0..p {
                    let akr = a[k * p + r];
                    let aks = a[k * p + s];
                    a[k * p + r] = c * akr - sn * aks;
                    a[k * p + s] = sn * akr + c * aks;
                }
                for k in 0..p {
                    let ark = a[r * p + k];
                    let ask = a[s * p + k];
                    a[r * p + k] = c * ark - sn * ask;
                    a[s * p + k] = sn * ark + c * ask;
                }
                for k in 0..p {
                    let vkr = v[k * p + r];
                    let vks = v[k * p + s];
                    v[k * p + r] = c * vkr - sn * vks;
                    v[k * p + s] = sn * vkr + c * vks;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| a[j * p + j].total_cmp(&a[i * p + i]));
    let vals = order.iter().map(|&i| a[i * p + i]).collect();
    let mut sorted = vec![0.0; p * p];
    for (k, &i) in order.iter().enumerate() {
        for row in 0..p {
            sorted[row * p + k] = v[row * p + i];
        }
    }
    (vals, sorted)
}

/// Flips `c` so its largest-magnitude entry (first on ties) is positive.
fn orient(c: &mut [f64]) {
    let mut best = 0;
    for (i, x) in c.iter().enumerate() {
        if x.abs() > c[best].abs() {
            best = i;
        }
    }
    if c[best] < 0.0 {
        c.iter_mut().for_each(|x| *x = -*x);
    }
}
