use serde::{Deserialize, Serialize};

use super::{AnalyticsError, CoAppearanceMatrix};
use crate::model::BlockId;

/// Convergence threshold on the change of the eigenvalue estimate and on the
/// eigen-residual between power iterations.
pub const EMBEDDING_TOLERANCE: f64 = 1e-9;
pub const EMBEDDING_MAX_ITERATIONS: usize = 1000;

/// Loadings smaller than this are treated as zero when fixing axis signs.
const SIGN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub block_ids: Vec<BlockId>,
    /// One row of `dims` coordinates per block.
    pub coords: Vec<Vec<f64>>,
    /// Eigenvalues of the principal axes, descending.
    pub eigenvalues: Vec<f64>,
    /// Principal axes as unit vectors over the matrix columns.
    pub axes: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
}

/// Places blocks in `dims` dimensions by PCA of their cosine-normalized
/// co-appearance rows.
pub fn block_embedding(m: &CoAppearanceMatrix, dims: usize) -> Result<Embedding, AnalyticsError> {
    let rows: Vec<Vec<f64>> = m
        .to_dense()
        .into_iter()
        .map(|r| r.into_iter().map(f64::from).collect())
        .collect();
    let mut e = embed_matrix(&rows, dims)?;
    e.block_ids = m.block_ids().to_vec();
    Ok(e)
}

/// The numeric core of [`block_embedding`] over an arbitrary square matrix.
/// `block_ids` of the result is left empty.
pub fn embed_matrix(rows: &[Vec<f64>], dims: usize) -> Result<Embedding, AnalyticsError> {
    let n = rows.len();
    if n < dims + 1 {
        return Err(AnalyticsError::TooFewBlocks {
            needed: dims + 1,
            got: n,
        });
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(AnalyticsError::InvalidMatrix(format!(
            "expected {n}x{n} rows"
        )));
    }

    let mut x: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                vec![0.0; n]
            } else {
                r.iter().map(|v| v / norm).collect()
            }
        })
        .collect();
    for j in 0..n {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        for r in &mut x {
            r[j] -= mean;
        }
    }

    // Sample covariance of the columns.
    let mut cov = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let s = x.iter().map(|r| r[a] * r[b]).sum::<f64>() / (n - 1) as f64;
            cov[a][b] = s;
            cov[b][a] = s;
        }
    }

    let mut eigenvalues = Vec::with_capacity(dims);
    let mut axes = Vec::with_capacity(dims);
    let mut iterations = Vec::with_capacity(dims);
    for axis in 0..dims {
        let (lambda, mut v, iters) = dominant_eigenpair(&cov, axis)?;
        if let Some(first) = v.iter().find(|c| c.abs() > SIGN_EPS) {
            if *first < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
        }
        for a in 0..n {
            for b in 0..n {
                cov[a][b] -= lambda * v[a] * v[b];
            }
        }
        eigenvalues.push(lambda);
        axes.push(v);
        iterations.push(iters);
    }

    let coords = x
        .iter()
        .map(|r| axes.iter().map(|v| dot(r, v)).collect())
        .collect();
    Ok(Embedding {
        block_ids: Vec::new(),
        coords,
        eigenvalues,
        axes,
        iterations,
    })
}

/// Power iteration from the first standard basis vector. Falls through to the
/// next basis vector only when the start lies in the null space.
fn dominant_eigenpair(
    c: &[Vec<f64>],
    axis: usize,
) -> Result<(f64, Vec<f64>, usize), AnalyticsError> {
    let n = c.len();
    let start = (0..n).find(|&k| c.iter().any(|row| row[k] != 0.0));
    let Some(start) = start else {
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        return Ok((0.0, e1, 0));
    };
    let mut v = vec![0.0; n];
    v[start] = 1.0;
    let mut lambda = f64::NAN;
    for iter in 1..=EMBEDDING_MAX_ITERATIONS {
        let w = mat_vec(c, &v);
        let next_lambda = dot(&v, &w);
        let norm = dot(&w, &w).sqrt();
        if norm == 0.0 {
            return Ok((0.0, v, iter));
        }
        let residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - next_lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        let settled = (next_lambda - lambda).abs() < EMBEDDING_TOLERANCE
            && residual < EMBEDDING_TOLERANCE * next_lambda.abs().max(1.0);
        lambda = next_lambda;
        if settled {
            return Ok((lambda, v, iter));
        }
        v = w.into_iter().map(|wi| wi / norm).collect();
    }
    Err(AnalyticsError::NoConvergence {
        axis,
        iterations: EMBEDDING_MAX_ITERATIONS,
    })
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
