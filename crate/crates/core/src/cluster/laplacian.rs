use nalgebra::DMatrix;

use crate::disprop::EPSILON;
use crate::error::{Result, ShieldError};

/// Normalized Laplacian over the non-isolated nodes of a utility matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedLaplacian {
    pub matrix: DMatrix<f64>,
    /// Original index of each row of `matrix`.
    pub nodes: Vec<usize>,
    /// Original indices dropped because their degree was <= eps.
    pub isolated: Vec<usize>,
}

/// L = I - D^{-1/2} U D^{-1/2} with D_ii = sum_j U_ij (self-loops included).
pub fn normalized_laplacian(u: &DMatrix<f64>) -> Result<NormalizedLaplacian> {
    let m = u.nrows();
    let degree: Vec<f64> = (0..m).map(|i| u.row(i).sum()).collect();
    let (nodes, isolated): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| degree[i] > EPSILON);
    if nodes.is_empty() {
        return Err(ShieldError::EmptyGraph);
    }
    let inv_sqrt: Vec<f64> = nodes.iter().map(|&i| 1.0 / degree[i].sqrt()).collect();
    let n = nodes.len();
    let mut matrix = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let norm = u[(nodes[a], nodes[b])] * inv_sqrt[a] * inv_sqrt[b];
            let value = if a == b { 1.0 - norm } else { -norm };
            matrix[(a, b)] = value;
            matrix[(b, a)] = value;
        }
    }
    Ok(NormalizedLaplacian {
        matrix,
        nodes,
        isolated,
    })
}
