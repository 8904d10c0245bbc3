use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenpairs sorted by ascending eigenvalue; column r of `vectors` pairs
/// with `values[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Symmetric eigendecomposition with a fixed sign convention: the
/// largest-magnitude component of every eigenvector (first one on ties) is
/// positive.
pub fn eigendecompose(l: &DMatrix<f64>) -> Eigen {
    let n = l.nrows();
    if n == 0 {
        return Eigen {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let sym = SymmetricEigen::new(l.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        sym.eigenvalues[a]
            .total_cmp(&sym.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&r| sym.eigenvalues[r]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = sym.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, dst)] = flip * col[i];
        }
    }
    Eigen { values, vectors }
}

/// Number of clusters suggested by the spectrum: the count of eigenvalues
/// below `zero_tol`, clamped to [1, n - 1]. When none is that small, the
/// position of the largest relative gap among the first min(n, 20)
/// eigenvalues is used instead.
pub fn estimate_num_clusters(eigenvalues: &[f64], zero_tol: f64) -> usize {
    let n = eigenvalues.len();
    let upper = n.saturating_sub(1).max(1);
    let near_zero = eigenvalues.iter().filter(|&&v| v < zero_tol).count();
    if near_zero > 0 {
        return near_zero.clamp(1, upper);
    }
    let head = &eigenvalues[..n.min(20)];
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..head.len().saturating_sub(1) {
        let gap = (head[i + 1] - head[i]) / head[i + 1].abs().max(f64::MIN_POSITIVE);
        if gap > best.1 {
            best = (i, gap);
        }
    }
    (best.0 + 1).clamp(1, upper)
}
