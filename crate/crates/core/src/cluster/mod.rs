//! Spectral embedding of the utility graph followed by Ward clustering and
//! an adaptive dendrogram cut.

mod cut;
mod eigen;
mod laplacian;
mod ward;

pub use cut::{cut_by_gap, merges_below_gap};
pub use eigen::{eigendecompose, estimate_num_clusters, Eigen};
pub use laplacian::{normalized_laplacian, NormalizedLaplacian};
pub use ward::{ward_linkage, Merge};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::utility::UtilityGraph;

/// Row-normalized spectral coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    pub points: DMatrix<f64>,
    /// Rows whose eigenvector coordinates were numerically zero and were
    /// placed on the first axis.
    pub degenerate_rows: Vec<usize>,
}

/// Takes the first `q` eigenvector columns and scales every row to unit
/// length.
pub fn spectral_embedding(vectors: &DMatrix<f64>, q: usize) -> SpectralEmbedding {
    let q = q.clamp(1, vectors.ncols().max(1));
    let n = vectors.nrows();
    let mut points = vectors.columns(0, q.min(vectors.ncols())).into_owned();
    let mut degenerate_rows = Vec::new();
    for i in 0..n {
        let norm = points.row(i).norm();
        if norm < 1e-12 {
            points.row_mut(i).fill(0.0);
            points[(i, 0)] = 1.0;
            degenerate_rows.push(i);
        } else {
            points.row_mut(i).unscale_mut(norm);
        }
    }
    SpectralEmbedding {
        points,
        degenerate_rows,
    }
}

/// Tuning for [`cluster_utility`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    /// Clusters smaller than this are left unassigned.
    pub min_cluster_size: usize,
    /// Eigenvalues below `zero_tol_factor * max eigenvalue` count as zero.
    pub zero_tol_factor: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            min_cluster_size: 2,
            zero_tol_factor: 1e-8,
        }
    }
}

/// Dendrogram over the non-isolated terms with its flat cut.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTree {
    /// Merge records; leaf ids index into `leaves`.
    pub merges: Vec<Merge>,
    /// Term index (in utility-graph order) of each dendrogram leaf.
    pub leaves: Vec<usize>,
    /// Terms with no utility at all.
    pub isolated: Vec<usize>,
    /// Flat cluster per term, `None` for isolated or undersized groups.
    pub flat_assignment: Vec<Option<usize>>,
    /// Spectral embedding width (eigengap estimate).
    pub num_spectral: usize,
    pub eigenvalues: Vec<f64>,
    /// Merges applied by the gap cut.
    pub merges_applied: usize,
}

impl ClusterTree {
    pub fn num_clusters(&self) -> usize {
        self.flat_assignment
            .iter()
            .flatten()
            .max()
            .map_or(0, |c| c + 1)
    }

    /// Terms of each flat cluster, in term order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters()];
        for (i, c) in self.flat_assignment.iter().enumerate() {
            if let Some(c) = c {
                out[*c].push(i);
            }
        }
        out
    }

    /// Term indices under dendrogram node `node` (leaf or merge id).
    pub fn subtree_terms(&self, node: usize) -> Vec<usize> {
        let n = self.leaves.len();
        let mut stack = vec![node];
        let mut out = Vec::new();
        while let Some(id) = stack.pop() {
            if id < n {
                out.push(self.leaves[id]);
            } else {
                let m = &self.merges[id - n];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Laplacian, eigendecomposition, spectral embedding, Ward linkage and gap
/// cut in one pass.
pub fn cluster_utility(graph: &UtilityGraph, config: &ClusterConfig) -> Result<ClusterTree> {
    cluster_matrix(graph.matrix(), config)
}

/// [`cluster_utility`] on a bare utility matrix.
pub fn cluster_matrix(u: &DMatrix<f64>, config: &ClusterConfig) -> Result<ClusterTree> {
    let m = u.nrows();
    let laplacian = normalized_laplacian(u)?;
    let eig = eigendecompose(&laplacian.matrix);
    let lambda_max = eig.values.last().copied().unwrap_or(0.0).abs();
    let zero_tol = (config.zero_tol_factor * lambda_max).max(f64::MIN_POSITIVE);
    let q = estimate_num_clusters(&eig.values, zero_tol);
    let embedding = spectral_embedding(&eig.vectors, q);
    let merges = ward_linkage(&embedding.points);
    let n = laplacian.nodes.len();
    let local = cut_by_gap(&merges, n, config.min_cluster_size);

    let mut flat_assignment = vec![None; m];
    for (leaf, cluster) in local.into_iter().enumerate() {
        flat_assignment[laplacian.nodes[leaf]] = cluster;
    }
    Ok(ClusterTree {
        merges_applied: merges_below_gap(&merges),
        merges,
        leaves: laplacian.nodes,
        isolated: laplacian.isolated,
        flat_assignment,
        num_spectral: q,
        eigenvalues: eig.values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_diagonal(blocks: &[usize], weight: f64) -> DMatrix<f64> {
        let m: usize = blocks.iter().sum();
        let mut u = DMatrix::zeros(m, m);
        let mut start = 0;
        for &size in blocks {
            for i in start..start + size {
                for j in start..start + size {
                    u[(i, j)] = weight;
                }
            }
            start += size;
        }
        u
    }

    #[test]
    fn one_column_embedding_is_unit() {
        let v = DMatrix::from_row_slice(3, 2, &[0.3, 1.0, -0.2, 0.0, 0.9, 0.1]);
        let e = spectral_embedding(&v, 1);
        assert_eq!(e.points.ncols(), 1);
        for i in 0..3 {
            assert!((e.points[(i, 0)].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rows_go_to_first_axis() {
        let v = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0]);
        let e = spectral_embedding(&v, 2);
        assert_eq!(e.degenerate_rows, vec![0]);
        assert_eq!(
            e.points.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 0.0]
        );
        assert!((e.points[(1, 0)] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn disconnected_blocks_collapse_to_points() {
        let u = block_diagonal(&[3, 4], 0.5);
        let lap = normalized_laplacian(&u).unwrap();
        let eig = eigendecompose(&lap.matrix);
        let e = spectral_embedding(&eig.vectors, 2);
        for i in 1..3 {
            assert!((e.points.row(i) - e.points.row(0)).norm() < 1e-9);
        }
        for i in 4..7 {
            assert!((e.points.row(i) - e.points.row(3)).norm() < 1e-9);
        }
        assert!((e.points.row(0) - e.points.row(3)).norm() > 1.0);
    }

    #[test]
    fn three_blocks_end_to_end() {
        let u = block_diagonal(&[3, 2, 4], 0.3);
        let tree = cluster_matrix(&u, &ClusterConfig::default()).unwrap();
        assert_eq!(tree.num_spectral, 3);
        assert_eq!(
            tree.flat_assignment,
            vec![
                Some(0),
                Some(0),
                Some(0),
                Some(1),
                Some(1),
                Some(2),
                Some(2),
                Some(2),
                Some(2)
            ]
        );
        assert_eq!(tree.members()[1], vec![3, 4]);
        assert_eq!(
            tree.subtree_terms(tree.leaves.len() + tree.merges.len() - 1)
                .len(),
            9
        );
    }

    #[test]
    fn isolated_terms_are_unassigned() {
        let mut u = block_diagonal(&[2, 1, 2], 0.4);
        u[(2, 2)] = 0.0;
        let tree = cluster_matrix(&u, &ClusterConfig::default()).unwrap();
        assert_eq!(tree.isolated, vec![2]);
        assert_eq!(tree.flat_assignment[2], None);
        assert_eq!(tree.leaves, vec![0, 1, 3, 4]);
        assert_eq!(tree.num_clusters(), 2);
    }

    #[test]
    fn laplacian_spectrum_in_range() {
        let u = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.2, 0.9, 2.0, 0.0, 0.2, 0.0, 0.5]);
        let tree = cluster_matrix(&u, &ClusterConfig::default()).unwrap();
        assert!(tree
            .eigenvalues
            .iter()
            .all(|&v| (-1e-9..=2.0 + 1e-9).contains(&v)));
    }
}
