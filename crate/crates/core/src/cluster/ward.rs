//! Ward agglomerative clustering via the Lance-Williams recurrence.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// One agglomeration step. Leaves are 0..n-1; the cluster created by merge
/// `t` gets id n + t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Square-rooted Ward distance (equals Euclidean distance for two leaves).
    pub distance: f64,
    /// Number of leaves under the new cluster.
    pub size: usize,
}

/// Ward linkage of the rows of `points`.
///
/// Works on squared distances; merging i and j updates every other cluster k
/// by d2(k, ij) = ((n_i + n_k) d2(k, i) + (n_j + n_k) d2(k, j) - n_k d2(i, j))
/// / (n_i + n_j + n_k). Equal distances are broken by the smallest
/// (lower id, higher id) pair. Fewer than two points give no merges.
pub fn ward_linkage(points: &DMatrix<f64>) -> Vec<Merge> {
    let n = points.nrows();
    if n < 2 {
        return Vec::new();
    }
    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = (points.row(i) - points.row(j)).norm_squared();
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
    }
    // slot -> (cluster id, size); a merged cluster reuses the lower slot
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let (lo, hi) = if ids[a] < ids[b] {
                    (ids[a], ids[b])
                } else {
                    (ids[b], ids[a])
                };
                let cand = (d2[(a, b)], lo, hi, a, b);
                let better = match best {
                    None => true,
                    Some(cur) => (cand.0, cand.1, cand.2) < (cur.0, cur.1, cur.2),
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (dist2, lo, hi, a, b) = best.expect("at least two active clusters");
        let (keep, gone) = if a < b { (a, b) } else { (b, a) };
        let (na, nb) = (sizes[a] as f64, sizes[b] as f64);
        for &k in &active {
            if k == a || k == b {
                continue;
            }
            let nk = sizes[k] as f64;
            let updated =
                ((na + nk) * d2[(k, a)] + (nb + nk) * d2[(k, b)] - nk * dist2) / (na + nb + nk);
            let updated = updated.max(0.0);
            d2[(k, keep)] = updated;
            d2[(keep, k)] = updated;
        }
        let size = sizes[a] + sizes[b];
        merges.push(Merge {
            left: lo,
            right: hi,
            distance: dist2.max(0.0).sqrt(),
            size,
        });
        ids[keep] = n + step;
        sizes[keep] = size;
        active.retain(|&s| s != gone);
    }
    merges
}
