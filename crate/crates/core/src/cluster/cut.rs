use super::ward::Merge;

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Number of merges to apply before the cut: the dendrogram is cut just
/// below the merge that follows the largest increase in linkage distance.
/// Equal gaps resolve to the later merge. Without a positive gap every merge
/// is applied.
pub fn merges_below_gap(merges: &[Merge]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for t in 1..merges.len() {
        let gap = merges[t].distance - merges[t - 1].distance;
        if best.is_none_or(|(_, g)| gap >= g) {
            best = Some((t, gap));
        }
    }
    match best {
        Some((t, gap)) if gap > 0.0 => t,
        _ => merges.len(),
    }
}

/// Flat clusters of `n_leaves` leaves cut at the largest linkage gap.
/// Cluster ids are numbered by their smallest leaf; clusters with fewer than
/// `min_cluster_size` leaves map to `None`.
pub fn cut_by_gap(
    merges: &[Merge],
    n_leaves: usize,
    min_cluster_size: usize,
) -> Vec<Option<usize>> {
    let applied = merges_below_gap(merges);
    let mut parent: Vec<usize> = (0..n_leaves + merges.len()).collect();
    for (t, merge) in merges.iter().take(applied).enumerate() {
        let node = n_leaves + t;
        let l = find(&mut parent, merge.left);
        let r = find(&mut parent, merge.right);
        parent[l] = node;
        parent[r] = node;
    }
    let roots: Vec<usize> = (0..n_leaves).map(|i| find(&mut parent, i)).collect();
    let mut sizes = std::collections::HashMap::new();
    for &r in &roots {
        *sizes.entry(r).or_insert(0usize) += 1;
    }
    let mut numbering = std::collections::HashMap::new();
    roots
        .iter()
        .map(|r| {
            if sizes[r] < min_cluster_size {
                return None;
            }
            let next = numbering.len();
            Some(*numbering.entry(*r).or_insert(next))
        })
        .collect()
}
