//! Static dendrogram with per-leaf effect bars, as standalone SVG.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::cluster::ClusterTree;
use crate::label::ClusterLabel;

const ROW_HEIGHT: f64 = 18.0;
const MARGIN: f64 = 20.0;
const TREE_WIDTH: f64 = 260.0;
const LABEL_WIDTH: f64 = 300.0;
const BAR_WIDTH: f64 = 240.0;
const HEADER: f64 = 40.0;
const UNCLUSTERED_COLOR: &str = "#9e9e9e";
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#393b79",
];

/// Bar value per term plus an optional marked bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafBars {
    /// Indexed by term, same order as the tree's term indices.
    pub values: Vec<f64>,
    pub lower: Vec<Option<f64>>,
    /// Axis caption, e.g. "signed IC (bits)".
    pub caption: String,
}

pub fn cluster_color(cluster: Option<usize>) -> &'static str {
    cluster.map_or(UNCLUSTERED_COLOR, |c| PALETTE[c % PALETTE.len()])
}

pub(crate) fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Leaf ids in drawing order (left child first, depth first from the root).
fn leaf_order(tree: &ClusterTree) -> Vec<usize> {
    let n = tree.leaves.len();
    if tree.merges.is_empty() {
        return (0..n).collect();
    }
    let mut out = Vec::with_capacity(n);
    let mut stack = vec![n + tree.merges.len() - 1];
    while let Some(id) = stack.pop() {
        if id < n {
            out.push(id);
        } else {
            let m = &tree.merges[id - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    out
}

/// Renders the dendrogram of the clustered terms. Branches below the cut
/// take their flat cluster's color; bars extend from a zero axis, leftward
/// for negative values, with the lower bound drawn as a tick.
pub fn render_dendrogram_svg(
    tree: &ClusterTree,
    terms: &[String],
    bars: &LeafBars,
    labels: &[ClusterLabel],
) -> String {
    let n = tree.leaves.len();
    let order = leaf_order(tree);
    let mut y_of = vec![0.0; n + tree.merges.len()];
    for (row, &leaf) in order.iter().enumerate() {
        y_of[leaf] = HEADER + ROW_HEIGHT * (row as f64 + 0.5);
    }
    let max_dist = tree
        .merges
        .iter()
        .map(|m| m.distance)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let tree_right = MARGIN + TREE_WIDTH;
    let x_of_dist = |d: f64| tree_right - TREE_WIDTH * (d / max_dist);
    let mut x_of = vec![tree_right; n + tree.merges.len()];

    // color of every node: a cluster color when all its leaves share one
    // flat cluster and the node lies below the cut
    let mut color: Vec<Option<usize>> = tree
        .leaves
        .iter()
        .map(|&t| tree.flat_assignment[t])
        .collect();
    for (t, m) in tree.merges.iter().enumerate() {
        let (l, r) = (color[m.left], color[m.right]);
        color.push(if t < tree.merges_applied && l == r {
            l
        } else {
            None
        });
    }

    let names: HashMap<usize, &str> = labels
        .iter()
        .map(|l| (l.cluster_id, l.label.as_str()))
        .collect();
    let width = tree_right + LABEL_WIDTH + BAR_WIDTH + MARGIN;
    let height = HEADER + ROW_HEIGHT * n.max(1) as f64 + MARGIN;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-weight="bold">Ward linkage distance</text>"#,
        MARGIN,
        HEADER - 16.0
    );

    let mut links = String::new();
    for (t, m) in tree.merges.iter().enumerate() {
        let id = n + t;
        let x = x_of_dist(m.distance);
        x_of[id] = x;
        let (yl, yr) = (y_of[m.left], y_of[m.right]);
        y_of[id] = 0.5 * (yl + yr);
        let stroke = if color[id].is_some() {
            cluster_color(color[id])
        } else {
            UNCLUSTERED_COLOR
        };
        let _ = writeln!(
            links,
            r#"<path class="link" d="M{:.2},{:.2}H{:.2}V{:.2}H{:.2}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#,
            x_of[m.left], yl, x, yr, x_of[m.right]
        );
    }
    svg.push_str(&links);

    let bar_left = tree_right + LABEL_WIDTH;
    let magnitude = bars
        .values
        .iter()
        .chain(bars.lower.iter().flatten())
        .map(|v| v.abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let any_negative = bars
        .values
        .iter()
        .chain(bars.lower.iter().flatten())
        .any(|&v| v < 0.0);
    let (zero_x, scale) = if any_negative {
        (bar_left + BAR_WIDTH / 2.0, BAR_WIDTH / 2.0 / magnitude)
    } else {
        (bar_left, BAR_WIDTH / magnitude)
    };
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-weight="bold">{}</text>"#,
        bar_left,
        HEADER - 16.0,
        escape_xml(&bars.caption)
    );
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{zero_x:.2}" y1="{:.2}" x2="{zero_x:.2}" y2="{:.2}" stroke="black"/>"#,
        HEADER - 4.0,
        height - MARGIN
    );

    for &leaf in &order {
        let term = tree.leaves[leaf];
        let y = y_of[leaf];
        let cluster = tree.flat_assignment[term];
        let fill = cluster_color(cluster);
        let name = escape_xml(&terms[term]);
        let group = cluster
            .and_then(|c| names.get(&c).copied())
            .unwrap_or("None");
        let _ = writeln!(
            svg,
            r#"<text class="leaf" x="{:.2}" y="{:.2}" fill="{fill}"><title>{}</title>{name}</text>"#,
            tree_right + 6.0,
            y + 4.0,
            escape_xml(group)
        );
        let v = bars.values[term];
        let len = v.abs() * scale;
        let x = if v < 0.0 { zero_x - len } else { zero_x };
        let _ = writeln!(
            svg,
            r#"<rect class="bar" data-term="{name}" x="{x:.2}" y="{:.2}" width="{len:.2}" height="{:.2}" fill="{fill}" fill-opacity="0.7"/>"#,
            y - ROW_HEIGHT * 0.35,
            ROW_HEIGHT * 0.7
        );
        if let Some(lo) = bars.lower[term] {
            let lx = zero_x + lo * scale;
            let _ = writeln!(
                svg,
                r#"<line class="lower" data-term="{name}" x1="{lx:.2}" y1="{:.2}" x2="{lx:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
                y - ROW_HEIGHT * 0.45,
                y + ROW_HEIGHT * 0.45
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}
