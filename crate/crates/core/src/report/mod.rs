//! Output artifacts: summary table, graph export, dendrogram and HTML report.

mod dendrogram;
mod graph;
mod html;
mod summary;

pub use dendrogram::{cluster_color, render_dendrogram_svg, LeafBars};
pub use graph::{export_graph_json, ArmIncidence, GraphEdge, GraphExport, GraphNode};
pub use html::{render_html_report, ViewerAssets, STUB_VIEWER_JS};
pub use summary::{
    adjusted_ic, build_summary, write_summary_csv, RowStats, SummaryRow, UNCLUSTERED,
};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShieldError};
use crate::label::ClusterLabel;
use crate::utility::WeightMode;

/// Which posterior IC summary is reported as the adjusted signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryKind {
    #[default]
    Median,
    Mean,
}

/// Multiplicative observed/expected ratio for an IC in bits.
pub fn fold_change(ic: f64) -> f64 {
    ic.exp2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalysisMode {
    SingleArm,
    TwoArm,
    MultiArm,
}

impl AnalysisMode {
    pub fn for_arms(k: usize) -> Self {
        match k {
            0 | 1 => AnalysisMode::SingleArm,
            2 => AnalysisMode::TwoArm,
            _ => AnalysisMode::MultiArm,
        }
    }
}

/// Run parameters echoed into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub k: usize,
    pub mode: AnalysisMode,
    pub arm_names: Vec<String>,
    pub gamma: f64,
    pub tau: f64,
    pub draws: usize,
    pub seed: u64,
    pub version: String,
    pub summary: SummaryKind,
    pub weight_mode: WeightMode,
    /// Hyperprior actually used (empty for single-arm runs).
    pub alpha: Vec<f64>,
    /// Input terms dropped for lack of an embedding.
    pub skipped_terms: Vec<String>,
}

/// Label of an internal dendrogram node; `cluster_id` holds the node id.
pub type HierarchyLabel = ClusterLabel;

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub meta: ReportMeta,
    pub clusters: Vec<ClusterLabel>,
    pub hierarchy: Vec<HierarchyLabel>,
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub summary_rows: Vec<SummaryRow>,
    pub graph: GraphExport,
    pub dendrogram_svg: String,
    pub meta: ReportMeta,
    pub labels: Vec<ClusterLabel>,
    pub hierarchy_labels: Vec<HierarchyLabel>,
}

impl ReportBundle {
    pub fn summary_document(&self) -> SummaryDocument {
        SummaryDocument {
            meta: self.meta.clone(),
            clusters: self.labels.clone(),
            hierarchy: self.hierarchy_labels.clone(),
            rows: self.summary_rows.clone(),
        }
    }
}

/// Pretty JSON with sorted object keys, shortest round-trip floats and a
/// trailing LF.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default map is ordered, so going through Value sorts keys
    let value = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| ShieldError::io(format!("writing {}", path.display()), e))
}

/// Writes every artifact except `run_meta.json` into `dir`, creating it if
/// needed.
pub fn write_bundle(bundle: &ReportBundle, html: &str, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| ShieldError::io(format!("creating {}", dir.display()), e))?;
    let mut csv = Vec::new();
    write_summary_csv(&bundle.summary_rows, &bundle.meta.arm_names, &mut csv)?;
    write_file(&dir.join("summary.csv"), &csv)?;
    write_file(
        &dir.join("summary.json"),
        canonical_json(&bundle.summary_document())?.as_bytes(),
    )?;
    write_file(
        &dir.join("graph.json"),
        export_graph_json(&bundle.graph)?.as_bytes(),
    )?;
    write_file(
        &dir.join("dendrogram.svg"),
        bundle.dendrogram_svg.as_bytes(),
    )?;
    write_file(&dir.join("report.html"), html.as_bytes())
}
