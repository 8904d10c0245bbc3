use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::summary::{adjusted_ic, UNCLUSTERED};
use super::{canonical_json, fold_change, ReportMeta, SummaryKind};
use crate::disprop::SignalStats;
use crate::error::{Result, ShieldError};
use crate::ingest::IncidenceTable;
use crate::label::ClusterLabel;
use crate::utility::UtilityGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmIncidence {
    pub c: u64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub pt: String,
    pub cluster: Option<usize>,
    pub label: String,
    /// U_ii.
    pub node_weight: f64,
    /// Lower posterior IC bound; absent for single-arm runs.
    pub ic_lower: Option<f64>,
    /// 2^adjusted IC; absent for single-arm runs.
    pub fold_change: Option<f64>,
    pub incidence: Vec<ArmIncidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Node/edge export of the utility graph for the interactive viewer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub meta: ReportMeta,
}

impl GraphExport {
    /// Every term becomes a node (ids in table order); only pairs with
    /// positive utility become edges.
    pub fn build(
        graph: &UtilityGraph,
        table: &IncidenceTable,
        stats: Option<&SignalStats>,
        assignment: &[Option<usize>],
        labels: &[ClusterLabel],
        kind: SummaryKind,
        meta: ReportMeta,
    ) -> Result<Self> {
        let m = graph.len();
        if table.num_terms() != m || assignment.len() != m || stats.is_some_and(|s| s.len() != m) {
            return Err(ShieldError::Internal(
                "graph inputs cover different term sets".into(),
            ));
        }
        let names: HashMap<usize, &str> = labels
            .iter()
            .map(|l| (l.cluster_id, l.label.as_str()))
            .collect();
        let nodes = (0..m)
            .map(|i| {
                let signal = stats.map(|s| &s.terms[i]);
                GraphNode {
                    id: i,
                    pt: graph.terms()[i].clone(),
                    cluster: assignment[i],
                    label: assignment[i]
                        .and_then(|c| names.get(&c).copied())
                        .unwrap_or(UNCLUSTERED)
                        .to_string(),
                    node_weight: graph.node_weight(i),
                    ic_lower: signal.map(|s| s.ic.lower),
                    fold_change: signal.map(|s| fold_change(adjusted_ic(s, kind))),
                    incidence: table
                        .row(i)
                        .iter()
                        .zip(table.n_subjects())
                        .map(|(&c, &n)| ArmIncidence { c, n })
                        .collect(),
                }
            })
            .collect();
        let edges = graph
            .edges()
            .map(|(source, target, weight)| GraphEdge {
                source,
                target,
                weight,
            })
            .collect();
        Ok(Self { nodes, edges, meta })
    }
}

/// Canonical JSON text of `graph`.
pub fn export_graph_json(graph: &GraphExport) -> Result<String> {
    canonical_json(graph)
}
