use std::fmt::Write as _;

use super::dendrogram::escape_xml;
use super::{export_graph_json, ReportBundle};
use crate::error::{Result, ShieldError};

/// Minimal offline viewer used when no compiled viewer bundle is supplied.
pub const STUB_VIEWER_JS: &str = include_str!("stub_viewer.js");

/// Script inlined as the interactive graph viewer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViewerAssets {
    /// Table and dendrogram only; no script elements at all.
    Disabled,
    Stub,
    Bundle(String),
}

/// Keeps inlined text from closing its `<script>` element early.
fn escape_script(text: &str) -> String {
    text.replace("</", "<\\/")
}

const STYLE: &str = "body{font-family:sans-serif;margin:1.5em;color:#222}\
table{border-collapse:collapse;font-size:12px}\
th,td{border:1px solid #ccc;padding:2px 6px;text-align:left}\
th{background:#f0f0f0}td.num{text-align:right}\
#shield-viewer{border:1px solid #ccc;margin-top:.5em}";

/// Single self-contained HTML page: summary table, dendrogram and, unless
/// disabled, the graph viewer with the graph JSON inlined.
pub fn render_html_report(bundle: &ReportBundle, viewer: &ViewerAssets) -> Result<String> {
    let script = match viewer {
        ViewerAssets::Disabled => None,
        ViewerAssets::Stub => Some(STUB_VIEWER_JS),
        ViewerAssets::Bundle(js) if js.trim().is_empty() => {
            return Err(ShieldError::Config("viewer assets are empty".into()));
        }
        ViewerAssets::Bundle(js) => Some(js.as_str()),
    };
    let meta = &bundle.meta;
    let mut h = String::new();
    h.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    h.push_str("<title>SHIELD adverse event signal report</title>\n");
    let _ = writeln!(h, "<style>{STYLE}</style>\n</head>\n<body>");
    h.push_str("<h1>Adverse event signal report</h1>\n");
    let _ = writeln!(
        h,
        "<p>Arms: {} &middot; k = {} &middot; &gamma; = {} &middot; &tau; = {} &middot; draws = {} &middot; seed = {} &middot; version {}</p>",
        escape_xml(&meta.arm_names.join(", ")),
        meta.k,
        meta.gamma,
        meta.tau,
        meta.draws,
        meta.seed,
        escape_xml(&meta.version)
    );
    if !meta.skipped_terms.is_empty() {
        let _ = writeln!(
            h,
            "<p>Skipped (no embedding): {}</p>",
            escape_xml(&meta.skipped_terms.join(", "))
        );
    }

    h.push_str("<h2>Summary</h2>\n<table id=\"summary\">\n<thead><tr><th>Cluster</th><th>PT</th>");
    let multi = bundle.summary_rows.iter().any(|r| r.stats.is_some());
    let signed = bundle.summary_rows.iter().any(|r| r.sign.is_some());
    if multi {
        h.push_str("<th>Adjusted signal</th><th>CI</th><th>Raw signal ratio</th><th>p-value</th>");
        if signed {
            h.push_str("<th>Sign</th>");
        }
    } else {
        h.push_str("<th>Incidence proportion</th>");
    }
    for arm in &meta.arm_names {
        let _ = write!(h, "<th>{}</th>", escape_xml(arm));
    }
    h.push_str("</tr></thead>\n<tbody>\n");
    for r in &bundle.summary_rows {
        let _ = write!(
            h,
            "<tr><td>{}</td><td>{}</td>",
            escape_xml(&r.cluster),
            escape_xml(&r.pt)
        );
        let cell = |v: &Option<String>| {
            format!(
                "<td class=\"num\">{}</td>",
                escape_xml(v.as_deref().unwrap_or(""))
            )
        };
        if multi {
            for v in [
                &r.adjusted_signal,
                &r.adjusted_ci,
                &r.raw_signal_ratio,
                &r.p_value,
            ] {
                h.push_str(&cell(v));
            }
            if signed {
                h.push_str(&cell(&r.sign.map(|s| format!("{s:+}"))));
            }
        } else {
            h.push_str(&cell(&r.incidence_proportion));
        }
        for inc in &r.incidence {
            let _ = write!(h, "<td class=\"num\">{}</td>", escape_xml(inc));
        }
        h.push_str("</tr>\n");
    }
    h.push_str("</tbody>\n</table>\n");

    h.push_str("<h2>Dendrogram</h2>\n<div id=\"dendrogram\">\n");
    h.push_str(&bundle.dendrogram_svg);
    h.push_str("</div>\n");

    if let Some(js) = script {
        h.push_str("<h2>Network graph</h2>\n<div id=\"shield-viewer\"></div>\n");
        let _ = writeln!(
            h,
            "<script type=\"application/json\" id=\"shield-graph\">{}</script>",
            escape_script(export_graph_json(&bundle.graph)?.trim_end())
        );
        let _ = writeln!(h, "<script>\n{}\n</script>", escape_script(js));
    }
    h.push_str("</body>\n</html>\n");
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{
        AnalysisMode, GraphExport, GraphNode, ReportMeta, SummaryKind, SummaryRow,
    };
    use crate::utility::WeightMode;

    fn bundle(pt: &str) -> ReportBundle {
        let meta = ReportMeta {
            k: 1,
            mode: AnalysisMode::SingleArm,
            arm_names: vec!["Active".into()],
            gamma: 0.95,
            tau: 0.5,
            draws: 20000,
            seed: 42,
            version: "0.1.0".into(),
            summary: SummaryKind::Median,
            weight_mode: WeightMode::Clamped,
            alpha: vec![],
            skipped_terms: vec![],
        };
        ReportBundle {
            summary_rows: vec![SummaryRow {
                pt: pt.into(),
                cluster_id: None,
                cluster: "None".into(),
                incidence: vec!["3/10".into()],
                adjusted_signal: None,
                adjusted_ci: None,
                raw_signal_ratio: None,
                p_value: None,
                sign: None,
                incidence_proportion: Some("0.3000".into()),
                stats: None,
            }],
            graph: GraphExport {
                nodes: vec![GraphNode {
                    id: 0,
                    pt: pt.into(),
                    cluster: None,
                    label: "None".into(),
                    node_weight: 0.09,
                    ic_lower: None,
                    fold_change: None,
                    incidence: vec![],
                }],
                edges: vec![],
                meta: meta.clone(),
            },
            dendrogram_svg: "<svg xmlns=\"http://www.w3.org/2000/svg\"></svg>\n".into(),
            meta,
            labels: vec![],
            hierarchy_labels: vec![],
        }
    }

    #[test]
    fn no_viewer_has_no_scripts() {
        let html = render_html_report(&bundle("Nausea"), &ViewerAssets::Disabled).unwrap();
        assert!(!html.to_lowercase().contains("<script"));
        assert!(html.contains("<td>Nausea</td>"));
        assert!(html.contains("<svg"));
    }

    #[test]
    fn stub_viewer_inlines_graph() {
        let html = render_html_report(&bundle("A</script><b>"), &ViewerAssets::Stub).unwrap();
        assert_eq!(html.matches("<script").count(), 2);
        assert_eq!(html.matches("</script>").count(), 2);
        assert!(html.contains("id=\"shield-graph\""));
        assert!(!html.contains(" src="));
    }

    #[test]
    fn empty_bundle_assets_is_config_error() {
        let r = render_html_report(&bundle("A"), &ViewerAssets::Bundle("  ".into()));
        assert!(matches!(r, Err(ShieldError::Config(_))));
    }
}
