use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{fold_change, SummaryKind};
use crate::disprop::{SignalStats, TermSignal};
use crate::error::{Result, ShieldError};
use crate::ingest::IncidenceTable;
use crate::label::ClusterLabel;

/// Label printed for terms outside every cluster.
pub const UNCLUSTERED: &str = "None";

/// Unrounded statistics behind a summary row (k >= 2 only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowStats {
    pub raw_ic: f64,
    pub g_stat: f64,
    pub p_value: f64,
    pub ic_adjusted: f64,
    pub ic_lower: f64,
    pub ic_upper: f64,
    pub ic_mean: f64,
    pub ic_median: f64,
    pub rr_median: Vec<f64>,
    pub rr_lower: Vec<f64>,
    pub rr_upper: Vec<f64>,
}

/// One line of the summary table. Text fields use the published layout:
/// signals to 2 decimals, p-values to 4, incidence as `c/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub pt: String,
    pub cluster_id: Option<usize>,
    pub cluster: String,
    pub incidence: Vec<String>,
    pub adjusted_signal: Option<String>,
    pub adjusted_ci: Option<String>,
    pub raw_signal_ratio: Option<String>,
    pub p_value: Option<String>,
    pub sign: Option<i8>,
    /// Single-arm runs only.
    pub incidence_proportion: Option<String>,
    pub stats: Option<RowStats>,
}

/// The IC value reported as "adjusted".
pub fn adjusted_ic(signal: &TermSignal, kind: SummaryKind) -> f64 {
    match kind {
        SummaryKind::Median => signal.ic.median,
        SummaryKind::Mean => signal.ic.mean,
    }
}

fn check_finite(pt: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ShieldError::Internal(format!(
            "non-finite statistic for `{pt}`"
        )))
    }
}

/// One row per term in table order.
pub fn build_summary(
    table: &IncidenceTable,
    stats: Option<&SignalStats>,
    assignment: &[Option<usize>],
    labels: &[ClusterLabel],
    kind: SummaryKind,
) -> Result<Vec<SummaryRow>> {
    let m = table.num_terms();
    if assignment.len() != m || stats.is_some_and(|s| s.len() != m) {
        return Err(ShieldError::Internal(
            "summary inputs cover different term sets".into(),
        ));
    }
    if stats.is_none() && table.num_arms() > 1 {
        return Err(ShieldError::Internal(
            "multi-arm summary without statistics".into(),
        ));
    }
    let names: HashMap<usize, &str> = labels
        .iter()
        .map(|l| (l.cluster_id, l.label.as_str()))
        .collect();
    let mut rows = Vec::with_capacity(m);
    for (i, &cluster_id) in assignment.iter().enumerate() {
        let pt = table.pt_names()[i].clone();
        let cluster = match cluster_id {
            Some(c) => names
                .get(&c)
                .map(|s| s.to_string())
                .ok_or_else(|| ShieldError::Internal(format!("cluster {c} has no label")))?,
            None => UNCLUSTERED.to_string(),
        };
        let incidence = table
            .row(i)
            .iter()
            .zip(table.n_subjects())
            .map(|(c, n)| format!("{c}/{n}"))
            .collect();
        let mut row = SummaryRow {
            pt,
            cluster_id,
            cluster,
            incidence,
            adjusted_signal: None,
            adjusted_ci: None,
            raw_signal_ratio: None,
            p_value: None,
            sign: None,
            incidence_proportion: None,
            stats: None,
        };
        match stats {
            None => {
                let p = table.count(i, 0) as f64 / table.n_subjects()[0] as f64;
                row.incidence_proportion = Some(format!("{p:.4}"));
            }
            Some(stats) => {
                let s = &stats.terms[i];
                let adj = adjusted_ic(s, kind);
                check_finite(
                    &row.pt,
                    &[s.raw_ic, s.g_stat, s.p_value, adj, s.ic.lower, s.ic.upper],
                )?;
                row.adjusted_signal = Some(format!("{:.2}", fold_change(adj)));
                row.adjusted_ci = Some(format!(
                    "({:.2}, {:.2})",
                    fold_change(s.ic.lower),
                    fold_change(s.ic.upper)
                ));
                row.raw_signal_ratio = Some(format!("{:.2}", fold_change(s.raw_ic)));
                row.p_value = Some(format!("{:.4}", s.p_value));
                row.sign = s.sign;
                let rr_median: Vec<f64> = s.rr.iter().map(|r| r.median).collect();
                check_finite(&row.pt, &rr_median)?;
                row.stats = Some(RowStats {
                    raw_ic: s.raw_ic,
                    g_stat: s.g_stat,
                    p_value: s.p_value,
                    ic_adjusted: adj,
                    ic_lower: s.ic.lower,
                    ic_upper: s.ic.upper,
                    ic_mean: s.ic.mean,
                    ic_median: s.ic.median,
                    rr_median,
                    rr_lower: s.rr.iter().map(|r| r.lower).collect(),
                    rr_upper: s.rr.iter().map(|r| r.upper).collect(),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Writes the summary as CSV with one column per arm.
pub fn write_summary_csv<W: Write>(
    rows: &[SummaryRow],
    arm_names: &[String],
    sink: W,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    let multi = rows
        .first()
        .is_none_or(|r| r.incidence_proportion.is_none());
    let signed = rows.iter().any(|r| r.sign.is_some());
    let mut header = vec!["cluster".to_string(), "pt".to_string()];
    if multi {
        header.extend(
            [
                "adjusted_signal",
                "adjusted_ci",
                "raw_signal_ratio",
                "p_value",
            ]
            .map(String::from),
        );
        if signed {
            header.push("sign".into());
        }
        header.extend(arm_names.iter().map(|a| format!("rr_median {a}")));
    } else {
        header.push("incidence_proportion".into());
    }
    header.extend(arm_names.iter().cloned());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.cluster.clone(), r.pt.clone()];
        if multi {
            for v in [
                &r.adjusted_signal,
                &r.adjusted_ci,
                &r.raw_signal_ratio,
                &r.p_value,
            ] {
                rec.push(v.clone().unwrap_or_default());
            }
            if signed {
                rec.push(r.sign.map_or(String::new(), |s| format!("{s:+}")));
            }
            if let Some(st) = &r.stats {
                rec.extend(st.rr_median.iter().map(|v| format!("{v:.2}")));
            }
        } else {
            rec.push(r.incidence_proportion.clone().unwrap_or_default());
        }
        rec.extend(r.incidence.iter().cloned());
        w.write_record(&rec)?;
    }
    w.flush()
        .map_err(|e| ShieldError::io("writing summary csv", e))
}
