//! Cluster naming: an LLM-backed labeler with an offline medoid fallback.

mod llm;

pub use llm::{build_prompt, sanitize_label, ChatClient, HttpChatClient, LlmConfig, RetryPolicy};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::embed::SimilarityMatrix;
use crate::error::{Result, ShieldError};

/// Longest label kept, in characters.
pub const MAX_LABEL_CHARS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Llm,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabel {
    pub cluster_id: usize,
    pub label: String,
    pub source: LabelSource,
    pub member_pts: Vec<String>,
}

pub(crate) fn truncate_chars(s: &str, max: usize) -> String {
    s.chars().take(max).collect()
}

/// Offline label: the medoid term (highest mean similarity to the other
/// members, lexicographically smallest on ties), prefixed with "≈ ".
pub fn label_cluster_fallback(
    cluster_id: usize,
    member_pts: &[String],
    s: &SimilarityMatrix,
) -> Result<ClusterLabel> {
    if member_pts.is_empty() {
        return Err(ShieldError::InvalidArgument(
            "cluster has no members".into(),
        ));
    }
    let idx = member_pts
        .iter()
        .map(|pt| {
            s.index_of(pt).ok_or_else(|| {
                ShieldError::InvalidArgument(format!("`{pt}` is not in the similarity matrix"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, &String)> = None;
    for (a, pt) in member_pts.iter().enumerate() {
        let others = idx.len() - 1;
        let score = if others == 0 {
            0.0
        } else {
            idx.iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(_, &j)| s.get(idx[a], j))
                .sum::<f64>()
                / others as f64
        };
        best = match best {
            Some((bs, bpt)) if bs > score || (bs == score && bpt <= pt) => Some((bs, bpt)),
            _ => Some((score, pt)),
        };
    }
    let medoid = best.map(|(_, pt)| pt.as_str()).unwrap_or_default();
    Ok(ClusterLabel {
        cluster_id,
        label: truncate_chars(&format!("≈ {medoid}"), MAX_LABEL_CHARS),
        source: LabelSource::Fallback,
        member_pts: member_pts.to_vec(),
    })
}

/// Asks `client` for a label, retrying per `retry`; on final failure falls
/// back to [`label_cluster_fallback`].
pub fn label_cluster_llm(
    cluster_id: usize,
    member_pts: &[String],
    client: &dyn ChatClient,
    retry: &RetryPolicy,
    s: &SimilarityMatrix,
) -> Result<ClusterLabel> {
    if member_pts.is_empty() {
        return Err(ShieldError::InvalidArgument(
            "cluster has no members".into(),
        ));
    }
    let prompt = build_prompt(member_pts);
    let mut delay = retry.base_delay;
    for attempt in 0..=retry.retries {
        if attempt > 0 {
            std::thread::sleep(delay);
            delay *= 2;
        }
        match client.complete(&prompt) {
            Ok(reply) => {
                if let Some(label) = sanitize_label(&reply) {
                    return Ok(ClusterLabel {
                        cluster_id,
                        label,
                        source: LabelSource::Llm,
                        member_pts: member_pts.to_vec(),
                    });
                }
                warn!(
                    "cluster {cluster_id}: empty label from model (attempt {})",
                    attempt + 1
                );
            }
            Err(e) => warn!(
                "cluster {cluster_id}: label request failed (attempt {}): {e}",
                attempt + 1
            ),
        }
    }
    label_cluster_fallback(cluster_id, member_pts, s)
}

/// Labeling strategy for a run.
#[derive(Clone)]
pub enum Labeler {
    Offline,
    Llm {
        client: Arc<dyn ChatClient>,
        retry: RetryPolicy,
        max_in_flight: usize,
    },
}

impl std::fmt::Debug for Labeler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Labeler::Offline => f.write_str("Offline"),
            Labeler::Llm { max_in_flight, .. } => f
                .debug_struct("Llm")
                .field("max_in_flight", max_in_flight)
                .finish(),
        }
    }
}

/// Labels every `(cluster_id, members)` group. LLM requests run on up to
/// `max_in_flight` worker threads; results keep the input order.
pub fn label_clusters(
    groups: &[(usize, Vec<String>)],
    labeler: &Labeler,
    s: &SimilarityMatrix,
) -> Result<Vec<ClusterLabel>> {
    match labeler {
        Labeler::Offline => groups
            .iter()
            .map(|(id, members)| label_cluster_fallback(*id, members, s))
            .collect(),
        Labeler::Llm {
            client,
            retry,
            max_in_flight,
        } => {
            let next = AtomicUsize::new(0);
            let slots: Mutex<Vec<Option<Result<ClusterLabel>>>> =
                Mutex::new((0..groups.len()).map(|_| None).collect());
            let workers = (*max_in_flight).clamp(1, groups.len().max(1));
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let g = next.fetch_add(1, Ordering::Relaxed);
                        let Some((id, members)) = groups.get(g) else {
                            break;
                        };
                        let out = label_cluster_llm(*id, members, client.as_ref(), retry, s);
                        slots.lock().unwrap()[g] = Some(out);
                    });
                }
            });
            slots
                .into_inner()
                .unwrap()
                .into_iter()
                .map(|r| {
                    r.unwrap_or_else(|| Err(ShieldError::Internal("label worker lost".into())))
                })
                .collect()
        }
    }
}
