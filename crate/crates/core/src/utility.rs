//! Semantic utility graph U = Z S Z.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::disprop::SignalStats;
use crate::embed::SimilarityMatrix;
use crate::error::{Result, ShieldError};
use crate::ingest::IncidenceTable;

/// How per-term signal weights are taken from the posterior for k >= 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Lower bound of the (signed) posterior IC, clamped at 0.
    #[default]
    Clamped,
    /// Lower bound of |IC|; for k > 2 identical to `Clamped`.
    TwoSided,
}

/// Signal weight per term: the conservative posterior IC bound when there is
/// a between-arm contrast, the incidence proportion for a single arm.
pub fn signal_weights(
    table: &IncidenceTable,
    stats: Option<&SignalStats>,
    mode: WeightMode,
) -> Result<Vec<f64>> {
    match (table.num_arms(), stats) {
        (1, _) => {
            let n = table.n_subjects()[0] as f64;
            Ok((0..table.num_terms())
                .map(|i| table.count(i, 0) as f64 / n)
                .collect())
        }
        (_, None) => Err(ShieldError::InvalidArgument(
            "signal statistics are required with more than one arm".into(),
        )),
        (_, Some(stats)) => {
            if stats.len() != table.num_terms() {
                return Err(ShieldError::InvalidArgument(format!(
                    "{} statistics for {} terms",
                    stats.len(),
                    table.num_terms()
                )));
            }
            Ok(stats
                .terms
                .iter()
                .map(|s| match mode {
                    WeightMode::Clamped => s.ic.lower.max(0.0),
                    WeightMode::TwoSided => s.abs_ic_lower.max(0.0),
                })
                .collect())
        }
    }
}

/// Weighted term graph: node weights z and the symmetric utility matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityGraph {
    terms: Vec<String>,
    weights: Vec<f64>,
    matrix: DMatrix<f64>,
}

impl UtilityGraph {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Node intensity U_ii.
    pub fn node_weight(&self, i: usize) -> f64 {
        self.matrix[(i, i)]
    }

    /// Off-diagonal pairs (i < j) with positive utility, row by row.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let m = self.len();
        (0..m).flat_map(move |i| {
            (i + 1..m).filter_map(move |j| {
                let w = self.matrix[(i, j)];
                (w > 0.0).then_some((i, j, w))
            })
        })
    }

    /// Rebuilds the graph from parts; used by tests that need a hand-made U.
    pub fn from_matrix(
        terms: Vec<String>,
        weights: Vec<f64>,
        matrix: DMatrix<f64>,
    ) -> Result<Self> {
        let m = terms.len();
        if weights.len() != m || matrix.nrows() != m || matrix.ncols() != m {
            return Err(ShieldError::InvalidArgument(
                "utility graph dimensions disagree".into(),
            ));
        }
        Ok(Self {
            terms,
            weights,
            matrix,
        })
    }
}

/// U_ij = z_i z_j S_ij. Weights must already be nonnegative.
pub fn utility_matrix(z: &[f64], s: &SimilarityMatrix) -> Result<UtilityGraph> {
    let m = s.len();
    if z.len() != m {
        return Err(ShieldError::InvalidArgument(format!(
            "{} weights for a {m}-term similarity matrix",
            z.len()
        )));
    }
    if let Some(w) = z.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(ShieldError::InvalidArgument(format!(
            "signal weights must be finite and nonnegative, got {w}"
        )));
    }
    let mut matrix = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let u = z[i] * z[j] * s.get(i, j);
            matrix[(i, j)] = u;
            matrix[(j, i)] = u;
        }
    }
    Ok(UtilityGraph {
        terms: s.terms().to_vec(),
        weights: z.to_vec(),
        matrix,
    })
}
