use log::warn;

use super::EPSILON;
use crate::error::{Result, ShieldError};
use crate::ingest::IncidenceTable;

/// Dirichlet prior over the arm distribution of an event.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPrior {
    alpha: Vec<f64>,
    alpha0: f64,
}

impl DirichletPrior {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(ShieldError::InvalidArgument(
                "empty Dirichlet parameter".into(),
            ));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(ShieldError::InvalidArgument(format!(
                "Dirichlet parameters must be positive, got {a}"
            )));
        }
        let alpha0 = alpha.iter().sum();
        Ok(Self { alpha, alpha0 })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Total concentration, the sum of the components.
    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    /// Prior mean arm distribution alpha / alpha0.
    pub fn mean(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a / self.alpha0).collect()
    }
}

/// Clamps applied to the method-of-moments estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperpriorBounds {
    pub alpha0_min: f64,
    pub alpha0_max: f64,
    pub alpha_floor: f64,
}

impl Default for HyperpriorBounds {
    fn default() -> Self {
        Self {
            alpha0_min: 0.5,
            alpha0_max: 1000.0,
            alpha_floor: 0.1,
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Method-of-moments Dirichlet hyperprior from the per-term arm shares.
///
/// Each arm yields a concentration candidate mu(1 - mu) / var - 1 from the
/// mean and unbiased variance of c_ij / (T_i + eps) across terms. The
/// median candidate is clamped to `[alpha0_min, alpha0_max]`, spread by the
/// mean shares and floored per component. Arms with zero variance give no
/// candidate; with none left the concentration is `alpha0_max`.
pub fn estimate_hyperprior(
    table: &IncidenceTable,
    bounds: HyperpriorBounds,
) -> Result<DirichletPrior> {
    let m = table.num_terms();
    let k = table.num_arms();
    if m < 2 {
        return Err(ShieldError::InsufficientData(format!(
            "hyperprior estimation needs at least 2 terms, got {m}"
        )));
    }
    let shares: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let t = table.row_total(i) as f64;
            table
                .row(i)
                .iter()
                .map(|&c| c as f64 / (t + EPSILON))
                .collect()
        })
        .collect();

    let mut means = Vec::with_capacity(k);
    let mut candidates = Vec::with_capacity(k);
    for j in 0..k {
        let mean = shares.iter().map(|r| r[j]).sum::<f64>() / m as f64;
        let var = shares.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        means.push(mean);
        if var > 0.0 {
            let candidate = mean * (1.0 - mean) / var - 1.0;
            if candidate.is_finite() {
                candidates.push(candidate);
            }
        }
    }

    let alpha0 = if candidates.is_empty() {
        warn!(
            "arm shares have zero variance across terms; using concentration {}",
            bounds.alpha0_max
        );
        bounds.alpha0_max
    } else {
        median(candidates).clamp(bounds.alpha0_min, bounds.alpha0_max)
    };
    let alpha = means
        .iter()
        .map(|mu| (alpha0 * mu).max(bounds.alpha_floor))
        .collect();
    DirichletPrior::new(alpha)
}
