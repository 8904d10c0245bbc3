//! Disproportionality statistics: expected counts, the information
//! component (IC), the G-test, two-arm direction and the shrunken
//! posterior summaries.

mod chisq;
mod gamma;
mod hyperprior;
mod posterior;

pub use chisq::{chi_square_sf, ln_gamma, regularized_gamma_q};
pub use gamma::sample_gamma;
pub use hyperprior::{estimate_hyperprior, DirichletPrior, HyperpriorBounds};
pub use posterior::{
    posterior_samples, posterior_summaries, substream_seed, PosteriorSamples, Summary,
};

use crate::error::{Result, ShieldError};
use crate::ingest::IncidenceTable;
use crate::parallel::{map_indexed, Execution};

/// Additive guard in ratios and shares.
pub const EPSILON: f64 = 1e-12;

/// Expected counts under proportional allocation, E_ij = T_i N_j / N_tot.
/// Row-major m×k.
pub fn expected_counts(table: &IncidenceTable) -> Vec<Vec<f64>> {
    let total = table.total_subjects() as f64;
    (0..table.num_terms())
        .map(|i| {
            let rate = table.row_total(i) as f64 / total;
            table
                .n_subjects()
                .iter()
                .map(|&n| rate * n as f64)
                .collect()
        })
        .collect()
}

/// Raw IC per term with the pointwise terms that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RawIc {
    /// IC_i in bits.
    pub ic: Vec<f64>,
    /// log2((c + eps) / (E + eps)), row-major m×k.
    pub pmi: Vec<Vec<f64>>,
}

/// IC_i = sum_j c_ij / (T_i + eps) * log2((c_ij + eps) / (E_ij + eps)),
/// i.e. the KL divergence in bits between the observed arm distribution of
/// the event and the proportional one. Zero cells contribute exactly 0.
pub fn raw_ic(table: &IncidenceTable, expected: &[Vec<f64>]) -> RawIc {
    let mut ic = Vec::with_capacity(table.num_terms());
    let mut pmi = Vec::with_capacity(table.num_terms());
    for (i, e_row) in expected.iter().enumerate() {
        let t = table.row_total(i) as f64;
        let mut value = 0.0;
        let mut row = Vec::with_capacity(e_row.len());
        for (&c, &e) in table.row(i).iter().zip(e_row) {
            let c = c as f64;
            let point = ((c + EPSILON) / (e + EPSILON)).log2();
            if c > 0.0 {
                value += c / (t + EPSILON) * point;
            }
            row.push(point);
        }
        ic.push(value);
        pmi.push(row);
    }
    RawIc { ic, pmi }
}

/// Likelihood-ratio statistic and its chi-square p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTest {
    pub g_stat: f64,
    pub p_value: f64,
}

/// G_i = 2 T_i IC_i ln 2, referred to chi-square with k - 1 degrees of freedom.
pub fn g_test(table: &IncidenceTable, ic: &[f64]) -> Result<Vec<GTest>> {
    let k = table.num_arms();
    if k < 2 {
        return Err(ShieldError::NotApplicable(
            "the G-test needs at least two arms".into(),
        ));
    }
    let df = (k - 1) as u32;
    ic.iter()
        .enumerate()
        .map(|(i, &value)| {
            let g = (2.0 * table.row_total(i) as f64 * value * std::f64::consts::LN_2).max(0.0);
            Ok(GTest {
                g_stat: g,
                p_value: chi_square_sf(g, df)?,
            })
        })
        .collect()
}

/// +1 when the second arm has more events than expected, otherwise -1.
pub fn sign_two_arm(table: &IncidenceTable, expected: &[Vec<f64>]) -> Result<Vec<i8>> {
    if table.num_arms() != 2 {
        return Err(ShieldError::NotApplicable(format!(
            "direction is defined for two arms, table has {}",
            table.num_arms()
        )));
    }
    Ok(expected
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if table.count(i, 1) as f64 > e[1] {
                1
            } else {
                -1
            }
        })
        .collect())
}

/// Settings for [`analyze`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispropConfig {
    pub draws: usize,
    pub seed: u64,
    /// Credible level.
    pub gamma: f64,
    pub bounds: HyperpriorBounds,
    pub execution: Execution,
}

impl Default for DispropConfig {
    fn default() -> Self {
        Self {
            draws: 20_000,
            seed: 42,
            gamma: 0.95,
            bounds: HyperpriorBounds::default(),
            execution: Execution::default(),
        }
    }
}

/// All statistics for one term.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSignal {
    pub raw_ic: f64,
    pub g_stat: f64,
    pub p_value: f64,
    /// Only for two arms.
    pub sign: Option<i8>,
    /// Posterior IC (signed when k = 2).
    pub ic: Summary,
    /// Lower bound of |IC|; equals `ic.lower` when k > 2.
    pub abs_ic_lower: f64,
    /// Posterior relative risk per arm.
    pub rr: Vec<Summary>,
    pub expected: Vec<f64>,
}

/// Per-term statistics for a whole table plus the prior that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalStats {
    pub terms: Vec<TermSignal>,
    pub prior: DirichletPrior,
    pub gamma: f64,
}

impl SignalStats {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Runs every disproportionality step over a filtered table with k >= 2.
/// Per-term sampling uses independent RNG substreams, so the result is the
/// same for any execution mode.
pub fn analyze(table: &IncidenceTable, config: &DispropConfig) -> Result<SignalStats> {
    if table.num_arms() < 2 {
        return Err(ShieldError::NotApplicable(
            "disproportionality needs at least two arms".into(),
        ));
    }
    if !(config.gamma > 0.0 && config.gamma < 1.0) {
        return Err(ShieldError::InvalidArgument(format!(
            "credible level must lie in (0, 1), got {}",
            config.gamma
        )));
    }
    let expected = expected_counts(table);
    let raw = raw_ic(table, &expected);
    let tests = g_test(table, &raw.ic)?;
    let signs = if table.num_arms() == 2 {
        Some(sign_two_arm(table, &expected)?)
    } else {
        None
    };
    let prior = estimate_hyperprior(table, config.bounds)?;

    let per_term = map_indexed(
        table.num_terms(),
        config.execution,
        |i| -> Result<TermSignal> {
            let samples = posterior_samples(
                table.row(i),
                &prior,
                &expected[i],
                config.draws,
                config.seed,
                i,
            )?;
            let ic = posterior_summaries(&samples.ic, config.gamma)?;
            let abs_ic_lower = if table.num_arms() == 2 {
                let magnitudes: Vec<f64> = samples.ic.iter().map(|v| v.abs()).collect();
                posterior_summaries(&magnitudes, config.gamma)?.lower
            } else {
                ic.lower
            };
            let rr = (0..table.num_arms())
                .map(|j| posterior_summaries(&samples.rr_arm(j), config.gamma))
                .collect::<Result<Vec<_>>>()?;
            Ok(TermSignal {
                raw_ic: raw.ic[i],
                g_stat: tests[i].g_stat,
                p_value: tests[i].p_value,
                sign: signs.as_ref().map(|s| s[i]),
                ic,
                abs_ic_lower,
                rr,
                expected: expected[i].clone(),
            })
        },
    );
    Ok(SignalStats {
        terms: per_term.into_iter().collect::<Result<_>>()?,
        prior,
        gamma: config.gamma,
    })
}
