//! Treatment-emergent adverse-event signal detection for clinical trials.
//!
//! The pipeline runs in this order:
//!
//! 1. [`ingest`] reads a PT × arm incidence table.
//! 2. [`disprop`] computes the information component (IC), G-test p-values
//!    and Dirichlet-shrunk posterior summaries.
//! 3. [`embed`] builds cosine similarities between the observed terms.
//! 4. [`utility`] weights similarities by signal strength into U = Z S Z.
//! 5. [`cluster`] embeds U spectrally and cuts a Ward dendrogram.
//! 6. [`label`] names each cluster.
//! 7. [`report`] writes the table, dendrogram, graph JSON and HTML report.
//!
//! [`pipeline`] ties the steps together.

pub mod cluster;
pub mod disprop;
pub mod embed;
pub mod error;
pub mod ingest;
pub mod label;
pub mod parallel;
pub mod pipeline;
pub mod report;
pub mod utility;

pub use error::{Result, ShieldError};
