//! End-to-end run: ingest, embed, disprop, utility, cluster, label, report.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{cluster_utility, ClusterConfig, ClusterTree};
use crate::disprop::{analyze, DispropConfig, HyperpriorBounds, SignalStats};
use crate::embed::{cosine_similarity_submatrix, load_embeddings};
use crate::error::{Result, ShieldError};
use crate::ingest::{filter_zero_rows, parse_incidence_csv, IncidenceTable};
use crate::label::{label_clusters, ClusterLabel, HttpChatClient, Labeler, LlmConfig, RetryPolicy};
use crate::parallel::Execution;
use crate::report::{
    adjusted_ic, build_summary, canonical_json, render_dendrogram_svg, render_html_report,
    write_bundle, AnalysisMode, GraphExport, LeafBars, ReportBundle, ReportMeta, SummaryKind,
    ViewerAssets,
};
use crate::utility::{signal_weights, utility_matrix, WeightMode};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelerMode {
    #[default]
    Offline,
    Llm,
}

/// Everything that determines a run. Missing keys take their defaults when
/// deserialized, so partial config files are fine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    pub embeddings: PathBuf,
    /// Arm columns in analysis order; empty means all columns as found.
    pub arms: Vec<String>,
    pub sim_min: f64,
    pub gamma: f64,
    pub draws: usize,
    pub seed: u64,
    pub labeler: LabelerMode,
    pub llm_endpoint: Option<String>,
    pub llm_model: Option<String>,
    pub llm_max_in_flight: usize,
    pub out: PathBuf,
    pub skip_missing: bool,
    pub no_viewer: bool,
    pub viewer_assets: Option<PathBuf>,
    pub two_sided: bool,
    pub label_hierarchy: bool,
    pub summary: SummaryKind,
    pub min_cluster_size: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            embeddings: PathBuf::new(),
            arms: Vec::new(),
            sim_min: 0.5,
            gamma: 0.95,
            draws: 20_000,
            seed: 42,
            labeler: LabelerMode::Offline,
            llm_endpoint: None,
            llm_model: None,
            llm_max_in_flight: 4,
            out: PathBuf::from("shield_out"),
            skip_missing: false,
            no_viewer: false,
            viewer_assets: None,
            two_sided: false,
            label_hierarchy: false,
            summary: SummaryKind::Median,
            min_cluster_size: 2,
            execution: Execution::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ShieldError::Config(msg));
        if self.input.as_os_str().is_empty() {
            return bad("no input table given".into());
        }
        if self.embeddings.as_os_str().is_empty() {
            return bad("no embeddings file given".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(0.0..1.0).contains(&self.sim_min) {
            return bad(format!("sim_min must lie in [0, 1), got {}", self.sim_min));
        }
        if self.draws < 1000 {
            return bad(format!("draws must be at least 1000, got {}", self.draws));
        }
        if self.min_cluster_size == 0 {
            return bad("min_cluster_size must be at least 1".into());
        }
        if self.llm_max_in_flight == 0 {
            return bad("llm_max_in_flight must be at least 1".into());
        }
        Ok(())
    }

    pub fn weight_mode(&self) -> WeightMode {
        if self.two_sided {
            WeightMode::TwoSided
        } else {
            WeightMode::Clamped
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(canonical_json(self)?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Labeler described by this config. LLM settings are checked here, so
    /// a bad endpoint fails before any data is read.
    pub fn labeler(&self) -> Result<Labeler> {
        match self.labeler {
            LabelerMode::Offline => Ok(Labeler::Offline),
            LabelerMode::Llm => {
                let endpoint = self.llm_endpoint.clone().ok_or_else(|| {
                    ShieldError::Config("--labeler llm needs --llm-endpoint".into())
                })?;
                let model = self
                    .llm_model
                    .clone()
                    .ok_or_else(|| ShieldError::Config("--labeler llm needs --llm-model".into()))?;
                let client = HttpChatClient::new(&LlmConfig::from_env(endpoint, model))?;
                Ok(Labeler::Llm {
                    client: Arc::new(client),
                    retry: RetryPolicy::default(),
                    max_in_flight: self.llm_max_in_flight,
                })
            }
        }
    }

    pub fn viewer_assets(&self) -> Result<ViewerAssets> {
        if self.no_viewer {
            return Ok(ViewerAssets::Disabled);
        }
        match &self.viewer_assets {
            None => Ok(ViewerAssets::Stub),
            Some(path) => fs::read_to_string(path)
                .map(ViewerAssets::Bundle)
                .map_err(|e| ShieldError::Config(format!("viewer assets {}: {e}", path.display()))),
        }
    }
}

/// In-memory result of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub bundle: ReportBundle,
    pub html: String,
    pub table: IncidenceTable,
    pub stats: Option<SignalStats>,
    pub tree: ClusterTree,
}

fn open(path: &Path, what: &str) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| ShieldError::io(format!("opening {what} {}", path.display()), e))
}

fn with_file_context(path: &Path, err: ShieldError) -> ShieldError {
    match err {
        ShieldError::Io { .. } => err,
        other => ShieldError::InFile {
            path: path.display().to_string(),
            source: Box::new(other),
        },
    }
}

fn unclustered_tree(m: usize) -> ClusterTree {
    ClusterTree {
        merges: Vec::new(),
        leaves: Vec::new(),
        isolated: (0..m).collect(),
        flat_assignment: vec![None; m],
        num_spectral: 0,
        eigenvalues: Vec::new(),
        merges_applied: 0,
    }
}

/// Runs the analysis with the labeler described by `config`.
pub fn run_analysis(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let labeler = config.labeler()?;
    run_analysis_with(config, &labeler)
}

/// Runs the analysis with an explicit labeler.
pub fn run_analysis_with(config: &RunConfig, labeler: &Labeler) -> Result<RunOutput> {
    config.validate()?;
    let viewer = config.viewer_assets()?;

    let table = parse_incidence_csv(open(&config.input, "input table")?, &config.arms)
        .map_err(|e| with_file_context(&config.input, e))?;
    let table = filter_zero_rows(&table)?;
    let store = load_embeddings(open(&config.embeddings, "embeddings")?)
        .map_err(|e| with_file_context(&config.embeddings, e))?;

    let missing: Vec<String> = store
        .missing(table.pt_names())
        .into_iter()
        .cloned()
        .collect();
    let table = if !missing.is_empty() && config.skip_missing {
        warn!(
            "skipping {} term(s) without an embedding: {}",
            missing.len(),
            missing.join(", ")
        );
        let kept = table.retain_terms(|i| store.contains(&table.pt_names()[i]));
        if kept.num_terms() == 0 {
            return Err(ShieldError::EmptyTable);
        }
        kept
    } else {
        table
    };
    let skipped_terms = if config.skip_missing {
        missing
    } else {
        Vec::new()
    };

    let k = table.num_arms();
    let m = table.num_terms();
    info!("{m} terms, {k} arm(s)");
    let s_raw = cosine_similarity_submatrix(&store, table.pt_names(), config.execution)?;
    let s_tau = s_raw.threshold(config.sim_min);

    let stats = if k >= 2 {
        let disprop = DispropConfig {
            draws: config.draws,
            seed: config.seed,
            gamma: config.gamma,
            bounds: HyperpriorBounds::default(),
            execution: config.execution,
        };
        Some(analyze(&table, &disprop)?)
    } else {
        None
    };

    let z = signal_weights(&table, stats.as_ref(), config.weight_mode())?;
    let graph = utility_matrix(&z, &s_tau)?;
    let cluster_config = ClusterConfig {
        min_cluster_size: config.min_cluster_size,
        ..ClusterConfig::default()
    };
    let tree = match cluster_utility(&graph, &cluster_config) {
        Ok(tree) => tree,
        Err(ShieldError::EmptyGraph) => {
            warn!("no term carries any signal weight; every term is unclustered");
            unclustered_tree(m)
        }
        Err(e) => return Err(e),
    };
    info!("{} flat cluster(s)", tree.num_clusters());

    let names = |idx: &[usize]| -> Vec<String> {
        idx.iter().map(|&i| table.pt_names()[i].clone()).collect()
    };
    let groups: Vec<(usize, Vec<String>)> = tree
        .members()
        .iter()
        .enumerate()
        .map(|(c, idx)| (c, names(idx)))
        .collect();
    let labels = label_clusters(&groups, labeler, &s_raw)?;
    let hierarchy_labels: Vec<ClusterLabel> = if config.label_hierarchy {
        let n = tree.leaves.len();
        let nodes: Vec<(usize, Vec<String>)> = (0..tree.merges.len())
            .map(|t| (n + t, names(&tree.subtree_terms(n + t))))
            .collect();
        label_clusters(&nodes, labeler, &s_raw)?
    } else {
        Vec::new()
    };

    let meta = ReportMeta {
        k,
        mode: AnalysisMode::for_arms(k),
        arm_names: table.arm_names().to_vec(),
        gamma: config.gamma,
        tau: config.sim_min,
        draws: config.draws,
        seed: config.seed,
        version: VERSION.to_string(),
        summary: config.summary,
        weight_mode: config.weight_mode(),
        alpha: stats
            .as_ref()
            .map_or_else(Vec::new, |s| s.prior.alpha().to_vec()),
        skipped_terms,
    };
    let summary_rows = build_summary(
        &table,
        stats.as_ref(),
        &tree.flat_assignment,
        &labels,
        config.summary,
    )?;
    let graph_export = GraphExport::build(
        &graph,
        &table,
        stats.as_ref(),
        &tree.flat_assignment,
        &labels,
        config.summary,
        meta.clone(),
    )?;
    let bars = match &stats {
        Some(stats) => LeafBars {
            values: stats
                .terms
                .iter()
                .map(|s| adjusted_ic(s, config.summary))
                .collect(),
            lower: stats.terms.iter().map(|s| Some(s.ic.lower)).collect(),
            caption: if k == 2 {
                "signed IC (bits), lower bound marked".into()
            } else {
                "IC (bits), lower bound marked".into()
            },
        },
        None => LeafBars {
            values: z.clone(),
            lower: vec![None; m],
            caption: "incidence proportion".into(),
        },
    };
    let dendrogram_svg = render_dendrogram_svg(&tree, table.pt_names(), &bars, &labels);
    let bundle = ReportBundle {
        summary_rows,
        graph: graph_export,
        dendrogram_svg,
        meta,
        labels,
        hierarchy_labels,
    };
    let html = render_html_report(&bundle, &viewer)?;
    Ok(RunOutput {
        bundle,
        html,
        table,
        stats,
        tree,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config: RunConfig,
    pub config_hash: String,
    pub version: String,
    /// Seconds since the Unix epoch; the only nondeterministic output.
    pub timestamp: u64,
}

/// Writes all artifacts plus `run_meta.json` into `dir`.
pub fn write_outputs(config: &RunConfig, output: &RunOutput, dir: &Path) -> Result<()> {
    write_bundle(&output.bundle, &output.html, dir)?;
    let meta = RunMeta {
        config: config.clone(),
        config_hash: config.hash()?,
        version: VERSION.to_string(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let path = dir.join("run_meta.json");
    fs::write(&path, canonical_json(&meta)?)
        .map_err(|e| ShieldError::io(format!("writing {}", path.display()), e))
}

/// [`run_analysis`] followed by [`write_outputs`] into `config.out`.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let output = run_analysis(config)?;
    write_outputs(config, &output, &config.out)?;
    Ok(output)
}
