//! Experiment configuration, read from TOML.
//!
//! Relative paths are resolved against the directory holding the config
//! file. See `configs/` for complete examples.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cfvae_core::audit::{Inversion, Selection};
use cfvae_core::causal_graph::{ConceptGraph, SemMode};
use cfvae_core::cfvae::CfvaeConfig;
use cfvae_core::datasets::{ColumnKind, LawColumns, Role, Schema};
use cfvae_core::nn::OptimizerKind;
use cfvae_core::predictors::{FeatureSetKind, PredictorKind, PredictorSpec, Task};
use cfvae_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub graph: GraphConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub predictors: PredictorsSection,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub ablation: AblationSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Adult,
    Law,
    Synthetic,
    /// A dataset archive written by `cfvae ingest`.
    Archive,
}

fn default_train_fraction() -> f64 {
    0.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Keep a seeded uniform subsample of this many rows before splitting.
    #[serde(default)]
    pub subsample: Option<usize>,
    #[serde(default)]
    pub law_columns: LawColumns,
    #[serde(default)]
    pub synthetic: Option<SyntheticSection>,
}

fn default_noise() -> f64 {
    0.5
}

fn default_effect() -> f64 {
    1.0
}

fn default_readouts() -> usize {
    2
}

fn default_sensitive_readouts() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub n_samples: usize,
    #[serde(default = "default_noise")]
    pub noise_scale: f64,
    #[serde(default = "default_effect")]
    pub sensitive_effect: f64,
    #[serde(default = "default_readouts")]
    pub readouts_per_concept: usize,
    #[serde(default = "default_sensitive_readouts")]
    pub sensitive_readouts: usize,
    /// Defaults to one per concept.
    #[serde(default)]
    pub target_weights: Option<Vec<f64>>,
}

/// The concept graph, from a file or inline text in the same format.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub text: Option<String>,
}

fn default_gamma() -> f64 {
    1.0
}

fn default_one() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_hidden() -> Vec<usize> {
    vec![32]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Defaults to the number of concepts.
    #[serde(default)]
    pub latent_a: Option<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_one")]
    pub opr_weight: f64,
    #[serde(default = "default_true")]
    pub use_causal_constraints: bool,
    #[serde(default)]
    pub sem_mode: SemMode,
    #[serde(default = "default_hidden")]
    pub encoder_hidden: Vec<usize>,
    #[serde(default = "default_hidden")]
    pub decoder_hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_a: None,
            gamma: default_gamma(),
            opr_weight: 1.0,
            use_causal_constraints: true,
            sem_mode: SemMode::Exact,
            encoder_hidden: default_hidden(),
            decoder_hidden: default_hidden(),
        }
    }
}

fn default_epochs() -> usize {
    200
}

fn default_batch() -> usize {
    128
}

fn default_lr() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
            optimizer: OptimizerKind::Adam,
        }
    }
}

fn default_kinds() -> Vec<PredictorKind> {
    vec![PredictorKind::ClosedFormLinear, PredictorKind::SgdLinear, PredictorKind::Mlp]
}

fn default_repeats() -> usize {
    10
}

fn default_pred_epochs() -> usize {
    20
}

fn default_sgd_lr() -> f64 {
    0.01
}

fn default_mlp_lr() -> f64 {
    1e-3
}

fn default_pred_batch() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorsSection {
    /// Inferred from the target column when absent.
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<PredictorKind>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_hidden")]
    pub mlp_hidden: Vec<usize>,
    #[serde(default = "default_pred_epochs")]
    pub epochs: usize,
    #[serde(default = "default_pred_batch")]
    pub batch_size: usize,
    #[serde(default = "default_sgd_lr")]
    pub sgd_learning_rate: f64,
    #[serde(default = "default_mlp_lr")]
    pub mlp_learning_rate: f64,
    #[serde(default = "default_one")]
    pub l2: f64,
}

impl Default for PredictorsSection {
    fn default() -> Self {
        Self {
            task: None,
            kinds: default_kinds(),
            repeats: default_repeats(),
            mlp_hidden: default_hidden(),
            epochs: default_pred_epochs(),
            batch_size: default_pred_batch(),
            sgd_learning_rate: default_sgd_lr(),
            mlp_learning_rate: default_mlp_lr(),
            l2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub label: String,
    pub features: FeatureSetKind,
}

fn default_methods() -> Vec<MethodEntry> {
    vec![
        MethodEntry {
            label: "Full".into(),
            features: FeatureSetKind::Full,
        },
        MethodEntry {
            label: "CF-VAE".into(),
            features: FeatureSetKind::Zxp,
        },
    ]
}

fn default_selection() -> Selection {
    Selection::TestSplit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default = "default_selection")]
    pub selection: Selection,
    /// Per-column overrides of the default inversion rules.
    #[serde(default)]
    pub inversions: BTreeMap<String, Inversion>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodEntry>,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            selection: default_selection(),
            inversions: BTreeMap::new(),
            methods: default_methods(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Predictors on `[A, X]`, no representation.
    FullFeatures,
    /// Plain VAE: no constraints, no TCR, no OPR.
    NoConstraints,
    /// Causal constraints plus TCR.
    ConstraintsTcr,
    /// Constraints, TCR and OPR.
    Cfvae,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::FullFeatures, Arm::NoConstraints, Arm::ConstraintsTcr, Arm::Cfvae];

    pub fn label(&self) -> &'static str {
        match self {
            Arm::FullFeatures => "Full",
            Arm::NoConstraints => "-M",
            Arm::ConstraintsTcr => "-M'+TCR",
            Arm::Cfvae => "-M'+TCR+OPR",
        }
    }

    pub fn slug(&self) -> &'static str {
        match self {
            Arm::FullFeatures => "full_features",
            Arm::NoConstraints => "no_constraints",
            Arm::ConstraintsTcr => "constraints_tcr",
            Arm::Cfvae => "cfvae",
        }
    }

    /// Model settings for the arm, derived from the configured model; `None`
    /// for the arm without a representation.
    pub fn model_config(&self, base: &CfvaeConfig) -> Option<CfvaeConfig> {
        let mut c = base.clone();
        match self {
            Arm::FullFeatures => return None,
            Arm::NoConstraints => {
                c.use_causal_constraints = false;
                c.gamma = 0.0;
                c.opr_weight = 0.0;
            }
            Arm::ConstraintsTcr => {
                c.use_causal_constraints = true;
                c.opr_weight = 0.0;
            }
            Arm::Cfvae => c.use_causal_constraints = true,
        }
        Some(c)
    }
}

impl std::str::FromStr for Arm {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, RunError> {
        Arm::ALL
            .into_iter()
            .find(|a| a.slug() == s)
            .ok_or_else(|| RunError::Invalid(format!("unknown ablation arm '{s}'")))
    }
}

fn default_arms() -> Vec<Arm> {
    Arm::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSection {
    /// Root seeds; cells report the median over seeds. Empty means `[seed]`.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_arms")]
    pub arms: Vec<Arm>,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self {
            seeds: Vec::new(),
            arms: default_arms(),
        }
    }
}

/// A parsed config together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub graph: ConceptGraph,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, &base)
    }

    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self, RunError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| RunError::Invalid(format!("config: {e}")))?;
        Self::new(config, base_dir)
    }

    pub fn new(config: ExperimentConfig, base_dir: &Path) -> Result<Self, RunError> {
        let graph = load_graph(&config.graph, base_dir)?;
        let loaded = Self {
            config,
            base_dir: base_dir.to_path_buf(),
            graph,
        };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn dataset_path(&self) -> Option<PathBuf> {
        self.config.dataset.path.as_deref().map(|p| self.resolve(p))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.config.seed = seed;
        self
    }

    pub fn cfvae_config(&self) -> CfvaeConfig {
        let m = &self.config.model;
        let n = self.graph.n();
        CfvaeConfig {
            latent_a: m.latent_a.unwrap_or(n),
            latent_x: n,
            gamma: m.gamma,
            opr_weight: m.opr_weight,
            use_causal_constraints: m.use_causal_constraints,
            graph: self.graph.clone(),
            sem_mode: m.sem_mode,
            encoder_hidden: m.encoder_hidden.clone(),
            decoder_hidden: m.decoder_hidden.clone(),
            seed: self.config.seed,
        }
    }

    pub fn train_config(&self, cfvae: CfvaeConfig) -> TrainConfig {
        let t = &self.config.train;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer: t.optimizer,
            seed: cfvae.seed,
            cfvae,
        }
    }

    pub fn predictor_specs(&self, task: Task) -> Vec<PredictorSpec> {
        let p = &self.config.predictors;
        p.kinds
            .iter()
            .map(|&kind| PredictorSpec {
                task,
                kind,
                repeats: p.repeats,
                seed: self.config.seed,
                mlp_hidden: p.mlp_hidden.clone(),
                epochs: p.epochs,
                learning_rate: match kind {
                    PredictorKind::Mlp => p.mlp_learning_rate,
                    _ => p.sgd_learning_rate,
                },
                batch_size: p.batch_size,
                l2: p.l2,
            })
            .collect()
    }

    /// The configured task, or the one implied by the target column.
    pub fn task(&self, schema: &Schema) -> Task {
        self.config.predictors.task.unwrap_or_else(|| {
            let t = &schema.columns[schema.columns_with_role(Role::Target)[0]];
            match t.kind {
                ColumnKind::Continuous => Task::Regression,
                _ => Task::Classification,
            }
        })
    }

    /// Checks that need no data: file presence and dimension consistency.
    pub fn validate(&self) -> Result<(), RunError> {
        let c = &self.config;
        let d = &c.dataset;
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return Err(RunError::Invalid(format!(
                "dataset.train_fraction must lie in (0, 1), got {}",
                d.train_fraction
            )));
        }
        match d.kind {
            DatasetKind::Synthetic => {
                let s = d.synthetic.as_ref().ok_or_else(|| {
                    RunError::Invalid("dataset.kind = \"synthetic\" needs a [dataset.synthetic] section".into())
                })?;
                if s.n_samples < 4 {
                    return Err(RunError::Invalid("dataset.synthetic.n_samples must be at least 4".into()));
                }
                if let Some(w) = &s.target_weights {
                    if w.len() != self.graph.n() {
                        return Err(RunError::Invalid(format!(
                            "{} target weights for {} concepts",
                            w.len(),
                            self.graph.n()
                        )));
                    }
                }
            }
            _ => {
                let p = self
                    .dataset_path()
                    .ok_or_else(|| RunError::Invalid("dataset.path is required".into()))?;
                if !p.exists() {
                    return Err(RunError::Invalid(format!("dataset file {} does not exist", p.display())));
                }
            }
        }
        if c.predictors.kinds.is_empty() {
            return Err(RunError::Invalid("predictors.kinds must not be empty".into()));
        }
        if c.audit.methods.is_empty() {
            return Err(RunError::Invalid("audit.methods must not be empty".into()));
        }
        if c.ablation.arms.is_empty() {
            return Err(RunError::Invalid("ablation.arms must not be empty".into()));
        }
        let cfvae = self.cfvae_config();
        self.train_config(cfvae.clone())
            .validate()
            .map_err(|e| RunError::Invalid(e.to_string()))?;
        for spec in self.predictor_specs(Task::Regression) {
            spec.validate().map_err(|e| RunError::Invalid(e.to_string()))?;
        }
        Ok(())
    }
}

fn load_graph(g: &GraphConfig, base: &Path) -> Result<ConceptGraph, RunError> {
    let text = match (&g.file, &g.text) {
        (Some(_), Some(_)) => {
            return Err(RunError::Invalid("graph: give either file or text, not both".into()))
        }
        (Some(f), None) => {
            let p = if f.is_absolute() { f.clone() } else { base.join(f) };
            std::fs::read_to_string(&p)
                .map_err(|e| RunError::Invalid(format!("cannot read graph file {}: {e}", p.display())))?
        }
        (None, Some(t)) => t.clone(),
        (None, None) => return Err(RunError::Invalid("graph: file or text is required".into())),
    };
    ConceptGraph::parse(&text).map_err(|e| RunError::Invalid(e.to_string()))
}
