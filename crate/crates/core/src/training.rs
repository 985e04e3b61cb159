//! Minibatch optimisation of the objective with seeded shuffling and
//! per-epoch loss history.

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cfvae::{total_loss, CfvaeConfig, CfvaeModel, LossBreakdown, Noise, TermWeights};
use crate::datasets::{Role, Split, TabularDataset};
use crate::error::{Error, Result};
use crate::nn::{Optimizer, OptimizerKind};
use crate::seed;

fn default_epochs() -> usize {
    200
}

fn default_batch_size() -> usize {
    128
}

fn default_learning_rate() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    /// Root seed for initialisation, shuffling and reparameterisation noise.
    /// Overrides `cfvae.seed`.
    #[serde(default)]
    pub seed: u64,
    pub cfvae: CfvaeConfig,
}

impl TrainConfig {
    pub fn new(cfvae: CfvaeConfig) -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            optimizer: OptimizerKind::Adam,
            seed: cfvae.seed,
            cfvae,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate < 1.0) {
            return Err(Error::Config(format!(
                "learning_rate must lie in [0, 1), got {}",
                self.learning_rate
            )));
        }
        self.cfvae.validate()
    }

    /// The model config actually used: `cfvae` with the root seed applied.
    pub fn model_config(&self) -> CfvaeConfig {
        CfvaeConfig {
            seed: self.seed,
            ..self.cfvae.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Row-weighted mean breakdown for each epoch.
    pub history: Vec<LossBreakdown>,
    pub wall_clock_seconds: f64,
    pub n_train: usize,
}

/// Partition `n` shuffled positions into batches of `size`; a trailing
/// singleton is folded into the previous batch since the TC estimator needs
/// at least two rows.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < 2) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().expect("non-empty") = &order[start..];
    }
    out
}

/// Fit a fresh model on the training split of `dataset`.
pub fn train(dataset: &TabularDataset, config: &TrainConfig) -> Result<(TrainReport, CfvaeModel)> {
    config.validate()?;
    let train_rows = dataset.indices(Split::Train);
    if train_rows.len() < 2 {
        return Err(Error::Config("training split needs at least two rows".into()));
    }
    if config.batch_size > train_rows.len() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds the {} training rows",
            config.batch_size,
            train_rows.len()
        )));
    }
    let mut model = CfvaeModel::new(config.model_config(), dataset.schema())?;
    let a_all = dataset.block(Role::Sensitive, &train_rows);
    let x_all = dataset.block(Role::Covariate, &train_rows);
    let n = train_rows.len();

    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate);
    let weights = TermWeights::objective(&model.config);
    let mut shuffle_rng = seed::rng(seed::derive(config.seed, "shuffle"));
    let mut noise_rng = seed::rng(seed::derive(config.seed, "noise"));
    let (da, dx) = (model.config.latent_a, model.config.latent_x);

    let started = Instant::now();
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let diverged = || Error::Diverged {
            epoch,
            last_finite: epoch.checked_sub(1),
        };
        let mut sum = LossBreakdown::default();
        for batch in batches(&order, config.batch_size) {
            let a = select_rows(a_all.view(), batch);
            let x = select_rows(x_all.view(), batch);
            let noise = Noise::sample(batch.len(), da, dx, &mut noise_rng);
            let (parts, grads) = match model.gradients(a.view(), x.view(), &noise, n, &weights) {
                Ok(v) => v,
                Err(Error::Numerical { .. }) => return Err(diverged()),
                Err(e) => return Err(e),
            };
            let breakdown = total_loss(&parts, &model.config);
            if !breakdown.is_finite() {
                return Err(diverged());
            }
            sum = sum.add(&breakdown.scaled(batch.len() as f64));
            let grad_tensors = grads.tensors();
            if grad_tensors.iter().any(|t| t.iter().any(|v| !v.is_finite())) {
                return Err(diverged());
            }
            optimizer.step(model.tensors_mut(), grad_tensors);
        }
        let mean = sum.scaled(1.0 / n as f64);
        log::debug!("epoch {epoch}: total {:.6}", mean.total);
        history.push(mean);
    }
    let report = TrainReport {
        history,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        n_train: n,
    };
    Ok((report, model))
}

fn select_rows(m: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    m.select(ndarray::Axis(0), rows)
}

/// Deterministic `Z'_x` features for the given covariate block.
pub fn transform_dataset(model: &CfvaeModel, x_block: ArrayView2<f64>) -> Result<Array2<f64>> {
    model.structured_means(x_block)
}

/// `Z'_x` features for selected rows of a dataset sharing the model's schema.
pub fn transform_rows(model: &CfvaeModel, dataset: &TabularDataset, rows: &[usize]) -> Result<Array2<f64>> {
    if dataset.schema() != &model.schema {
        return Err(Error::Schema("dataset schema differs from the model's".into()));
    }
    transform_dataset(model, dataset.block(Role::Covariate, rows).view())
}

pub const LOSS_CSV_HEADER: &str = "epoch,recon_a,recon_x,kl_a,kl_x,tcr,opr,total";

pub fn write_loss_csv(history: &[LossBreakdown], path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 * (history.len() + 1));
    out.push_str(LOSS_CSV_HEADER);
    out.push('\n');
    for (e, b) in history.iter().enumerate() {
        out.push_str(&format!(
            "{e},{},{},{},{},{},{},{}\n",
            b.recon_a, b.recon_x, b.kl_a, b.kl_x, b.tcr, b.opr, b.total
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal_graph::ConceptGraph;
    use crate::datasets::{generate_synthetic, split, SyntheticSpec};

    fn fixture(n: usize) -> TabularDataset {
        let graph = ConceptGraph::parse("n 2\n0 1 0.8\n").unwrap();
        let ds = generate_synthetic(&SyntheticSpec::new(n, graph, 1.0, 5)).unwrap();
        split(&ds, 0.7, 5).unwrap()
    }

    fn config() -> TrainConfig {
        let graph = ConceptGraph::parse("n 2\n0 1 0.8\n").unwrap();
        let mut cfg = TrainConfig::new(CfvaeConfig::new(graph, 1.0));
        cfg.epochs = 3;
        cfg.batch_size = 16;
        cfg
    }

    #[test]
    fn batches_fold_trailing_singleton() {
        let order: Vec<usize> = (0..9).collect();
        let b = batches(&order, 4);
        assert_eq!(b.iter().map(|b| b.len()).collect::<Vec<_>>(), vec![4, 5]);
        let b = batches(&order, 3);
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn zero_learning_rate_keeps_initialisation() {
        let ds = fixture(60);
        let mut cfg = config();
        cfg.learning_rate = 0.0;
        let (_, trained) = train(&ds, &cfg).unwrap();
        let fresh = CfvaeModel::new(cfg.model_config(), ds.schema()).unwrap();
        assert_eq!(trained.tensors(), fresh.tensors());
    }

    #[test]
    fn history_has_one_entry_per_epoch() {
        let ds = fixture(60);
        let (report, _) = train(&ds, &config()).unwrap();
        assert_eq!(report.history.len(), 3);
        assert!(report.history.iter().all(LossBreakdown::is_finite));
        assert_eq!(report.n_train, 42);
    }

    #[test]
    fn rejects_oversized_batch() {
        let ds = fixture(20);
        let mut cfg = config();
        cfg.batch_size = 100;
        assert!(matches!(train(&ds, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn features_ignore_sensitive_columns() {
        let ds = fixture(40);
        let (_, model) = train(&ds, &config()).unwrap();
        let rows = ds.all_indices();
        let base = transform_rows(&model, &ds, &rows).unwrap();
        let mut garbled = ds.rows().clone();
        for c in ds.schema().encoded_indices(Role::Sensitive) {
            garbled.column_mut(c).fill(1e6);
        }
        let other = TabularDataset::from_parts(
            ds.schema().clone(),
            garbled,
            ds.split_labels().to_vec(),
            Some(ds.scalers().to_vec()),
            ds.non_descendant_flags().map(<[bool]>::to_vec),
        )
        .unwrap();
        assert_eq!(transform_rows(&model, &other, &rows).unwrap(), base);
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let ds = fixture(60);
        let mut cfg = config();
        cfg.learning_rate = 0.999;
        cfg.optimizer = OptimizerKind::Sgd;
        cfg.epochs = 200;
        match train(&ds, &cfg) {
            Err(Error::Diverged { epoch, last_finite }) => {
                assert_eq!(last_finite, epoch.checked_sub(1));
            }
            Ok((r, _)) => assert!(r.history.iter().all(LossBreakdown::is_finite)),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
