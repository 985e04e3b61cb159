//! Downstream predictors, feature sets and the repeated-fit protocol.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cfvae::CfvaeModel;
use crate::datasets::{Role, TabularDataset};
use crate::error::{Error, Result};
use crate::nn::{Mlp, Optimizer, OptimizerKind};
use crate::seed;
use crate::training::transform_rows;

/// Ridge strength used when the least-squares system is rank deficient.
pub const RIDGE_FALLBACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    ClosedFormLinear,
    SgdLinear,
    Mlp,
}

fn default_repeats() -> usize {
    10
}

fn default_mlp_hidden() -> Vec<usize> {
    vec![32]
}

fn default_epochs() -> usize {
    20
}

fn default_lr() -> f64 {
    0.01
}

fn default_batch() -> usize {
    64
}

fn default_l2() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    pub task: Task,
    pub kind: PredictorKind,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mlp_hidden")]
    pub mlp_hidden: Vec<usize>,
    /// Passes over the training rows for the iterative predictors.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// L2 penalty of the closed-form logistic fit (intercept unpenalised).
    #[serde(default = "default_l2")]
    pub l2: f64,
}

impl PredictorSpec {
    pub fn new(task: Task, kind: PredictorKind) -> Self {
        let mut spec = Self {
            task,
            kind,
            repeats: default_repeats(),
            seed: 0,
            mlp_hidden: default_mlp_hidden(),
            epochs: default_epochs(),
            learning_rate: default_lr(),
            batch_size: default_batch(),
            l2: default_l2(),
        };
        if kind == PredictorKind::Mlp {
            spec.learning_rate = 1e-3;
        }
        spec
    }

    /// The three predictors of one task, in table order.
    pub fn suite(task: Task) -> Vec<Self> {
        [PredictorKind::ClosedFormLinear, PredictorKind::SgdLinear, PredictorKind::Mlp]
            .into_iter()
            .map(|k| Self::new(task, k))
            .collect()
    }

    pub fn name(&self) -> &'static str {
        match (self.kind, self.task) {
            (PredictorKind::ClosedFormLinear, Task::Regression) => "LR_R",
            (PredictorKind::SgdLinear, Task::Regression) => "SGD_R",
            (PredictorKind::Mlp, Task::Regression) => "MLP_R",
            (PredictorKind::ClosedFormLinear, Task::Classification) => "LR_C",
            (PredictorKind::SgdLinear, Task::Classification) => "SGD_C",
            (PredictorKind::Mlp, Task::Classification) => "MLP_C",
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.kind == PredictorKind::ClosedFormLinear
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config(format!("{}: repeats must be at least 1", self.name())));
        }
        if self.kind != PredictorKind::ClosedFormLinear {
            if self.epochs == 0 || self.batch_size == 0 {
                return Err(Error::Config(format!("{}: epochs and batch_size must be positive", self.name())));
            }
            if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
                return Err(Error::Config(format!("{}: learning_rate must be positive", self.name())));
            }
        }
        if self.kind == PredictorKind::Mlp && (self.mlp_hidden.is_empty() || self.mlp_hidden.contains(&0)) {
            return Err(Error::Config(format!("{}: hidden widths must be positive", self.name())));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::Config(format!("{}: l2 must be >= 0", self.name())));
        }
        Ok(())
    }
}

/// A named matrix of features to predict on, with the dataset row of each line.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub name: String,
    pub features: Array2<f64>,
    pub row_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatResult {
    pub repeat: usize,
    /// Flattened fitted parameters.
    pub parameters: Vec<f64>,
    /// Predictions per eval set; 0/1 labels for classification.
    pub predictions: BTreeMap<String, Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRun {
    pub spec: PredictorSpec,
    pub repeats: Vec<RepeatResult>,
    pub row_ids: BTreeMap<String, Vec<usize>>,
}

impl PredictionRun {
    pub fn predictions(&self, eval_set: &str) -> Vec<&Array1<f64>> {
        self.repeats.iter().map(|r| &r.predictions[eval_set]).collect()
    }

    /// Long-format CSV: `row_id,repeat,eval_set,prediction`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["row_id", "repeat", "eval_set", "prediction"])?;
        for r in &self.repeats {
            for (name, preds) in &r.predictions {
                for (id, p) in self.row_ids[name].iter().zip(preds.iter()) {
                    w.write_record([id.to_string(), r.repeat.to_string(), name.clone(), p.to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Fit `spec.repeats` models on the training features and predict every eval set.
pub fn fit_predict(
    spec: &PredictorSpec,
    train_x: ArrayView2<f64>,
    train_y: ArrayView1<f64>,
    eval_sets: &[EvalSet],
) -> Result<PredictionRun> {
    spec.validate()?;
    if train_x.nrows() != train_y.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows but {} targets",
            train_x.nrows(),
            train_y.len()
        )));
    }
    if train_x.nrows() == 0 {
        return Err(Error::Config("no training rows for predictor".into()));
    }
    for e in eval_sets {
        if e.features.ncols() != train_x.ncols() {
            return Err(Error::Dimension(format!(
                "eval set '{}' has width {}, training features have width {}",
                e.name,
                e.features.ncols(),
                train_x.ncols()
            )));
        }
        if e.features.nrows() != e.row_ids.len() {
            return Err(Error::Dimension(format!("eval set '{}' row ids do not match rows", e.name)));
        }
    }
    if spec.task == Task::Classification && train_y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Config("classification targets must be 0 or 1".into()));
    }

    let fit_one = |repeat: usize| -> Result<RepeatResult> {
        let rng_seed = seed::derive_indexed(spec.seed, spec.name(), repeat as u64);
        let model = match spec.kind {
            PredictorKind::ClosedFormLinear => match spec.task {
                Task::Regression => Fitted::Linear(least_squares(train_x, train_y)?),
                Task::Classification => Fitted::Linear(logistic_newton(train_x, train_y, spec.l2)?),
            },
            PredictorKind::SgdLinear => Fitted::Linear(sgd_linear(spec, train_x, train_y, rng_seed)),
            PredictorKind::Mlp => fit_mlp(spec, train_x, train_y, rng_seed),
        };
        let predictions = eval_sets
            .iter()
            .map(|e| (e.name.clone(), model.predict(e.features.view(), spec.task)))
            .collect();
        Ok(RepeatResult {
            repeat,
            parameters: model.parameters(),
            predictions,
        })
    };
    // deterministic closed forms are fitted once and shared across repeats
    let repeats: Vec<RepeatResult> = if spec.is_deterministic() {
        let first = fit_one(0)?;
        (0..spec.repeats)
            .map(|r| RepeatResult {
                repeat: r,
                ..first.clone()
            })
            .collect()
    } else {
        (0..spec.repeats)
            .into_par_iter()
            .map(fit_one)
            .collect::<Result<Vec<_>>>()?
    };
    Ok(PredictionRun {
        spec: spec.clone(),
        repeats,
        row_ids: eval_sets.iter().map(|e| (e.name.clone(), e.row_ids.clone())).collect(),
    })
}

/// Linear model on standardised inputs: `f(x) = b + Σ w_k (x_k − m_k) / s_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Array1<f64>,
}

impl LinearModel {
    pub fn decision(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.coefficients) + self.intercept
    }
}

enum Fitted {
    Linear(LinearModel),
    Mlp { net: Mlp, scaler: FeatureScaler },
}

impl Fitted {
    fn predict(&self, x: ArrayView2<f64>, task: Task) -> Array1<f64> {
        let score = match self {
            Fitted::Linear(m) => m.decision(x),
            Fitted::Mlp { net, scaler } => net.predict(scaler.apply(x).view()).column(0).to_owned(),
        };
        match task {
            Task::Regression => score,
            Task::Classification => score.mapv(|s| if s > 0.0 { 1.0 } else { 0.0 }),
        }
    }

    fn parameters(&self) -> Vec<f64> {
        match self {
            Fitted::Linear(m) => std::iter::once(m.intercept).chain(m.coefficients.iter().copied()).collect(),
            Fitted::Mlp { net, .. } => net.tensors().concat(),
        }
    }
}

fn design(x: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols() + 1, |r, c| if c == 0 { 1.0 } else { x[[r, c - 1]] })
}

fn to_linear(beta: &DVector<f64>) -> LinearModel {
    LinearModel {
        intercept: beta[0],
        coefficients: Array1::from_iter(beta.iter().skip(1).copied()),
    }
}

/// Ordinary least squares with intercept via QR; rank-deficient systems fall
/// back to ridge with `RIDGE_FALLBACK`.
pub fn least_squares(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<LinearModel> {
    let a = design(x);
    let b = DVector::from_iterator(y.len(), y.iter().copied());
    let p = a.ncols();
    if a.nrows() >= p {
        let qr = a.clone().qr();
        let r = qr.r();
        let max = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let rank_ok = max > 0.0 && (0..p).all(|i| r[(i, i)].abs() > 1e-10 * max);
        if rank_ok {
            let qtb = qr.q().transpose() * &b;
            if let Some(beta) = r.solve_upper_triangular(&qtb) {
                if beta.iter().all(|v| v.is_finite()) {
                    return Ok(to_linear(&beta));
                }
            }
        }
    }
    log::warn!("least-squares system is rank deficient; using ridge with lambda {RIDGE_FALLBACK}");
    let gram = a.transpose() * &a + DMatrix::identity(p, p) * RIDGE_FALLBACK;
    let rhs = a.transpose() * &b;
    let beta = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical {
            index: 0,
            message: "ridge system is not positive definite".into(),
        })?
        .solve(&rhs);
    Ok(to_linear(&beta))
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// L2-regularised logistic regression by Newton iterations.
pub fn logistic_newton(x: ArrayView2<f64>, y: ArrayView1<f64>, l2: f64) -> Result<LinearModel> {
    let a = design(x);
    let (n, p) = a.shape();
    let t = DVector::from_iterator(n, y.iter().copied());
    let mut beta = DVector::<f64>::zeros(p);
    for _ in 0..100 {
        let eta = &a * &beta;
        let prob = eta.map(sigmoid);
        let mut grad = a.transpose() * (&t - &prob);
        let mut hess = DMatrix::<f64>::zeros(p, p);
        for r in 0..n {
            let w = prob[r] * (1.0 - prob[r]);
            if w == 0.0 {
                continue;
            }
            let row = a.row(r);
            hess.ger(w, &row.transpose(), &row.transpose(), 1.0);
        }
        for k in 1..p {
            grad[k] -= l2 * beta[k];
            hess[(k, k)] += l2;
        }
        // keeps the intercept direction invertible when classes are separable
        hess[(0, 0)] += 1e-10;
        let step = hess.cholesky().ok_or_else(|| Error::Numerical {
            index: 0,
            message: "logistic Hessian is not positive definite".into(),
        })?;
        let delta = step.solve(&grad);
        beta += &delta;
        if delta.amax() < 1e-10 {
            break;
        }
    }
    Ok(to_linear(&beta))
}

/// Per-column standardisation fitted on training features.
#[derive(Debug, Clone, PartialEq)]
struct FeatureScaler {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl FeatureScaler {
    fn fit(x: ArrayView2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
        Self { mean, scale }
    }

    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }

    /// Fold the scaling into a linear model fitted on standardised inputs.
    fn unscale(&self, m: LinearModel) -> LinearModel {
        let coefficients = &m.coefficients / &self.scale;
        let intercept = m.intercept - coefficients.dot(&self.mean);
        LinearModel {
            intercept,
            coefficients,
        }
    }
}

/// Output bias matching the training targets' mean (as a logit for
/// classification, with the rate clipped to [1e-4, 1 - 1e-4]).
fn initial_bias(task: Task, y: ArrayView1<f64>) -> f64 {
    let mean = y.mean().unwrap_or(0.0);
    match task {
        Task::Regression => mean,
        Task::Classification => {
            let p = mean.clamp(1e-4, 1.0 - 1e-4);
            (p / (1.0 - p)).ln()
        }
    }
}

fn sgd_linear(spec: &PredictorSpec, x: ArrayView2<f64>, y: ArrayView1<f64>, rng_seed: u64) -> LinearModel {
    let scaler = FeatureScaler::fit(x);
    let xs = scaler.apply(x);
    let mut rng = seed::rng(rng_seed);
    let d = xs.ncols();
    let mut w: Array1<f64> = Array1::from_shape_simple_fn(d, || 0.01 * rng.sample::<f64, _>(StandardNormal));
    let mut b = initial_bias(spec.task, y);
    let mut order: Vec<usize> = (0..xs.nrows()).collect();
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(spec.batch_size) {
            let mut gw = Array1::<f64>::zeros(d);
            let mut gb = 0.0;
            for &i in chunk {
                let row = xs.row(i);
                let s = row.dot(&w) + b;
                let resid = match spec.task {
                    Task::Regression => s - y[i],
                    Task::Classification => sigmoid(s) - y[i],
                };
                gw.scaled_add(resid, &row);
                gb += resid;
            }
            let k = spec.learning_rate / chunk.len() as f64;
            w.scaled_add(-k, &gw);
            b -= k * gb;
        }
    }
    scaler.unscale(LinearModel {
        intercept: b,
        coefficients: w,
    })
}

fn fit_mlp(spec: &PredictorSpec, x: ArrayView2<f64>, y: ArrayView1<f64>, rng_seed: u64) -> Fitted {
    let scaler = FeatureScaler::fit(x);
    let xs = scaler.apply(x);
    let mut rng = seed::rng(rng_seed);
    let mut sizes = vec![xs.ncols()];
    sizes.extend_from_slice(&spec.mlp_hidden);
    sizes.push(1);
    let mut net = Mlp::new(&sizes, &mut rng);
    net.layers.last_mut().expect("output layer").bias[0] = initial_bias(spec.task, y);
    let mut opt = Optimizer::new(OptimizerKind::Adam, spec.learning_rate);
    let mut order: Vec<usize> = (0..xs.nrows()).collect();
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(spec.batch_size) {
            let xb = xs.select(Axis(0), chunk);
            let (out, cache) = net.forward(xb.view());
            let n = chunk.len() as f64;
            let mut g = Array2::<f64>::zeros(out.raw_dim());
            for (k, &i) in chunk.iter().enumerate() {
                let s = out[[k, 0]];
                // mean squared error halves to a unit residual; cross-entropy on the logit
                g[[k, 0]] = match spec.task {
                    Task::Regression => (s - y[i]) / n,
                    Task::Classification => (sigmoid(s) - y[i]) / n,
                };
            }
            let (_, grads) = net.backward(&cache, g.view());
            opt.step(net.tensors_mut(), grads.tensors());
        }
    }
    Fitted::Mlp { net, scaler }
}

/// Mean and population standard deviation over repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if let Some(&first) = values.first() {
            if values.iter().all(|&v| v == first) {
                return Self { mean: first, std: 0.0 };
            }
        }
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

pub fn rmse(pred: ArrayView1<f64>, truth: ArrayView1<f64>) -> f64 {
    let n = pred.len().max(1) as f64;
    ((&pred - &truth).mapv(|d| d * d).sum() / n).sqrt()
}

pub fn accuracy(pred: ArrayView1<f64>, truth: ArrayView1<f64>) -> f64 {
    let n = pred.len().max(1) as f64;
    pred.iter().zip(truth.iter()).filter(|(p, t)| p == t).count() as f64 / n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSetKind {
    /// Sensitive and covariate blocks side by side.
    #[serde(rename = "FULL")]
    Full,
    /// Covariate block only.
    #[serde(rename = "X")]
    X,
    /// Structured representation `Z'_x`.
    #[serde(rename = "ZXP")]
    Zxp,
    /// Covariates known not to descend from the sensitive attributes.
    #[serde(rename = "XNON")]
    Xnon,
}

impl FeatureSetKind {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureSetKind::Full => "FULL",
            FeatureSetKind::X => "X",
            FeatureSetKind::Zxp => "ZXP",
            FeatureSetKind::Xnon => "XNON",
        }
    }

    pub fn uses_sensitive(&self) -> bool {
        matches!(self, FeatureSetKind::Full)
    }

    pub fn needs_model(&self) -> bool {
        matches!(self, FeatureSetKind::Zxp)
    }
}

impl fmt::Display for FeatureSetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FeatureSetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "FULL" => Ok(Self::Full),
            "X" => Ok(Self::X),
            "ZXP" => Ok(Self::Zxp),
            "XNON" => Ok(Self::Xnon),
            other => Err(Error::Config(format!("unknown feature set '{other}'"))),
        }
    }
}

fn raw_columns(dataset: &TabularDataset, kind: FeatureSetKind) -> Result<Vec<usize>> {
    let schema = dataset.schema();
    let spans = schema.spans();
    let expand = |cols: &[usize]| cols.iter().flat_map(|&c| spans[c].clone()).collect::<Vec<_>>();
    let cols = match kind {
        FeatureSetKind::Full => {
            let mut c = schema.columns_with_role(Role::Sensitive);
            c.extend(schema.columns_with_role(Role::Covariate));
            expand(&c)
        }
        FeatureSetKind::X => expand(&schema.columns_with_role(Role::Covariate)),
        FeatureSetKind::Xnon => {
            let flags = dataset.non_descendant_flags().ok_or_else(|| {
                Error::Config("XNON needs ground-truth non-descendant flags (synthetic data only)".into())
            })?;
            let keep: Vec<usize> = schema
                .columns_with_role(Role::Covariate)
                .into_iter()
                .filter(|&c| flags[c])
                .collect();
            expand(&keep)
        }
        FeatureSetKind::Zxp => unreachable!("representation features are not raw columns"),
    };
    if !kind.uses_sensitive() {
        let sensitive = schema.encoded_indices(Role::Sensitive);
        assert!(
            cols.iter().all(|c| !sensitive.contains(c)),
            "feature set {kind} must not contain sensitive columns"
        );
    }
    Ok(cols)
}

/// Feature matrix of `kind` for the given rows.
pub fn feature_matrix(
    kind: FeatureSetKind,
    dataset: &TabularDataset,
    rows: &[usize],
    model: Option<&CfvaeModel>,
) -> Result<Array2<f64>> {
    if kind == FeatureSetKind::Zxp {
        let model = model.ok_or_else(|| Error::Config("ZXP features need a trained model".into()))?;
        return transform_rows(model, dataset, rows);
    }
    let cols = raw_columns(dataset, kind)?;
    Ok(dataset.rows().select(Axis(0), rows).select(Axis(1), &cols))
}

/// Named feature matrices over `rows` for every requested kind.
pub fn feature_sets(
    kinds: &[FeatureSetKind],
    dataset: &TabularDataset,
    rows: &[usize],
    model: Option<&CfvaeModel>,
) -> Result<BTreeMap<FeatureSetKind, Array2<f64>>> {
    kinds
        .iter()
        .map(|&k| Ok((k, feature_matrix(k, dataset, rows, model)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exact_line_is_recovered() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [-1.5]];
        let y = x.column(0).mapv(|v| 2.0 * v);
        let m = least_squares(x.view(), y.view()).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-8);
        assert!(m.intercept.abs() < 1e-8);
        assert!(rmse(m.decision(x.view()).view(), y.view()) < 1e-10);
    }

    #[test]
    fn duplicated_column_uses_ridge() {
        let x = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]];
        let y = array![1.0, 2.0, 3.0, 4.0];
        let m = least_squares(x.view(), y.view()).unwrap();
        assert!((m.coefficients.sum() - 1.0).abs() < 1e-4);
        assert!((m.coefficients[0] - m.coefficients[1]).abs() < 1e-8);
    }

    #[test]
    fn constant_target_classification_is_perfect() {
        let x = array![[0.1, 1.0], [0.5, -1.0], [2.0, 0.0], [-1.0, 0.3]];
        let eval = EvalSet {
            name: "test".into(),
            features: x.clone(),
            row_ids: (0..4).collect(),
        };
        for target in [0.0, 1.0] {
            let y = Array1::from_elem(4, target);
            for spec in PredictorSpec::suite(Task::Classification) {
                let spec = PredictorSpec { epochs: 5, ..spec };
                let run = fit_predict(&spec, x.view(), y.view(), std::slice::from_ref(&eval)).unwrap();
                assert_eq!(run.repeats.len(), 10);
                for p in run.predictions("test") {
                    assert_eq!(accuracy(p.view(), y.view()), 1.0, "{}", spec.name());
                }
            }
        }
    }

    #[test]
    fn closed_form_repeats_are_identical() {
        let x = array![[0.0, 1.0], [1.0, 0.5], [2.0, -1.0], [3.0, 0.0], [4.0, 2.0]];
        let y = array![0.3, 1.1, 2.2, 2.9, 4.5];
        let eval = EvalSet {
            name: "test".into(),
            features: x.clone(),
            row_ids: (0..5).collect(),
        };
        let run = fit_predict(&PredictorSpec::new(Task::Regression, PredictorKind::ClosedFormLinear), x.view(), y.view(), &[eval]).unwrap();
        let scores: Vec<f64> = run
            .predictions("test")
            .iter()
            .map(|p| rmse(p.view(), y.view()))
            .collect();
        assert_eq!(MeanStd::of(&scores).std, 0.0);
        assert!(run.repeats.windows(2).all(|w| w[0].parameters == w[1].parameters));
    }

    #[test]
    fn sgd_repeats_differ_but_are_reproducible() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]];
        let y = array![0.1, 0.9, 2.1, 3.0, 3.8, 5.2];
        let spec = PredictorSpec {
            epochs: 500,
            ..PredictorSpec::new(Task::Regression, PredictorKind::SgdLinear)
        };
        let a = fit_predict(&spec, x.view(), y.view(), &[]).unwrap();
        let b = fit_predict(&spec, x.view(), y.view(), &[]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.repeats[0].parameters, a.repeats[1].parameters);
        assert!((a.repeats[0].parameters[1] - 1.0).abs() < 0.1);
    }

    #[test]
    fn mean_std_is_population() {
        let s = MeanStd::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
    }

    #[test]
    fn rejects_non_binary_classification_targets() {
        let x = array![[0.0], [1.0]];
        let y = array![0.0, 2.0];
        let spec = PredictorSpec::new(Task::Classification, PredictorKind::ClosedFormLinear);
        assert!(fit_predict(&spec, x.view(), y.view(), &[]).is_err());
    }
}
