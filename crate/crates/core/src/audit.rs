//! Situation-test auditing: matched pairs with inverted sensitive values and
//! unfairness scores of downstream predictions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cfvae::CfvaeModel;
use crate::datasets::{ColumnKind, Role, Split, TabularDataset};
use crate::error::{Error, Result};
use crate::predictors::{
    accuracy, feature_matrix, fit_predict, rmse, EvalSet, FeatureSetKind, MeanStd, PredictionRun,
    PredictorSpec, Task,
};
use crate::seed;

/// How one sensitive column is inverted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Inversion {
    /// 0 ↔ 1 on a binary column.
    Flip,
    /// Binarise at the training-split median; a value on one side is replaced
    /// by the training mean of the other side.
    MedianSwap,
    /// Category relabelling for a one-hot column, by category label.
    Relabel { mapping: BTreeMap<String, String> },
}

/// Which rows enter the audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Selection {
    /// Every row of the test split.
    TestSplit,
    /// Rows whose binary or categorical columns carry the given labels, taken
    /// in seeded random order and capped at `max_rows`.
    Matching {
        #[serde(default)]
        test_only: bool,
        equals: BTreeMap<String, String>,
        #[serde(default)]
        max_rows: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
}

impl Selection {
    /// Up to 10,000 women with income at most 50K, drawn from the whole table.
    pub fn adult_default(seed: u64) -> Self {
        Selection::Matching {
            test_only: false,
            equals: [("sex", "Female"), ("income", "<=50K")]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            max_rows: Some(10_000),
            seed,
        }
    }

    fn describe(&self) -> String {
        match self {
            Selection::TestSplit => "test split".into(),
            Selection::Matching {
                test_only,
                equals,
                max_rows,
                ..
            } => {
                let conds: Vec<String> = equals.iter().map(|(k, v)| format!("{k} = {v}")).collect();
                let pool = if *test_only { "test split" } else { "all rows" };
                match max_rows {
                    Some(m) => format!("{pool} where {}, at most {m}", conds.join(" and ")),
                    None => format!("{pool} where {}", conds.join(" and ")),
                }
            }
        }
    }
}

/// Original rows and their sensitive-inverted counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditSet {
    pub original: TabularDataset,
    pub matched: TabularDataset,
    /// Row of `original` within the source dataset.
    pub row_ids: Vec<usize>,
    pub description: String,
}

impl AuditSet {
    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }
}

fn encoded_label_value(dataset: &TabularDataset, column: &str, label: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let schema = dataset.schema();
    let ci = schema.column_index(column)?;
    let spec = &schema.columns[ci];
    let span = schema.spans()[ci].clone();
    let k = spec
        .categories
        .iter()
        .position(|c| c == label)
        .ok_or_else(|| Error::Audit(format!("column '{column}' has no category '{label}'")))?;
    match spec.kind {
        ColumnKind::Binary => Ok((vec![span.start], vec![k as f64])),
        ColumnKind::Categorical => {
            let hot = span.start + k;
            Ok((span.clone().collect(), span.map(|j| if j == hot { 1.0 } else { 0.0 }).collect()))
        }
        ColumnKind::Continuous => Err(Error::Audit(format!(
            "selection on continuous column '{column}' is not supported"
        ))),
    }
}

fn select_rows(dataset: &TabularDataset, selection: &Selection) -> Result<Vec<usize>> {
    match selection {
        Selection::TestSplit => Ok(dataset.indices(Split::Test)),
        Selection::Matching {
            test_only,
            equals,
            max_rows,
            seed: s,
        } => {
            let conds = equals
                .iter()
                .map(|(c, l)| encoded_label_value(dataset, c, l))
                .collect::<Result<Vec<_>>>()?;
            let rows = dataset.rows();
            let mut keep: Vec<usize> = (0..dataset.n_rows())
                .filter(|&r| !*test_only || dataset.split_labels()[r] == Split::Test)
                .filter(|&r| {
                    conds
                        .iter()
                        .all(|(cols, vals)| cols.iter().zip(vals).all(|(&j, &v)| rows[[r, j]] == v))
                })
                .collect();
            if let Some(m) = *max_rows {
                if keep.len() > m {
                    keep.shuffle(&mut seed::rng(seed::derive(*s, "audit-selection")));
                    keep.truncate(m);
                    keep.sort_unstable();
                }
            }
            Ok(keep)
        }
    }
}

/// Default rule per sensitive column: binary flips, continuous swaps across
/// the median; categorical columns need an explicit [`Inversion::Relabel`].
pub fn default_inversions(dataset: &TabularDataset) -> BTreeMap<String, Inversion> {
    let schema = dataset.schema();
    schema
        .columns_with_role(Role::Sensitive)
        .into_iter()
        .filter_map(|ci| {
            let c = &schema.columns[ci];
            match c.kind {
                ColumnKind::Binary => Some((c.name.clone(), Inversion::Flip)),
                ColumnKind::Continuous => Some((c.name.clone(), Inversion::MedianSwap)),
                ColumnKind::Categorical => None,
            }
        })
        .collect()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Replace every sensitive column of `rows` by its inverted value.
fn invert(dataset: &TabularDataset, rows: &Array2<f64>, rules: &BTreeMap<String, Inversion>) -> Result<Array2<f64>> {
    let schema = dataset.schema();
    let spans = schema.spans();
    let train = dataset.indices(Split::Train);
    let mut out = rows.clone();
    for ci in schema.columns_with_role(Role::Sensitive) {
        let spec = &schema.columns[ci];
        let span = spans[ci].clone();
        let rule = rules.get(&spec.name).ok_or_else(|| {
            Error::Audit(format!("sensitive column '{}' has no inversion rule", spec.name))
        })?;
        match (rule, spec.kind) {
            (Inversion::Flip, ColumnKind::Binary) => {
                out.column_mut(span.start).mapv_inplace(|v| 1.0 - v);
            }
            (Inversion::MedianSwap, ColumnKind::Continuous) => {
                let j = span.start;
                let mut vals: Vec<f64> = train.iter().map(|&r| dataset.rows()[[r, j]]).collect();
                if vals.is_empty() {
                    return Err(Error::Audit("median inversion needs training rows".into()));
                }
                let m = median(&mut vals);
                let (lo, hi): (Vec<f64>, Vec<f64>) = vals.iter().partition(|&&v| v <= m);
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                if lo.is_empty() || hi.is_empty() {
                    return Err(Error::Audit(format!(
                        "column '{}' is constant on the training split; cannot invert",
                        spec.name
                    )));
                }
                let (lo_mean, hi_mean) = (mean(&lo), mean(&hi));
                out.column_mut(j).mapv_inplace(|v| if v <= m { hi_mean } else { lo_mean });
            }
            (Inversion::Relabel { mapping }, ColumnKind::Categorical) => {
                let idx = |label: &str| {
                    spec.categories.iter().position(|c| c == label).ok_or_else(|| {
                        Error::Audit(format!("column '{}' has no category '{label}'", spec.name))
                    })
                };
                let mut perm: Vec<usize> = (0..spec.categories.len()).collect();
                for (from, to) in mapping {
                    perm[idx(from)?] = idx(to)?;
                }
                for mut row in out.rows_mut() {
                    let old: Vec<f64> = span.clone().map(|j| row[j]).collect();
                    for j in span.clone() {
                        row[j] = 0.0;
                    }
                    for (k, &v) in old.iter().enumerate() {
                        row[span.start + perm[k]] += v;
                    }
                }
            }
            (rule, kind) => {
                return Err(Error::Audit(format!(
                    "rule {rule:?} does not apply to {kind:?} column '{}'",
                    spec.name
                )))
            }
        }
    }
    Ok(out)
}

/// Select audit rows and build their matched counterparts.
pub fn build_audit_set(
    dataset: &TabularDataset,
    rules: &BTreeMap<String, Inversion>,
    selection: &Selection,
) -> Result<AuditSet> {
    let row_ids = select_rows(dataset, selection)?;
    let original = dataset.select(&row_ids);
    let flipped = invert(dataset, original.rows(), rules)?;
    let matched = TabularDataset::from_parts(
        original.schema().clone(),
        flipped,
        original.split_labels().to_vec(),
        Some(original.scalers().to_vec()),
        original.non_descendant_flags().map(<[bool]>::to_vec),
    )?;
    let a = dataset.schema().encoded_indices(Role::Sensitive);
    debug_assert!(original
        .rows()
        .columns()
        .into_iter()
        .zip(matched.rows().columns())
        .enumerate()
        .all(|(j, (o, m))| a.contains(&j) || o == m));
    Ok(AuditSet {
        original,
        matched,
        row_ids,
        description: selection.describe(),
    })
}

/// Root-mean-square difference between paired regression outputs.
pub fn ufs_r(original: ArrayView1<f64>, matched: ArrayView1<f64>) -> Result<f64> {
    if original.len() != matched.len() {
        return Err(Error::Audit(format!(
            "prediction vectors differ in length ({} vs {})",
            original.len(),
            matched.len()
        )));
    }
    Ok(rmse(original, matched))
}

/// Fraction of pairs whose binary prediction changes.
pub fn ufs_c(original: ArrayView1<f64>, matched: ArrayView1<f64>) -> Result<f64> {
    if original.len() != matched.len() {
        return Err(Error::Audit(format!(
            "prediction vectors differ in length ({} vs {})",
            original.len(),
            matched.len()
        )));
    }
    if original.iter().chain(matched.iter()).any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Audit("classification predictions must be 0 or 1".into()));
    }
    let n = original.len().max(1) as f64;
    Ok(original.iter().zip(matched.iter()).filter(|(a, b)| a != b).count() as f64 / n)
}

/// One report row: a method label evaluated through one feature set.
#[derive(Debug, Clone)]
pub struct MethodSpec<'a> {
    pub label: String,
    pub features: FeatureSetKind,
    pub model: Option<&'a CfvaeModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub method: String,
    pub feature_set: FeatureSetKind,
    pub predictor: String,
    pub score: MeanStd,
    pub ufs: MeanStd,
    /// For representation features: whether audit features were identical
    /// across every matched pair.
    pub structural_zero: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub task: Task,
    pub audit_rows: usize,
    pub cells: Vec<ReportCell>,
    /// Prediction runs keyed by (method, predictor).
    pub runs: Vec<((String, String), PredictionRun)>,
}

impl AuditReport {
    pub fn score_name(&self) -> &'static str {
        match self.task {
            Task::Regression => "RMSE",
            Task::Classification => "Accuracy",
        }
    }

    pub fn ufs_name(&self) -> &'static str {
        match self.task {
            Task::Regression => "UFS_R",
            Task::Classification => "UFS_C",
        }
    }

    pub fn cell(&self, method: &str, predictor: &str) -> Option<&ReportCell> {
        self.cells.iter().find(|c| c.method == method && c.predictor == predictor)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,feature_set,predictor,metric,metric_mean,metric_std,ufs_metric,ufs_mean,ufs_std,structural_zero\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                c.method,
                c.feature_set,
                c.predictor,
                self.score_name(),
                c.score.mean,
                c.score.std,
                self.ufs_name(),
                c.ufs.mean,
                c.ufs.std,
                c.structural_zero.map_or("", |b| if b { "true" } else { "false" })
            );
        }
        s
    }

    /// Methods as rows, `(score, UFS)` per predictor as columns; entries are
    /// mean ± standard deviation over repeats.
    pub fn to_markdown(&self) -> String {
        let mut methods: Vec<&str> = Vec::new();
        let mut predictors: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !methods.contains(&c.method.as_str()) {
                methods.push(&c.method);
            }
            if !predictors.contains(&c.predictor.as_str()) {
                predictors.push(&c.predictor);
            }
        }
        let mut s = String::from("| Method |");
        for p in &predictors {
            let _ = write!(s, " {p} {} | {p} {} |", self.score_name(), self.ufs_name());
        }
        s.push_str("\n|---|");
        for _ in &predictors {
            s.push_str("---|---|");
        }
        s.push('\n');
        for m in &methods {
            let _ = write!(s, "| {m} |");
            for p in &predictors {
                match self.cell(m, p) {
                    Some(c) => {
                        let _ = write!(s, " {} | {} |", c.score, c.ufs);
                    }
                    None => s.push_str(" | |"),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join("report.csv");
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let md = dir.join("report.md");
        std::fs::write(&md, self.to_markdown()).map_err(|e| Error::io(&md, e))?;
        let pred_dir = dir.join("predictions");
        std::fs::create_dir_all(&pred_dir).map_err(|e| Error::io(&pred_dir, e))?;
        for ((method, predictor), run) in &self.runs {
            let name = format!("{}__{}.csv", sanitize(method), sanitize(predictor));
            run.write_csv(&pred_dir.join(name))?;
        }
        Ok(())
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

/// Fit every predictor on every method's training features, score it on the
/// test split and measure unfairness on the audit pairs.
pub fn evaluate(
    dataset: &TabularDataset,
    audit: &AuditSet,
    methods: &[MethodSpec<'_>],
    predictors: &[PredictorSpec],
) -> Result<AuditReport> {
    let task = match predictors.first() {
        Some(p) => p.task,
        None => return Err(Error::Config("no predictors to evaluate".into())),
    };
    if predictors.iter().any(|p| p.task != task) {
        return Err(Error::Config("all predictors of one report must share a task".into()));
    }
    let train_rows = dataset.indices(Split::Train);
    let test_rows = dataset.indices(Split::Test);
    // regression is scored in the target's raw units
    let target = |rows: &[usize]| match task {
        Task::Regression => dataset.target_raw(rows),
        Task::Classification => dataset.target(rows),
    };
    let y_train = target(&train_rows);
    let y_test = target(&test_rows);
    let audit_all = audit.original.all_indices();

    struct Prepared {
        train: Array2<f64>,
        evals: Vec<EvalSet>,
        structural_zero: Option<bool>,
    }
    let prepared = methods
        .iter()
        .map(|m| {
            let f = |ds: &TabularDataset, rows: &[usize]| feature_matrix(m.features, ds, rows, m.model);
            let audit_o = f(&audit.original, &audit_all)?;
            let audit_m = f(&audit.matched, &audit_all)?;
            let structural_zero = if m.features.uses_sensitive() {
                None
            } else {
                let same = audit_o == audit_m;
                if !same {
                    return Err(Error::Audit(format!(
                        "{} features changed under sensitive inversion for method '{}'",
                        m.features, m.label
                    )));
                }
                Some(same)
            };
            Ok(Prepared {
                train: f(dataset, &train_rows)?,
                evals: vec![
                    EvalSet {
                        name: "test".into(),
                        features: f(dataset, &test_rows)?,
                        row_ids: test_rows.clone(),
                    },
                    EvalSet {
                        name: "audit_original".into(),
                        features: audit_o,
                        row_ids: audit.row_ids.clone(),
                    },
                    EvalSet {
                        name: "audit_matched".into(),
                        features: audit_m,
                        row_ids: audit.row_ids.clone(),
                    },
                ],
                structural_zero,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..methods.len())
        .flat_map(|m| (0..predictors.len()).map(move |p| (m, p)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(mi, pi)| {
            let prep = &prepared[mi];
            let spec = &predictors[pi];
            let run = fit_predict(spec, prep.train.view(), y_train.view(), &prep.evals)?;
            let mut scores = Vec::with_capacity(run.repeats.len());
            let mut ufs = Vec::with_capacity(run.repeats.len());
            for r in &run.repeats {
                let test = r.predictions["test"].view();
                let (o, m) = (r.predictions["audit_original"].view(), r.predictions["audit_matched"].view());
                match task {
                    Task::Regression => {
                        scores.push(rmse(test, y_test.view()));
                        ufs.push(ufs_r(o, m)?);
                    }
                    Task::Classification => {
                        scores.push(accuracy(test, y_test.view()));
                        ufs.push(ufs_c(o, m)?);
                    }
                }
            }
            let cell = ReportCell {
                method: methods[mi].label.clone(),
                feature_set: methods[mi].features,
                predictor: spec.name().to_string(),
                score: MeanStd::of(&scores),
                ufs: MeanStd::of(&ufs),
                structural_zero: prep.structural_zero,
            };
            Ok((cell, ((methods[mi].label.clone(), spec.name().to_string()), run)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (cells, runs) = results.into_iter().unzip();
    Ok(AuditReport {
        task,
        audit_rows: audit.len(),
        cells,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{ColumnSpec, Schema};
    use ndarray::array;

    fn dataset() -> TabularDataset {
        let schema = Schema::new(vec![
            ColumnSpec::binary("sex", Role::Sensitive, "Female", "Male"),
            ColumnSpec::continuous("age", Role::Sensitive),
            ColumnSpec::categorical("grp", Role::Sensitive, vec!["p".into(), "q".into(), "r".into()]),
            ColumnSpec::continuous("x", Role::Covariate),
            ColumnSpec::binary("income", Role::Target, "<=50K", ">50K"),
        ])
        .unwrap();
        let rows = array![
            [1.0, 20.0, 1.0, 0.0, 0.0, 0.5, 0.0],
            [0.0, 30.0, 0.0, 1.0, 0.0, 1.5, 1.0],
            [0.0, 40.0, 0.0, 0.0, 1.0, 2.5, 0.0],
            [1.0, 50.0, 0.0, 1.0, 0.0, 3.5, 0.0],
            [0.0, 60.0, 1.0, 0.0, 0.0, 4.5, 0.0],
        ];
        TabularDataset::new(schema, rows).unwrap()
    }

    fn rules() -> BTreeMap<String, Inversion> {
        let mut r = default_inversions(&dataset());
        r.insert(
            "grp".into(),
            Inversion::Relabel {
                mapping: [("p", "q"), ("q", "p")].into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
            },
        );
        r
    }

    #[test]
    fn flips_only_sensitive_columns() {
        let ds = dataset();
        let a = build_audit_set(&ds, &rules(), &Selection::Matching {
            test_only: false,
            equals: BTreeMap::new(),
            max_rows: None,
            seed: 0,
        })
        .unwrap();
        assert_eq!(a.len(), 5);
        let (o, m) = (a.original.rows(), a.matched.rows());
        assert_eq!(o[[0, 0]], 1.0);
        assert_eq!(m[[0, 0]], 0.0);
        // median 40: {20,30,40} mean 30, {50,60} mean 55
        assert_eq!(m.column(1).to_vec(), vec![55.0, 55.0, 55.0, 30.0, 30.0]);
        assert_eq!(m.row(0).slice(ndarray::s![2..5]).to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(m.row(2).slice(ndarray::s![2..5]).to_vec(), vec![0.0, 0.0, 1.0]);
        assert_eq!(o.column(5), m.column(5));
        assert_eq!(o.column(6), m.column(6));
    }

    #[test]
    fn binary_flip_is_an_involution() {
        let ds = dataset();
        let mut r = BTreeMap::new();
        r.insert("sex".to_string(), Inversion::Flip);
        r.insert("age".to_string(), Inversion::MedianSwap);
        r.insert("grp".to_string(), rules()["grp"].clone());
        let once = invert(&ds, ds.rows(), &r).unwrap();
        let twice = invert(&ds, &once, &r).unwrap();
        assert_eq!(twice.column(0), ds.rows().column(0));
        assert_eq!(twice.slice(ndarray::s![.., 2..5]), ds.rows().slice(ndarray::s![.., 2..5]));
    }

    #[test]
    fn categorical_without_rule_is_rejected() {
        let ds = dataset();
        let err = build_audit_set(&ds, &default_inversions(&ds), &Selection::TestSplit).unwrap_err();
        assert!(matches!(err, Error::Audit(_)));
    }

    #[test]
    fn selection_by_labels_and_cap() {
        let ds = dataset();
        let sel = |max| Selection::Matching {
            test_only: false,
            equals: [("sex".to_string(), "Female".to_string()), ("income".to_string(), "<=50K".to_string())]
                .into_iter()
                .collect(),
            max_rows: max,
            seed: 3,
        };
        assert_eq!(select_rows(&ds, &sel(None)).unwrap(), vec![2, 4]);
        assert_eq!(select_rows(&ds, &sel(Some(1))).unwrap().len(), 1);
        assert_eq!(select_rows(&ds, &sel(Some(10))).unwrap(), vec![2, 4]);
    }

    #[test]
    fn ufs_examples() {
        assert_eq!(ufs_r(array![1.0, 2.0].view(), array![1.0, 2.0].view()).unwrap(), 0.0);
        assert_eq!(ufs_r(array![1.0, 1.0].view(), array![0.0, 0.0].view()).unwrap(), 1.0);
        assert_eq!(ufs_r(array![3.0].view(), array![0.0].view()).unwrap(), 3.0);
        assert_eq!(ufs_c(array![0.0, 1.0].view(), array![0.0, 1.0].view()).unwrap(), 0.0);
        assert_eq!(ufs_c(array![0.0, 1.0].view(), array![1.0, 0.0].view()).unwrap(), 1.0);
        assert_eq!(
            ufs_c(array![0.0, 1.0, 1.0, 0.0].view(), array![0.0, 0.0, 1.0, 1.0].view()).unwrap(),
            0.5
        );
        assert!(ufs_r(array![1.0].view(), array![1.0, 2.0].view()).is_err());
        assert!(ufs_c(array![0.5].view(), array![1.0].view()).is_err());
    }
}
