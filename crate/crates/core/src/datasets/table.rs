use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, Role, Schema};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Affine map from raw units to stored units: `stored = (raw - mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub scale: f64,
}

impl Scaler {
    pub const IDENTITY: Scaler = Scaler {
        mean: 0.0,
        scale: 1.0,
    };

    /// `self` followed by `next` (which was fitted on already-scaled values).
    fn then(self, next: Scaler) -> Scaler {
        Scaler {
            mean: self.mean + next.mean * self.scale,
            scale: self.scale * next.scale,
        }
    }

    pub fn to_raw(&self, stored: f64) -> f64 {
        stored * self.scale + self.mean
    }
}

/// Encoded table with role-tagged columns and split membership.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    schema: Schema,
    rows: Array2<f64>,
    split: Vec<Split>,
    /// One entry per schema column; identity for non-continuous columns.
    scalers: Vec<Scaler>,
    /// Ground-truth "not a descendant of the sensitive attributes" flags per
    /// schema column, when known (synthetic data).
    non_descendant: Option<Vec<bool>>,
}

impl TabularDataset {
    /// New dataset with every row in the training split.
    pub fn new(schema: Schema, rows: Array2<f64>) -> Result<Self> {
        let split = vec![Split::Train; rows.nrows()];
        Self::from_parts(schema, rows, split, None, None)
    }

    pub fn from_parts(
        schema: Schema,
        rows: Array2<f64>,
        split: Vec<Split>,
        scalers: Option<Vec<Scaler>>,
        non_descendant: Option<Vec<bool>>,
    ) -> Result<Self> {
        schema.validate()?;
        if rows.ncols() != schema.width() {
            return Err(Error::Schema(format!(
                "matrix has {} columns, schema encodes to {}",
                rows.ncols(),
                schema.width()
            )));
        }
        if split.len() != rows.nrows() {
            return Err(Error::Schema(format!(
                "{} split labels for {} rows",
                split.len(),
                rows.nrows()
            )));
        }
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Ingestion {
                row: i / rows.ncols().max(1),
                message: "missing or non-finite value".into(),
            });
        }
        let scalers = scalers.unwrap_or_else(|| vec![Scaler::IDENTITY; schema.columns.len()]);
        if scalers.len() != schema.columns.len() {
            return Err(Error::Schema("one scaler per column required".into()));
        }
        if let Some(flags) = &non_descendant {
            if flags.len() != schema.columns.len() {
                return Err(Error::Schema("one non-descendant flag per column required".into()));
            }
        }
        Ok(Self {
            schema,
            rows,
            split,
            scalers,
            non_descendant,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn split_labels(&self) -> &[Split] {
        &self.split
    }

    pub fn scalers(&self) -> &[Scaler] {
        &self.scalers
    }

    pub fn non_descendant_flags(&self) -> Option<&[bool]> {
        self.non_descendant.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn indices(&self, which: Split) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.split[i] == which).collect()
    }

    /// Encoded columns with `role` for the given rows.
    pub fn block(&self, role: Role, rows: &[usize]) -> Array2<f64> {
        let cols = self.schema.encoded_indices(role);
        self.rows.select(Axis(0), rows).select(Axis(1), &cols)
    }

    pub fn target(&self, rows: &[usize]) -> Array1<f64> {
        let col = self.schema.encoded_indices(Role::Target)[0];
        rows.iter().map(|&r| self.rows[[r, col]]).collect()
    }

    /// Target values in raw units (undoing standardization).
    pub fn target_raw(&self, rows: &[usize]) -> Array1<f64> {
        let ti = self.schema.columns_with_role(Role::Target)[0];
        let s = self.scalers[ti];
        self.target(rows).mapv(|v| s.to_raw(v))
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.n_rows()).collect()
    }

    /// Keep only the given rows (in the given order).
    pub fn select(&self, rows: &[usize]) -> TabularDataset {
        TabularDataset {
            schema: self.schema.clone(),
            rows: self.rows.select(Axis(0), rows),
            split: rows.iter().map(|&r| self.split[r]).collect(),
            scalers: self.scalers.clone(),
            non_descendant: self.non_descendant.clone(),
        }
    }

    /// Seeded uniform subsample of `n` rows (order preserved). Returns the
    /// dataset unchanged when `n >= n_rows`.
    pub fn subsample(&self, n: usize, seed: u64) -> TabularDataset {
        if n >= self.n_rows() {
            return self.clone();
        }
        let mut idx = self.all_indices();
        idx.shuffle(&mut seed::rng(seed));
        idx.truncate(n);
        idx.sort_unstable();
        self.select(&idx)
    }

    /// Standardize continuous columns to zero mean and unit variance using
    /// statistics of the training split only; the fitted transform is
    /// composed into the stored scalers.
    pub fn standardize(&mut self) -> Result<()> {
        let train = self.indices(Split::Train);
        if train.is_empty() {
            return Err(Error::Schema("cannot standardize without training rows".into()));
        }
        let spans = self.schema.spans();
        for (ci, col) in self.schema.columns.iter().enumerate() {
            if col.kind != ColumnKind::Continuous {
                continue;
            }
            let j = spans[ci].start;
            let n = train.len() as f64;
            let mean = train.iter().map(|&r| self.rows[[r, j]]).sum::<f64>() / n;
            let var = train
                .iter()
                .map(|&r| (self.rows[[r, j]] - mean).powi(2))
                .sum::<f64>()
                / n;
            let sd = var.sqrt();
            let step = Scaler {
                mean,
                scale: if sd > 0.0 { sd } else { 1.0 },
            };
            self.rows
                .column_mut(j)
                .mapv_inplace(|v| (v - step.mean) / step.scale);
            self.scalers[ci] = self.scalers[ci].then(step);
        }
        Ok(())
    }
}

/// Assign train/test labels by a seeded shuffle; exactly
/// `floor(train_fraction * N)` rows land in the training split.
pub fn split(dataset: &TabularDataset, train_fraction: f64, seed: u64) -> Result<TabularDataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.n_rows();
    if n == 0 {
        return Err(Error::Schema("cannot split an empty dataset".into()));
    }
    let n_train = ((train_fraction * n as f64) + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut labels = vec![Split::Test; n];
    for &i in &order[..n_train] {
        labels[i] = Split::Train;
    }
    let mut out = dataset.clone();
    out.split = labels;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::schema::ColumnSpec;
    use ndarray::array;

    fn tiny(n: usize) -> TabularDataset {
        let schema = Schema::new(vec![
            ColumnSpec::binary("a", Role::Sensitive, "0", "1"),
            ColumnSpec::continuous("x", Role::Covariate),
            ColumnSpec::continuous("y", Role::Target),
        ])
        .unwrap();
        let rows = Array2::from_shape_fn((n, 3), |(i, j)| match j {
            0 => (i % 2) as f64,
            1 => i as f64 * 1.5,
            _ => (i * i) as f64,
        });
        TabularDataset::new(schema, rows).unwrap()
    }

    #[test]
    fn split_counts_and_determinism() {
        let d = tiny(10);
        let s1 = split(&d, 0.7, 3).unwrap();
        assert_eq!(s1.indices(Split::Train).len(), 7);
        assert_eq!(s1.indices(Split::Test).len(), 3);
        let s2 = split(&d, 0.7, 3).unwrap();
        assert_eq!(s1.split_labels(), s2.split_labels());
    }

    #[test]
    fn split_large_count_is_floor() {
        let d = tiny(21_790);
        let s = split(&d, 0.7, 11).unwrap();
        assert_eq!(s.indices(Split::Train).len(), 15_253);
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(split(&tiny(10), 1.0, 0).is_err());
        assert!(split(&tiny(10), 0.0, 0).is_err());
        assert!(split(&tiny(0), 0.5, 0).is_err());
    }

    #[test]
    fn standardize_hand_example_and_idempotence() {
        let schema = Schema::new(vec![
            ColumnSpec::binary("a", Role::Sensitive, "0", "1"),
            ColumnSpec::continuous("gpa", Role::Covariate),
            ColumnSpec::continuous("y", Role::Target),
        ])
        .unwrap();
        let rows = array![[0., 2., 1.], [1., 4., 1.], [0., 2., 1.], [1., 4., 1.]];
        let mut d = TabularDataset::new(schema, rows).unwrap();
        d.standardize().unwrap();
        assert_eq!(d.rows().column(1).to_vec(), vec![-1.0, 1.0, -1.0, 1.0]);
        // constant column: centered, scale left at 1
        assert_eq!(d.rows().column(2).to_vec(), vec![0.0; 4]);
        assert_eq!(d.rows().column(0).to_vec(), vec![0., 1., 0., 1.]);
        let once = d.rows().clone();
        d.standardize().unwrap();
        for (a, b) in once.iter().zip(d.rows().iter()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(d.scalers()[1], Scaler { mean: 3.0, scale: 1.0 });
    }

    #[test]
    fn standardize_uses_training_rows_only() {
        let d = split(&tiny(10), 0.5, 1).unwrap();
        let mut s = d.clone();
        s.standardize().unwrap();
        let train = s.indices(Split::Train);
        let col = s.block(Role::Covariate, &train);
        let mean = col.mean().unwrap();
        assert!(mean.abs() < 1e-12);
        let test = s.indices(Split::Test);
        let test_mean = s.block(Role::Covariate, &test).mean().unwrap();
        assert!(test_mean.abs() > 1e-6);
    }
}
