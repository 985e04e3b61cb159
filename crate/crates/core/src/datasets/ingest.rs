//! CSV ingestion for the Adult census and LSAC law-school tables.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::schema::{ColumnSpec, Role, Schema};
use super::table::TabularDataset;
use crate::error::{Error, Result};

/// Header-indexed CSV contents.
pub(crate) struct RawTable {
    pub headers: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader
            .headers()?
            .iter()
            .map(|h| h.to_string())
            .collect::<Vec<_>>();
        let mut records = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Ingestion {
                row: i,
                message: e.to_string(),
            })?;
            records.push(rec.iter().map(|f| f.to_string()).collect());
        }
        Ok(Self { headers, records })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing required column '{name}'")))
    }
}

pub(crate) fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "?"
}

fn distinct_sorted<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    values
        .map(|s| s.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Encode already-cleaned records whose fields line up with `schema`.
fn encode(schema: Schema, records: &[Vec<String>], row_ids: &[usize]) -> Result<TabularDataset> {
    let width = schema.width();
    let mut data = Vec::with_capacity(records.len() * width);
    for (rec, &row) in records.iter().zip(row_ids) {
        let fields: Vec<&str> = rec.iter().map(String::as_str).collect();
        data.extend(schema.encode_row(&fields, row)?);
    }
    let rows = Array2::from_shape_vec((records.len(), width), data)
        .map_err(|e| Error::Schema(e.to_string()))?;
    TabularDataset::new(schema, rows)
}

const ADULT_COLUMNS: [&str; 11] = [
    "age",
    "race",
    "sex",
    "native-country",
    "marital-status",
    "relationship",
    "workclass",
    "hours-per-week",
    "occupation",
    "education-num",
    "income",
];

/// Load the UCI Adult table (train and test files concatenated, with header).
///
/// Rows with any missing field (`?` or empty) are dropped. Sensitive:
/// age, race, sex, native country. Covariates: marital status,
/// relationship, work class, weekly hours, occupation, education level.
/// Target: income above 50K. Race and native country are reduced to
/// White / non-White and United-States / other so that every sensitive
/// column except age is binary. Continuous columns are standardized over all
/// rows (which are all in the training split until [`super::split`] runs).
pub fn load_adult(path: &Path) -> Result<TabularDataset> {
    let raw = RawTable::read(path)?;
    let idx: Vec<usize> = ADULT_COLUMNS
        .iter()
        .map(|c| raw.column(c))
        .collect::<Result<_>>()?;

    let mut kept = Vec::new();
    let mut row_ids = Vec::new();
    for (i, rec) in raw.records.iter().enumerate() {
        if rec.len() != raw.headers.len() {
            return Err(Error::Ingestion {
                row: i,
                message: format!("expected {} fields, found {}", raw.headers.len(), rec.len()),
            });
        }
        if rec.iter().any(|f| is_missing(f)) {
            continue;
        }
        let mut fields: Vec<String> = idx.iter().map(|&j| rec[j].clone()).collect();
        fields[1] = if fields[1] == "White" { "White" } else { "non-White" }.into();
        fields[3] = if fields[3] == "United-States" {
            "United-States"
        } else {
            "other"
        }
        .into();
        let income = fields[10].trim_end_matches('.');
        fields[10] = match income {
            ">50K" => ">50K".into(),
            "<=50K" => "<=50K".into(),
            other => {
                return Err(Error::Ingestion {
                    row: i,
                    message: format!("unrecognised income label '{other}'"),
                })
            }
        };
        kept.push(fields);
        row_ids.push(i);
    }

    let cats = |k: usize| distinct_sorted(kept.iter().map(|r| r[k].as_str()));
    let check_cats = |name: &str, c: Vec<String>| -> Result<Vec<String>> {
        if c.len() < 2 {
            return Err(Error::Schema(format!(
                "column '{name}' has fewer than 2 categories after cleaning"
            )));
        }
        Ok(c)
    };
    let schema = Schema::new(vec![
        ColumnSpec::continuous("age", Role::Sensitive),
        ColumnSpec::binary("race", Role::Sensitive, "non-White", "White"),
        ColumnSpec::binary("sex", Role::Sensitive, "Female", "Male"),
        ColumnSpec::binary("native-country", Role::Sensitive, "other", "United-States"),
        ColumnSpec::categorical("marital-status", Role::Covariate, check_cats("marital-status", cats(4))?),
        ColumnSpec::categorical("relationship", Role::Covariate, check_cats("relationship", cats(5))?),
        ColumnSpec::categorical("workclass", Role::Covariate, check_cats("workclass", cats(6))?),
        ColumnSpec::continuous("hours-per-week", Role::Covariate),
        ColumnSpec::categorical("occupation", Role::Covariate, check_cats("occupation", cats(8))?),
        ColumnSpec::continuous("education-num", Role::Covariate),
        ColumnSpec::binary("income", Role::Target, "<=50K", ">50K"),
    ])?;
    let mut ds = encode(schema, &kept, &row_ids)?;
    ds.standardize()?;
    Ok(ds)
}

/// Source column names for the LSAC table; public copies disagree on naming,
/// so the mapping is always explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LawColumns {
    pub gender: String,
    pub race: String,
    pub lsat: String,
    pub gpa: String,
    pub fya: String,
    /// Race value treated as the reference group; every other value maps to
    /// its complement.
    pub race_reference: String,
}

impl Default for LawColumns {
    fn default() -> Self {
        Self {
            gender: "sex".into(),
            race: "race".into(),
            lsat: "LSAT".into(),
            gpa: "UGPA".into(),
            fya: "ZFYA".into(),
            race_reference: "White".into(),
        }
    }
}

/// Load the LSAC law-school table. Sensitive: gender, race (reference vs
/// other). Covariates: LSAT, GPA. Target: first-year average (continuous).
/// Rows missing any mapped field are dropped.
pub fn load_law(path: &Path, columns: &LawColumns) -> Result<TabularDataset> {
    let raw = RawTable::read(path)?;
    let names = [
        &columns.gender,
        &columns.race,
        &columns.lsat,
        &columns.gpa,
        &columns.fya,
    ];
    let idx: Vec<usize> = names
        .iter()
        .map(|c| raw.column(c))
        .collect::<Result<_>>()?;
    let other = format!("non-{}", columns.race_reference);

    let mut kept = Vec::new();
    let mut row_ids = Vec::new();
    for (i, rec) in raw.records.iter().enumerate() {
        if rec.len() != raw.headers.len() {
            return Err(Error::Ingestion {
                row: i,
                message: format!("expected {} fields, found {}", raw.headers.len(), rec.len()),
            });
        }
        if idx.iter().any(|&j| is_missing(&rec[j])) {
            continue;
        }
        let mut fields: Vec<String> = idx.iter().map(|&j| rec[j].clone()).collect();
        fields[1] = if fields[1] == columns.race_reference {
            columns.race_reference.clone()
        } else {
            other.clone()
        };
        kept.push(fields);
        row_ids.push(i);
    }
    let genders = distinct_sorted(kept.iter().map(|r| r[0].as_str()));
    if genders.len() != 2 {
        return Err(Error::Schema(format!(
            "gender column '{}' must have exactly 2 values, found {:?}",
            columns.gender, genders
        )));
    }
    let schema = Schema::new(vec![
        ColumnSpec::binary("gender", Role::Sensitive, &genders[0], &genders[1]),
        ColumnSpec::binary("race", Role::Sensitive, &other, &columns.race_reference),
        ColumnSpec::continuous("LSAT", Role::Covariate),
        ColumnSpec::continuous("GPA", Role::Covariate),
        ColumnSpec::continuous("FYA", Role::Target),
    ])?;
    let mut ds = encode(schema, &kept, &row_ids)?;
    ds.standardize()?;
    Ok(ds)
}
