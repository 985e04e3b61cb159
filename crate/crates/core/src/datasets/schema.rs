use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    /// Encoded as a single 0/1 column; `categories[0]` ↦ 0, `categories[1]` ↦ 1.
    Binary,
    /// One-hot over `categories`, in the recorded order.
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Sensitive,
    Covariate,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: Role,
    #[serde(default)]
    pub categories: Vec<String>,
}

impl ColumnSpec {
    pub fn continuous(name: &str, role: Role) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Continuous,
            role,
            categories: Vec::new(),
        }
    }

    pub fn binary(name: &str, role: Role, zero: &str, one: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Binary,
            role,
            categories: vec![zero.to_string(), one.to_string()],
        }
    }

    pub fn categorical(name: &str, role: Role, categories: Vec<String>) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            role,
            categories,
        }
    }

    pub fn width(&self) -> usize {
        match self.kind {
            ColumnKind::Continuous | ColumnKind::Binary => 1,
            ColumnKind::Categorical => self.categories.len(),
        }
    }
}

/// Output head over a contiguous slice of an encoded block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Gaussian { col: usize },
    Bernoulli { col: usize },
    Categorical { start: usize, len: usize },
}

impl Head {
    pub fn end(&self) -> usize {
        match *self {
            Head::Gaussian { col } | Head::Bernoulli { col } => col + 1,
            Head::Categorical { start, len } => start + len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = Self { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut targets = 0;
        let mut sensitive = 0;
        for (i, c) in self.columns.iter().enumerate() {
            if self.columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Schema(format!("duplicate column '{}'", c.name)));
            }
            match c.kind {
                ColumnKind::Categorical if c.categories.len() < 2 => {
                    return Err(Error::Schema(format!(
                        "categorical column '{}' needs at least 2 categories",
                        c.name
                    )))
                }
                ColumnKind::Binary if c.categories.len() != 2 => {
                    return Err(Error::Schema(format!(
                        "binary column '{}' needs exactly 2 labels",
                        c.name
                    )))
                }
                _ => {}
            }
            match c.role {
                Role::Target => targets += 1,
                Role::Sensitive => sensitive += 1,
                Role::Covariate => {}
            }
        }
        if targets != 1 {
            return Err(Error::Schema(format!(
                "expected exactly one target column, found {targets}"
            )));
        }
        if sensitive == 0 {
            return Err(Error::Schema("no sensitive column".into()));
        }
        if self.target().kind == ColumnKind::Categorical {
            return Err(Error::Schema("target must be continuous or binary".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(ColumnSpec::width).sum()
    }

    /// Encoded column range of every schema column.
    pub fn spans(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.columns
            .iter()
            .map(|c| {
                let r = start..start + c.width();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Schema(format!("no column named '{name}'")))
    }

    pub fn target(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.role == Role::Target)
            .expect("validated schema has a target")
    }

    pub fn columns_with_role(&self, role: Role) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&i| self.columns[i].role == role)
            .collect()
    }

    /// Encoded indices (into the full row) of all columns with `role`, in schema order.
    pub fn encoded_indices(&self, role: Role) -> Vec<usize> {
        let spans = self.spans();
        self.columns_with_role(role)
            .into_iter()
            .flat_map(|i| spans[i].clone())
            .collect()
    }

    pub fn block_width(&self, role: Role) -> usize {
        self.columns_with_role(role)
            .iter()
            .map(|&i| self.columns[i].width())
            .sum()
    }

    /// Likelihood heads for the block of columns with `role`, with offsets
    /// relative to that block.
    pub fn heads(&self, role: Role) -> Vec<Head> {
        let mut start = 0;
        let mut heads = Vec::new();
        for i in self.columns_with_role(role) {
            let c = &self.columns[i];
            heads.push(match c.kind {
                ColumnKind::Continuous => Head::Gaussian { col: start },
                ColumnKind::Binary => Head::Bernoulli { col: start },
                ColumnKind::Categorical => Head::Categorical {
                    start,
                    len: c.width(),
                },
            });
            start += c.width();
        }
        heads
    }

    /// Encode one raw record (one string per schema column).
    pub fn encode_row(&self, raw: &[&str], row: usize) -> Result<Vec<f64>> {
        if raw.len() != self.columns.len() {
            return Err(Error::Ingestion {
                row,
                message: format!(
                    "expected {} fields, found {}",
                    self.columns.len(),
                    raw.len()
                ),
            });
        }
        let mut out = Vec::with_capacity(self.width());
        for (c, value) in self.columns.iter().zip(raw) {
            match c.kind {
                ColumnKind::Continuous => {
                    let v: f64 = value.trim().parse().map_err(|_| Error::Ingestion {
                        row,
                        message: format!("column '{}': '{}' is not a number", c.name, value),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Ingestion {
                            row,
                            message: format!("column '{}': non-finite value", c.name),
                        });
                    }
                    out.push(v);
                }
                ColumnKind::Binary | ColumnKind::Categorical => {
                    let k = c
                        .categories
                        .iter()
                        .position(|cat| cat == value.trim())
                        .ok_or_else(|| Error::Ingestion {
                            row,
                            message: format!(
                                "column '{}': unknown category '{}'",
                                c.name, value
                            ),
                        })?;
                    if c.kind == ColumnKind::Binary {
                        out.push(k as f64);
                    } else {
                        out.extend((0..c.categories.len()).map(|j| if j == k { 1.0 } else { 0.0 }));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`Schema::encode_row`] for unscaled encodings. Categorical
    /// groups decode to their arg-max category.
    pub fn decode_row(&self, encoded: &[f64]) -> Result<Vec<String>> {
        if encoded.len() != self.width() {
            return Err(Error::Dimension(format!(
                "encoded row has width {}, schema width is {}",
                encoded.len(),
                self.width()
            )));
        }
        let spans = self.spans();
        Ok(self
            .columns
            .iter()
            .zip(spans)
            .map(|(c, span)| match c.kind {
                ColumnKind::Continuous => format!("{}", encoded[span.start]),
                ColumnKind::Binary => {
                    c.categories[usize::from(encoded[span.start] >= 0.5)].clone()
                }
                ColumnKind::Categorical => {
                    let slice = &encoded[span];
                    let k = slice
                        .iter()
                        .enumerate()
                        .fold(0, |best, (j, &v)| if v > slice[best] { j } else { best });
                    c.categories[k].clone()
                }
            })
            .collect())
    }
}
