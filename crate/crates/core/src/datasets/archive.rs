//! On-disk dataset archive: a TOML manifest next to a raw little-endian
//! `f64` matrix and a one-byte-per-row split file.
//!
//! ```text
//! <dir>/manifest.toml   schema, scalers, shape, optional ground-truth flags
//! <dir>/matrix.f64      N × D row-major, little-endian
//! <dir>/split.u8        0 = train, 1 = test
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::schema::Schema;
use super::table::{Scaler, Split, TabularDataset};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    n_rows: usize,
    n_cols: usize,
    schema: Schema,
    scalers: Vec<Scaler>,
    #[serde(default)]
    non_descendant: Option<Vec<bool>>,
}

const FORMAT: &str = "cfvae-dataset-v1";

pub fn write_archive(dataset: &TabularDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        format: FORMAT.into(),
        n_rows: dataset.n_rows(),
        n_cols: dataset.rows().ncols(),
        schema: dataset.schema().clone(),
        scalers: dataset.scalers().to_vec(),
        non_descendant: dataset.non_descendant_flags().map(<[bool]>::to_vec),
    };
    let text = toml::to_string_pretty(&manifest).map_err(|e| Error::Serde(e.to_string()))?;
    let mpath = dir.join("manifest.toml");
    fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;

    let mut bytes = Vec::with_capacity(dataset.rows().len() * 8);
    for v in dataset.rows().iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let xpath = dir.join("matrix.f64");
    fs::write(&xpath, bytes).map_err(|e| Error::io(&xpath, e))?;

    let split: Vec<u8> = dataset
        .split_labels()
        .iter()
        .map(|s| match s {
            Split::Train => 0,
            Split::Test => 1,
        })
        .collect();
    let spath = dir.join("split.u8");
    fs::write(&spath, split).map_err(|e| Error::io(&spath, e))?;
    Ok(())
}

pub fn read_archive(dir: &Path) -> Result<TabularDataset> {
    let mpath = dir.join("manifest.toml");
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
    if manifest.format != FORMAT {
        return Err(Error::Serde(format!(
            "unsupported archive format '{}'",
            manifest.format
        )));
    }
    let xpath = dir.join("matrix.f64");
    let bytes = fs::read(&xpath).map_err(|e| Error::io(&xpath, e))?;
    if bytes.len() != manifest.n_rows * manifest.n_cols * 8 {
        return Err(Error::Serde(format!(
            "matrix file has {} bytes, expected {}",
            bytes.len(),
            manifest.n_rows * manifest.n_cols * 8
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let rows = Array2::from_shape_vec((manifest.n_rows, manifest.n_cols), values)
        .map_err(|e| Error::Serde(e.to_string()))?;
    let spath = dir.join("split.u8");
    let split = fs::read(&spath)
        .map_err(|e| Error::io(&spath, e))?
        .into_iter()
        .map(|b| match b {
            0 => Ok(Split::Train),
            1 => Ok(Split::Test),
            other => Err(Error::Serde(format!("bad split byte {other}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    TabularDataset::from_parts(
        manifest.schema,
        rows,
        split,
        Some(manifest.scalers),
        manifest.non_descendant,
    )
}
