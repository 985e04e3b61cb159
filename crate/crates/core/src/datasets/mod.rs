//! Tabular data: schema, encoding, ingestion, splitting, synthesis, archives.

mod archive;
mod ingest;
mod schema;
mod synthetic;
mod table;

pub use archive::{read_archive, write_archive};
pub use ingest::{load_adult, load_law, LawColumns};
pub use schema::{ColumnKind, ColumnSpec, Head, Role, Schema};
pub use synthetic::{generate_synthetic, generate_synthetic_with_concepts, SyntheticSample, SyntheticSpec};
pub use table::{split, Scaler, Split, TabularDataset};
