//! Causally constrained variational representations for counterfactually
//! fair prediction, plus the tooling to train, evaluate and audit them.

pub mod audit;
pub mod causal_graph;
pub mod cfvae;
pub mod datasets;
pub mod error;
pub mod nn;
pub mod predictors;
pub mod seed;
pub mod training;

pub use causal_graph::{AdjacencyMatrix, CausalDiagram, ConceptGraph, Edge, SemMode, StructureTransform};
pub use cfvae::{CfvaeConfig, CfvaeModel, LossBreakdown};
pub use datasets::{ColumnKind, ColumnSpec, Role, Schema, Split, TabularDataset};
pub use error::{Error, Result};
pub use training::{train, transform_dataset, TrainConfig, TrainReport};
pub use predictors::{FeatureSetKind, PredictorKind, PredictorSpec, Task};
pub use audit::{AuditReport, AuditSet};
