//! Linear-Gaussian structural causal model with a declared ground-truth graph.
//!
//! ```text
//! A        ~ Bernoulli(0.5)
//! c_k      = Σ_{p -> k} λ_pk c_p + u_k,            u_k ~ N(0, 1)
//! x_{k,r}  = c_k + [r < s] · effect · A + noise · ε
//! y        = Σ_k β_k c_k + effect · A + noise · ε
//! ```
//!
//! Concepts are independent of `A`; the first `s` readouts of every concept
//! carry a direct effect of `A` and are therefore descendants of it, the
//! remaining readouts are not.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::schema::{ColumnSpec, Role, Schema};
use super::table::{Split, TabularDataset};
use crate::causal_graph::ConceptGraph;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub graph: ConceptGraph,
    pub noise_scale: f64,
    pub sensitive_effect: f64,
    pub seed: u64,
    /// Observed covariate columns per concept.
    pub readouts_per_concept: usize,
    /// How many of each concept's readouts receive the direct effect of `A`.
    pub sensitive_readouts: usize,
    /// Coefficient of each concept in the target.
    pub target_weights: Vec<f64>,
}

impl SyntheticSpec {
    /// Two readouts per concept (one affected by `A`), unit target weights.
    pub fn new(n_samples: usize, graph: ConceptGraph, sensitive_effect: f64, seed: u64) -> Self {
        let n = graph.n();
        Self {
            n_samples,
            graph,
            noise_scale: 0.5,
            sensitive_effect,
            seed,
            readouts_per_concept: 2,
            sensitive_readouts: 1,
            target_weights: vec![1.0; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("synthetic n_samples must be positive".into()));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::Config("synthetic noise_scale must be positive".into()));
        }
        if !self.sensitive_effect.is_finite() {
            return Err(Error::Config("synthetic sensitive_effect must be finite".into()));
        }
        if self.readouts_per_concept == 0 || self.sensitive_readouts > self.readouts_per_concept {
            return Err(Error::Config(
                "need 1 <= readouts_per_concept and sensitive_readouts <= readouts_per_concept"
                    .into(),
            ));
        }
        if self.target_weights.len() != self.graph.n() {
            return Err(Error::Config(format!(
                "{} target weights for {} concepts",
                self.target_weights.len(),
                self.graph.n()
            )));
        }
        // Re-validate in case the graph was deserialized without going through the constructor.
        ConceptGraph::new(self.graph.labels().to_vec(), self.graph.edges().to_vec())?;
        Ok(())
    }
}

/// Generated table plus the latent concept values that produced it.
#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub dataset: TabularDataset,
    pub concepts: Array2<f64>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TabularDataset> {
    Ok(generate_synthetic_with_concepts(spec)?.dataset)
}

pub fn generate_synthetic_with_concepts(spec: &SyntheticSpec) -> Result<SyntheticSample> {
    spec.validate()?;
    let n = spec.graph.n();
    let order = spec.graph.topological_order();
    let c = spec.graph.adjacency();
    let r = spec.readouts_per_concept;

    let mut columns = vec![ColumnSpec::binary("a", Role::Sensitive, "0", "1")];
    let mut non_descendant = vec![false];
    for k in 0..n {
        for j in 0..r {
            columns.push(ColumnSpec::continuous(
                &format!("{}_{}", spec.graph.labels()[k], j + 1),
                Role::Covariate,
            ));
            non_descendant.push(j >= spec.sensitive_readouts);
        }
    }
    columns.push(ColumnSpec::continuous("y", Role::Target));
    non_descendant.push(false);
    let schema = Schema::new(columns)?;
    let width = schema.width();

    let mut rng = seed::rng(spec.seed);
    let mut rows = Array2::zeros((spec.n_samples, width));
    let mut concepts = Array2::zeros((spec.n_samples, n));
    let mut cv = vec![0.0; n];
    for i in 0..spec.n_samples {
        let a = if rng.gen::<f64>() < 0.5 { 1.0 } else { 0.0 };
        for &k in &order {
            let mut v: f64 = rng.sample(StandardNormal);
            for p in 0..n {
                let w = c.get(p, k);
                if w != 0.0 {
                    v += w * cv[p];
                }
            }
            cv[k] = v;
        }
        rows[[i, 0]] = a;
        for k in 0..n {
            concepts[[i, k]] = cv[k];
            for j in 0..r {
                let e: f64 = rng.sample(StandardNormal);
                let direct = if j < spec.sensitive_readouts {
                    spec.sensitive_effect * a
                } else {
                    0.0
                };
                rows[[i, 1 + k * r + j]] = cv[k] + direct + spec.noise_scale * e;
            }
        }
        let e: f64 = rng.sample(StandardNormal);
        let y: f64 = spec
            .target_weights
            .iter()
            .zip(&cv)
            .map(|(b, v)| b * v)
            .sum::<f64>()
            + spec.sensitive_effect * a
            + spec.noise_scale * e;
        rows[[i, width - 1]] = y;
    }
    let dataset = TabularDataset::from_parts(
        schema,
        rows,
        vec![Split::Train; spec.n_samples],
        None,
        Some(non_descendant),
    )?;
    Ok(SyntheticSample { dataset, concepts })
}
