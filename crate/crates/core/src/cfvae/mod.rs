//! The causally constrained VAE: model, loss terms and their gradients.

mod losses;
mod model;

pub use losses::{
    cosine_similarity_grad, kl_standard_normal, kl_standard_normal_grad, log_likelihood,
    log_likelihood_grad, opr_loss, tcr_loss, total_correlation_grad, COSINE_EPS,
};
pub use model::{
    total_loss, CfvaeConfig, CfvaeGrads, CfvaeModel, LatentBatch, LossBreakdown, LossParts, Noise,
    TermWeights,
};
