use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::losses::{
    cosine_similarity_grad, kl_standard_normal_grad, log_likelihood_grad,
    total_correlation_grad,
};
use crate::causal_graph::{ConceptGraph, SemMode, StructureTransform};
use crate::datasets::{Head, Role, Schema};
use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpCache, MlpGrads};
use crate::seed::{self, Rng};

fn default_hidden() -> Vec<usize> {
    vec![32]
}

fn default_opr_weight() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfvaeConfig {
    /// Width of `Z_a`.
    pub latent_a: usize,
    /// Width of `Z_x` (and `Z'_x`); equals the number of concepts.
    pub latent_x: usize,
    /// Weight of the total-correlation term.
    pub gamma: f64,
    #[serde(default = "default_opr_weight")]
    pub opr_weight: f64,
    #[serde(default = "default_true")]
    pub use_causal_constraints: bool,
    pub graph: ConceptGraph,
    #[serde(default)]
    pub sem_mode: SemMode,
    #[serde(default = "default_hidden")]
    pub encoder_hidden: Vec<usize>,
    #[serde(default = "default_hidden")]
    pub decoder_hidden: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl CfvaeConfig {
    /// Latent widths both equal to the number of concepts in `graph`.
    pub fn new(graph: ConceptGraph, gamma: f64) -> Self {
        let n = graph.n();
        Self {
            latent_a: n,
            latent_x: n,
            gamma,
            opr_weight: 1.0,
            use_causal_constraints: true,
            graph,
            sem_mode: SemMode::Exact,
            encoder_hidden: default_hidden(),
            decoder_hidden: default_hidden(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_a == 0 || self.latent_x == 0 {
            return Err(Error::Config("latent widths must be positive".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.opr_weight >= 0.0 && self.opr_weight.is_finite()) {
            return Err(Error::Config(format!(
                "opr_weight must be >= 0, got {}",
                self.opr_weight
            )));
        }
        if self.use_causal_constraints && self.graph.n() != self.latent_x {
            return Err(Error::Config(format!(
                "concept graph has {} nodes but latent_x = {}",
                self.graph.n(),
                self.latent_x
            )));
        }
        if self.opr_weight > 0.0 && self.latent_a != self.latent_x {
            return Err(Error::Config(format!(
                "orthogonality term needs latent_a == latent_x, got {} and {}",
                self.latent_a, self.latent_x
            )));
        }
        if self.encoder_hidden.contains(&0) || self.decoder_hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn transform(&self) -> Result<StructureTransform> {
        if self.use_causal_constraints {
            StructureTransform::new(&self.graph.adjacency(), self.sem_mode)
        } else {
            Ok(StructureTransform::identity(self.latent_x))
        }
    }
}

/// Gaussian posterior parameters, reparameterised samples and the
/// structured code for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    pub mu_a: Array2<f64>,
    pub logvar_a: Array2<f64>,
    pub mu_x: Array2<f64>,
    pub logvar_x: Array2<f64>,
    pub z_a: Array2<f64>,
    pub z_x: Array2<f64>,
    pub z_x_structured: Array2<f64>,
}

/// Per-term values of the objective. `tcr` and `opr` are already multiplied
/// by their weights, so `total = -(recon_a + recon_x - kl_a - kl_x) + tcr + opr`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon_a: f64,
    pub recon_x: f64,
    pub kl_a: f64,
    pub kl_x: f64,
    pub tcr: f64,
    pub opr: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [
            self.recon_a,
            self.recon_x,
            self.kl_a,
            self.kl_x,
            self.tcr,
            self.opr,
            self.total,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            recon_a: self.recon_a * k,
            recon_x: self.recon_x * k,
            kl_a: self.kl_a * k,
            kl_x: self.kl_x * k,
            tcr: self.tcr * k,
            opr: self.opr * k,
            total: self.total * k,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            recon_a: self.recon_a + o.recon_a,
            recon_x: self.recon_x + o.recon_x,
            kl_a: self.kl_a + o.kl_a,
            kl_x: self.kl_x + o.kl_x,
            tcr: self.tcr + o.tcr,
            opr: self.opr + o.opr,
            total: self.total + o.total,
        }
    }
}

/// Unweighted ingredients of the objective for one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub recon_a: f64,
    pub recon_x: f64,
    pub kl_a: f64,
    pub kl_x: f64,
    /// Total-correlation estimate before multiplying by gamma.
    pub total_correlation: f64,
    /// Mean cosine similarity before multiplying by the OPR weight.
    pub cosine: f64,
}

/// Assemble the objective: negative constrained ELBO plus weighted regularisers.
pub fn total_loss(parts: &LossParts, config: &CfvaeConfig) -> LossBreakdown {
    let tcr = if config.gamma == 0.0 {
        0.0
    } else {
        config.gamma * parts.total_correlation
    };
    let opr = if config.opr_weight == 0.0 {
        0.0
    } else {
        config.opr_weight * parts.cosine
    };
    let elbo = parts.recon_a + parts.recon_x - parts.kl_a - parts.kl_x;
    LossBreakdown {
        recon_a: parts.recon_a,
        recon_x: parts.recon_x,
        kl_a: parts.kl_a,
        kl_x: parts.kl_x,
        tcr,
        opr,
        total: -elbo + tcr + opr,
    }
}

/// Coefficients applied to each term when back-propagating. The objective
/// uses [`TermWeights::objective`]; unit vectors isolate single terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermWeights {
    pub recon_a: f64,
    pub recon_x: f64,
    pub kl_a: f64,
    pub kl_x: f64,
    pub total_correlation: f64,
    pub cosine: f64,
}

impl TermWeights {
    pub fn objective(config: &CfvaeConfig) -> Self {
        Self {
            recon_a: -1.0,
            recon_x: -1.0,
            kl_a: 1.0,
            kl_x: 1.0,
            total_correlation: config.gamma,
            cosine: config.opr_weight,
        }
    }

    pub fn zero() -> Self {
        Self {
            recon_a: 0.0,
            recon_x: 0.0,
            kl_a: 0.0,
            kl_x: 0.0,
            total_correlation: 0.0,
            cosine: 0.0,
        }
    }

    pub fn apply(&self, p: &LossParts) -> f64 {
        self.recon_a * p.recon_a
            + self.recon_x * p.recon_x
            + self.kl_a * p.kl_a
            + self.kl_x * p.kl_x
            + self.total_correlation * p.total_correlation
            + self.cosine * p.cosine
    }
}

/// Standard-normal draws used by the reparameterisation for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Noise {
    pub eps_a: Array2<f64>,
    pub eps_x: Array2<f64>,
}

impl Noise {
    pub fn sample(batch: usize, latent_a: usize, latent_x: usize, rng: &mut Rng) -> Self {
        use rand::Rng as _;
        let mut draw = |d| Array2::from_shape_simple_fn((batch, d), || rng.sample(StandardNormal));
        let eps_a = draw(latent_a);
        let eps_x = draw(latent_x);
        Self { eps_a, eps_x }
    }

    pub fn zeros(batch: usize, latent_a: usize, latent_x: usize) -> Self {
        Self {
            eps_a: Array2::zeros((batch, latent_a)),
            eps_x: Array2::zeros((batch, latent_x)),
        }
    }
}

/// Parameter gradients, aligned with [`CfvaeModel::tensors_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct CfvaeGrads {
    pub enc_a: MlpGrads,
    pub enc_x: MlpGrads,
    pub dec_a: MlpGrads,
    pub dec_x: MlpGrads,
}

impl CfvaeGrads {
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.enc_a.tensors();
        v.extend(self.enc_x.tensors());
        v.extend(self.dec_a.tensors());
        v.extend(self.dec_x.tensors());
        v
    }
}

/// Everything retained from a forward pass.
struct Forward {
    latent: LatentBatch,
    parts: LossParts,
    enc_a: MlpCache,
    enc_x: MlpCache,
    dec_a: MlpCache,
    dec_x: MlpCache,
    dec_a_out: Array2<f64>,
    dec_x_out: Array2<f64>,
}

/// Two encoders (`A -> Z_a`, `X -> Z_x`), the structural transform
/// `Z_x -> Z'_x`, and two decoders (`Z_a -> A`, `Z'_x -> X`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfvaeModel {
    pub config: CfvaeConfig,
    pub schema: Schema,
    pub enc_a: Mlp,
    pub enc_x: Mlp,
    pub dec_a: Mlp,
    pub dec_x: Mlp,
    #[serde(skip)]
    heads: Option<(Vec<Head>, Vec<Head>)>,
    #[serde(skip)]
    transform: Option<StructureTransform>,
}

impl CfvaeModel {
    pub fn new(config: CfvaeConfig, schema: &Schema) -> Result<Self> {
        config.validate()?;
        let wa = schema.block_width(Role::Sensitive);
        let wx = schema.block_width(Role::Covariate);
        if wx == 0 {
            return Err(Error::Schema("no covariate columns to encode".into()));
        }
        let mut rng = seed::rng(seed::derive(config.seed, "model-init"));
        let sizes = |input: usize, hidden: &[usize], output: usize| {
            let mut s = vec![input];
            s.extend_from_slice(hidden);
            s.push(output);
            s
        };
        let enc_a = Mlp::new(&sizes(wa, &config.encoder_hidden, 2 * config.latent_a), &mut rng);
        let enc_x = Mlp::new(&sizes(wx, &config.encoder_hidden, 2 * config.latent_x), &mut rng);
        let dec_a = Mlp::new(&sizes(config.latent_a, &config.decoder_hidden, wa), &mut rng);
        let dec_x = Mlp::new(&sizes(config.latent_x, &config.decoder_hidden, wx), &mut rng);
        let mut model = Self {
            config,
            schema: schema.clone(),
            enc_a,
            enc_x,
            dec_a,
            dec_x,
            heads: None,
            transform: None,
        };
        model.rebuild()?;
        Ok(model)
    }

    /// Recompute derived state (heads, structural transform) after
    /// deserialisation or a config change.
    pub fn rebuild(&mut self) -> Result<()> {
        self.config.validate()?;
        let heads_a = self.schema.heads(Role::Sensitive);
        let heads_x = self.schema.heads(Role::Covariate);
        let end = |h: &[Head]| h.last().map_or(0, Head::end);
        if self.dec_a.output_width() != end(&heads_a) || self.dec_x.output_width() != end(&heads_x) {
            return Err(Error::Dimension(
                "decoder output widths do not cover the schema's encoded columns".into(),
            ));
        }
        if self.enc_a.output_width() != 2 * self.config.latent_a
            || self.enc_x.output_width() != 2 * self.config.latent_x
        {
            return Err(Error::Dimension(
                "encoder output width must be twice the latent width".into(),
            ));
        }
        self.heads = Some((heads_a, heads_x));
        self.transform = Some(self.config.transform()?);
        Ok(())
    }

    fn heads(&self) -> &(Vec<Head>, Vec<Head>) {
        self.heads.as_ref().expect("model built via new() or rebuild()")
    }

    pub fn structure_transform(&self) -> &StructureTransform {
        self.transform.as_ref().expect("model built via new() or rebuild()")
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.enc_a.tensors_mut();
        v.extend(self.enc_x.tensors_mut());
        v.extend(self.dec_a.tensors_mut());
        v.extend(self.dec_x.tensors_mut());
        v
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.enc_a.tensors();
        v.extend(self.enc_x.tensors());
        v.extend(self.dec_a.tensors());
        v.extend(self.dec_x.tensors());
        v
    }

    fn check_inputs(&self, a: ArrayView2<f64>, x: ArrayView2<f64>) -> Result<()> {
        if a.ncols() != self.enc_a.input_width() || x.ncols() != self.enc_x.input_width() {
            return Err(Error::Dimension(format!(
                "inputs have widths ({}, {}), model expects ({}, {})",
                a.ncols(),
                x.ncols(),
                self.enc_a.input_width(),
                self.enc_x.input_width()
            )));
        }
        if a.nrows() != x.nrows() {
            return Err(Error::Dimension("A and X blocks have different row counts".into()));
        }
        Ok(())
    }

    /// Posterior mean and log-variance of `Z_x` given the covariate block.
    pub fn encode_x_params(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        if x.ncols() != self.enc_x.input_width() {
            return Err(Error::Dimension(format!(
                "covariate block has width {}, model expects {}",
                x.ncols(),
                self.enc_x.input_width()
            )));
        }
        let out = self.enc_x.predict(x);
        let (mu, lv) = split_heads(&out, self.config.latent_x);
        check_rows("encoder output", &out)?;
        Ok((mu, lv))
    }

    fn encode_inner(
        &self,
        a: ArrayView2<f64>,
        x: ArrayView2<f64>,
        noise: &Noise,
    ) -> Result<(LatentBatch, MlpCache, MlpCache)> {
        self.check_inputs(a, x)?;
        let b = a.nrows();
        if noise.eps_a.dim() != (b, self.config.latent_a) || noise.eps_x.dim() != (b, self.config.latent_x)
        {
            return Err(Error::Dimension("noise shape does not match batch".into()));
        }
        let (out_a, cache_a) = self.enc_a.forward(a);
        let (out_x, cache_x) = self.enc_x.forward(x);
        check_rows("A-encoder output", &out_a)?;
        check_rows("X-encoder output", &out_x)?;
        let (mu_a, logvar_a) = split_heads(&out_a, self.config.latent_a);
        let (mu_x, logvar_x) = split_heads(&out_x, self.config.latent_x);
        let reparam = |mu: &Array2<f64>, lv: &Array2<f64>, eps: &Array2<f64>| {
            let mut z = mu.clone();
            ndarray::Zip::from(&mut z)
                .and(lv)
                .and(eps)
                .for_each(|z, &l, &e| *z += (0.5 * l).exp() * e);
            z
        };
        let z_a = reparam(&mu_a, &logvar_a, &noise.eps_a);
        let z_x = reparam(&mu_x, &logvar_x, &noise.eps_x);
        check_rows("z_a", &z_a)?;
        check_rows("z_x", &z_x)?;
        let z_x_structured = self.structure_transform().apply(z_x.view())?;
        Ok((
            LatentBatch {
                mu_a,
                logvar_a,
                mu_x,
                logvar_x,
                z_a,
                z_x,
                z_x_structured,
            },
            cache_a,
            cache_x,
        ))
    }

    /// Encode a batch with the given reparameterisation noise.
    pub fn encode_with_noise(&self, a: ArrayView2<f64>, x: ArrayView2<f64>, noise: &Noise) -> Result<LatentBatch> {
        Ok(self.encode_inner(a, x, noise)?.0)
    }

    /// Encode a batch, drawing fresh noise from `rng`.
    pub fn encode(&self, a: ArrayView2<f64>, x: ArrayView2<f64>, rng: &mut Rng) -> Result<LatentBatch> {
        let noise = Noise::sample(a.nrows(), self.config.latent_a, self.config.latent_x, rng);
        self.encode_with_noise(a, x, &noise)
    }

    /// Batch-mean reconstruction log-likelihoods `(recon_a, recon_x)`; the
    /// X decoder reads the structured code.
    pub fn decode(&self, latent: &LatentBatch, a: ArrayView2<f64>, x: ArrayView2<f64>) -> Result<(f64, f64)> {
        self.check_inputs(a, x)?;
        let (ha, hx) = self.heads();
        let ra = log_likelihood_grad(ha, self.dec_a.predict(latent.z_a.view()).view(), a)?.0;
        let rx = log_likelihood_grad(hx, self.dec_x.predict(latent.z_x_structured.view()).view(), x)?.0;
        Ok((ra, rx))
    }

    fn forward(&self, a: ArrayView2<f64>, x: ArrayView2<f64>, noise: &Noise, n_dataset: usize) -> Result<Forward> {
        let (latent, enc_a, enc_x) = self.encode_inner(a, x, noise)?;
        let (ha, hx) = self.heads();
        let (dec_a_out, dec_a) = self.dec_a.forward(latent.z_a.view());
        let (dec_x_out, dec_x) = self.dec_x.forward(latent.z_x_structured.view());
        let recon_a = log_likelihood_grad(ha, dec_a_out.view(), a)?.0;
        let recon_x = log_likelihood_grad(hx, dec_x_out.view(), x)?.0;
        let kl_a = kl_standard_normal_grad(latent.mu_a.view(), latent.logvar_a.view())?.0;
        let kl_x = kl_standard_normal_grad(latent.mu_x.view(), latent.logvar_x.view())?.0;
        let total_correlation = if self.config.gamma == 0.0 {
            0.0
        } else {
            total_correlation_grad(
                latent.z_x.view(),
                latent.mu_x.view(),
                latent.logvar_x.view(),
                n_dataset,
            )?
            .0
        };
        let cosine = if self.config.latent_a == self.config.latent_x {
            cosine_similarity_grad(latent.z_a.view(), latent.z_x_structured.view())?.0
        } else {
            0.0
        };
        Ok(Forward {
            latent,
            parts: LossParts {
                recon_a,
                recon_x,
                kl_a,
                kl_x,
                total_correlation,
                cosine,
            },
            enc_a,
            enc_x,
            dec_a,
            dec_x,
            dec_a_out,
            dec_x_out,
        })
    }

    /// Unweighted loss ingredients for a batch.
    pub fn loss_parts(&self, a: ArrayView2<f64>, x: ArrayView2<f64>, noise: &Noise, n_dataset: usize) -> Result<LossParts> {
        Ok(self.forward(a, x, noise, n_dataset)?.parts)
    }

    pub fn loss(&self, a: ArrayView2<f64>, x: ArrayView2<f64>, noise: &Noise, n_dataset: usize) -> Result<LossBreakdown> {
        Ok(total_loss(&self.loss_parts(a, x, noise, n_dataset)?, &self.config))
    }

    /// Gradient of `Σ_t weights_t · term_t` with respect to every parameter,
    /// alongside the loss ingredients.
    pub fn gradients(
        &self,
        a: ArrayView2<f64>,
        x: ArrayView2<f64>,
        noise: &Noise,
        n_dataset: usize,
        weights: &TermWeights,
    ) -> Result<(LossParts, CfvaeGrads)> {
        let fwd = self.forward(a, x, noise, n_dataset)?;
        let lat = &fwd.latent;
        let (ha, hx) = self.heads();

        let mut d_za = Array2::<f64>::zeros(lat.z_a.raw_dim());
        let mut d_zxs = Array2::<f64>::zeros(lat.z_x.raw_dim());
        let mut d_zx = Array2::<f64>::zeros(lat.z_x.raw_dim());
        let mut d_mu_a = Array2::<f64>::zeros(lat.mu_a.raw_dim());
        let mut d_lv_a = Array2::<f64>::zeros(lat.mu_a.raw_dim());
        let mut d_mu_x = Array2::<f64>::zeros(lat.mu_x.raw_dim());
        let mut d_lv_x = Array2::<f64>::zeros(lat.mu_x.raw_dim());

        // reconstruction
        let (_, g_out_a) = log_likelihood_grad(ha, fwd.dec_a_out.view(), a)?;
        let (din_a, dec_a_grads) = self.dec_a.backward(&fwd.dec_a, (g_out_a * weights.recon_a).view());
        d_za += &din_a;
        let (_, g_out_x) = log_likelihood_grad(hx, fwd.dec_x_out.view(), x)?;
        let (din_x, dec_x_grads) = self.dec_x.backward(&fwd.dec_x, (g_out_x * weights.recon_x).view());
        d_zxs += &din_x;

        // KL
        if weights.kl_a != 0.0 {
            let (_, gm, gl) = kl_standard_normal_grad(lat.mu_a.view(), lat.logvar_a.view())?;
            d_mu_a.scaled_add(weights.kl_a, &gm);
            d_lv_a.scaled_add(weights.kl_a, &gl);
        }
        if weights.kl_x != 0.0 {
            let (_, gm, gl) = kl_standard_normal_grad(lat.mu_x.view(), lat.logvar_x.view())?;
            d_mu_x.scaled_add(weights.kl_x, &gm);
            d_lv_x.scaled_add(weights.kl_x, &gl);
        }

        // total correlation on the pre-transform code
        if weights.total_correlation != 0.0 {
            let (_, gz, gm, gl) =
                total_correlation_grad(lat.z_x.view(), lat.mu_x.view(), lat.logvar_x.view(), n_dataset)?;
            d_zx.scaled_add(weights.total_correlation, &gz);
            d_mu_x.scaled_add(weights.total_correlation, &gm);
            d_lv_x.scaled_add(weights.total_correlation, &gl);
        }

        // orthogonality between Z_a and Z'_x
        if weights.cosine != 0.0 {
            let (_, ga, gx) = cosine_similarity_grad(lat.z_a.view(), lat.z_x_structured.view())?;
            d_za.scaled_add(weights.cosine, &ga);
            d_zxs.scaled_add(weights.cosine, &gx);
        }

        // through the structural transform
        d_zx += &self.structure_transform().backward(d_zxs.view())?;

        // through the reparameterisation z = μ + exp(½ lv) ε
        reparam_backward(&d_za, &lat.logvar_a, &noise.eps_a, &mut d_mu_a, &mut d_lv_a);
        reparam_backward(&d_zx, &lat.logvar_x, &noise.eps_x, &mut d_mu_x, &mut d_lv_x);

        let g_enc_a = ndarray::concatenate![ndarray::Axis(1), d_mu_a, d_lv_a];
        let g_enc_x = ndarray::concatenate![ndarray::Axis(1), d_mu_x, d_lv_x];
        let (_, enc_a_grads) = self.enc_a.backward(&fwd.enc_a, g_enc_a.view());
        let (_, enc_x_grads) = self.enc_x.backward(&fwd.enc_x, g_enc_x.view());

        Ok((
            fwd.parts,
            CfvaeGrads {
                enc_a: enc_a_grads,
                enc_x: enc_x_grads,
                dec_a: dec_a_grads,
                dec_x: dec_x_grads,
            },
        ))
    }

    /// Deterministic representation: posterior means of `Z_x` passed through
    /// the structural transform. Only the covariate block is read.
    pub fn structured_means(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let (mu, _) = self.encode_x_params(x)?;
        self.structure_transform().apply(mu.view())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            seed: self.config.seed,
            model: self.clone(),
        };
        let text = serde_json::to_string(&ckpt).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Serde(format!("unsupported checkpoint format '{}'", ckpt.format)));
        }
        let mut model = ckpt.model;
        model.rebuild()?;
        Ok(model)
    }
}

const CHECKPOINT_FORMAT: &str = "cfvae-checkpoint-v1";

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    seed: u64,
    model: CfvaeModel,
}

fn split_heads(out: &Array2<f64>, d: usize) -> (Array2<f64>, Array2<f64>) {
    (
        out.slice(ndarray::s![.., ..d]).to_owned(),
        out.slice(ndarray::s![.., d..]).to_owned(),
    )
}

fn check_rows(name: &str, m: &Array2<f64>) -> Result<()> {
    for (r, row) in m.rows().into_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                index: r,
                message: format!("non-finite {name}"),
            });
        }
    }
    Ok(())
}

fn reparam_backward(
    dz: &Array2<f64>,
    logvar: &Array2<f64>,
    eps: &Array2<f64>,
    dmu: &mut Array2<f64>,
    dlv: &mut Array2<f64>,
) {
    *dmu += dz;
    ndarray::Zip::from(dlv)
        .and(dz)
        .and(logvar)
        .and(eps)
        .for_each(|g, &d, &l, &e| *g += d * e * 0.5 * (0.5 * l).exp());
}
