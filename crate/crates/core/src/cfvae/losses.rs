//! Loss terms of the objective and their gradients.
//!
//! All batch quantities are means over the batch. Functions suffixed `_grad`
//! return the value together with gradients of that value.

use ndarray::{Array2, ArrayView2, Axis};

use crate::datasets::Head;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5; // ln(2π)

/// Added to the product of norms in the cosine similarity.
pub const COSINE_EPS: f64 = 1e-8;

fn check_finite(name: &str, m: ArrayView2<f64>) -> Result<()> {
    for (r, row) in m.axis_iter(Axis(0)).enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                index: r,
                message: format!("non-finite value in {name}"),
            });
        }
    }
    Ok(())
}

fn same_shape(a: ArrayView2<f64>, b: ArrayView2<f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `KL[N(μ, σ²) ‖ N(0, I)] = ½ Σ (μ² + σ² − 1 − log σ²)`, averaged over rows.
pub fn kl_standard_normal(mu: ArrayView2<f64>, logvar: ArrayView2<f64>) -> Result<f64> {
    Ok(kl_standard_normal_grad(mu, logvar)?.0)
}

pub fn kl_standard_normal_grad(
    mu: ArrayView2<f64>,
    logvar: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    same_shape(mu, logvar, "kl")?;
    check_finite("mu", mu)?;
    check_finite("logvar", logvar)?;
    let b = mu.nrows().max(1) as f64;
    let mut total = 0.0;
    let mut dmu = Array2::zeros(mu.raw_dim());
    let mut dlv = Array2::zeros(mu.raw_dim());
    ndarray::Zip::from(&mut dmu)
        .and(&mut dlv)
        .and(mu)
        .and(logvar)
        .for_each(|gm, gl, &m, &lv| {
            let var = lv.exp();
            total += 0.5 * (m * m + var - 1.0 - lv);
            *gm = m / b;
            *gl = 0.5 * (var - 1.0) / b;
        });
    Ok((total / b, dmu, dlv))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Batch-mean log-likelihood of `target` under the decoder output `out`,
/// summed over heads, plus its gradient with respect to `out`.
///
/// Gaussian heads use unit variance; Bernoulli heads read a logit;
/// categorical heads read unnormalised log-probabilities over a one-hot group.
pub fn log_likelihood_grad(
    heads: &[Head],
    out: ArrayView2<f64>,
    target: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>)> {
    same_shape(out, target, "decoder output vs target")?;
    let width = heads.last().map_or(0, Head::end);
    if width != out.ncols() {
        return Err(Error::Dimension(format!(
            "decoder heads cover {width} columns, output has {}",
            out.ncols()
        )));
    }
    check_finite("decoder output", out)?;
    let b = out.nrows().max(1) as f64;
    let mut grad = Array2::zeros(out.raw_dim());
    let mut total = 0.0;
    for ((o, t), mut g) in out
        .axis_iter(Axis(0))
        .zip(target.axis_iter(Axis(0)))
        .zip(grad.axis_iter_mut(Axis(0)))
    {
        for head in heads {
            match *head {
                Head::Gaussian { col } => {
                    let d = t[col] - o[col];
                    total += -0.5 * LN_2PI - 0.5 * d * d;
                    g[col] = d / b;
                }
                Head::Bernoulli { col } => {
                    let l = o[col];
                    total += t[col] * l - softplus(l);
                    g[col] = (t[col] - sigmoid(l)) / b;
                }
                Head::Categorical { start, len } => {
                    let logits = o.slice(ndarray::s![start..start + len]);
                    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
                    for k in 0..len {
                        let p = (logits[k] - lse).exp();
                        total += t[start + k] * (logits[k] - lse);
                        // target rows are one-hot, so Σ_k t_k = 1
                        g[start + k] = (t[start + k] - p) / b;
                    }
                }
            }
        }
    }
    Ok((total / b, grad))
}

pub fn log_likelihood(heads: &[Head], out: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<f64> {
    Ok(log_likelihood_grad(heads, out, target)?.0)
}

fn log_normal(z: f64, mu: f64, logvar: f64) -> f64 {
    let d = z - mu;
    -0.5 * (LN_2PI + logvar + d * d * (-logvar).exp())
}

fn logsumexp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Unweighted total-correlation estimate with its gradients.
///
/// Minibatch-weighted sampling: `log q(z_j) ≈ log-mean-exp_i log q(z_j | x_i)`
/// over the `B` batch members, and each marginal `log q(z_jd)` likewise per
/// dimension. The estimate is `mean_j [log q(z_j) − Σ_d log q(z_jd)]`.
///
/// The `log(N B)` normalisation often used instead shifts the estimate by
/// the constant `(D − 1) log N`; gradients are identical, so `n_dataset` only
/// bounds the batch size.
pub fn total_correlation_grad(
    z: ArrayView2<f64>,
    mu: ArrayView2<f64>,
    logvar: ArrayView2<f64>,
    n_dataset: usize,
) -> Result<(f64, Array2<f64>, Array2<f64>, Array2<f64>)> {
    same_shape(z, mu, "tcr z vs mu")?;
    same_shape(mu, logvar, "tcr mu vs logvar")?;
    let (bsz, dims) = z.dim();
    if bsz < 2 {
        return Err(Error::Config(
            "total-correlation estimate needs a batch of at least 2".into(),
        ));
    }
    check_finite("z", z)?;
    check_finite("mu", mu)?;
    check_finite("logvar", logvar)?;
    if n_dataset < bsz {
        return Err(Error::Config(format!(
            "batch of {bsz} exceeds the dataset size {n_dataset}"
        )));
    }
    let b = bsz as f64;
    let log_b = b.ln();

    let mut dz = Array2::zeros((bsz, dims));
    let mut dmu = Array2::zeros((bsz, dims));
    let mut dlv = Array2::zeros((bsz, dims));
    let inv_var: Array2<f64> = logvar.mapv(|lv| (-lv).exp());

    let mut comp = vec![0.0; bsz * dims]; // [i, d] log N(z_jd; μ_id, σ_id)
    let mut joint = vec![0.0; bsz];
    let mut col = vec![0.0; bsz];
    let mut total = 0.0;
    for j in 0..bsz {
        for i in 0..bsz {
            let mut s = 0.0;
            for d in 0..dims {
                let l = log_normal(z[[j, d]], mu[[i, d]], logvar[[i, d]]);
                comp[i * dims + d] = l;
                s += l;
            }
            joint[i] = s;
        }
        let lse_joint = logsumexp(&joint);
        let mut value = lse_joint - log_b;
        // weights w_i (joint softmax) minus v_id (per-dimension softmax)
        let w: Vec<f64> = joint.iter().map(|s| (s - lse_joint).exp()).collect();
        for d in 0..dims {
            for i in 0..bsz {
                col[i] = comp[i * dims + d];
            }
            let lse_d = logsumexp(&col);
            value -= lse_d - log_b;
            for i in 0..bsz {
                let v = (col[i] - lse_d).exp();
                let coef = (w[i] - v) / b;
                if coef == 0.0 {
                    continue;
                }
                let diff = z[[j, d]] - mu[[i, d]];
                let iv = inv_var[[i, d]];
                // ∂l/∂z = −diff·iv, ∂l/∂μ = diff·iv, ∂l/∂lv = −½ + ½ diff² iv
                dz[[j, d]] -= coef * diff * iv;
                dmu[[i, d]] += coef * diff * iv;
                dlv[[i, d]] += coef * (-0.5 + 0.5 * diff * diff * iv);
            }
        }
        total += value;
    }
    Ok((total / b, dz, dmu, dlv))
}

/// `γ ×` the total-correlation estimate of the (pre-transform) latent batch.
pub fn tcr_loss(
    z: ArrayView2<f64>,
    mu: ArrayView2<f64>,
    logvar: ArrayView2<f64>,
    gamma: f64,
    n_dataset: usize,
) -> Result<f64> {
    if z.nrows() < 2 {
        return Err(Error::Config(
            "total-correlation estimate needs a batch of at least 2".into(),
        ));
    }
    if gamma == 0.0 {
        return Ok(0.0);
    }
    Ok(gamma * total_correlation_grad(z, mu, logvar, n_dataset)?.0)
}

/// Mean over rows of `a·b / (‖a‖ ‖b‖ + ε)` with gradients for both inputs.
pub fn cosine_similarity_grad(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    if a.ncols() != b.ncols() {
        return Err(Error::Config(format!(
            "orthogonality term needs equal latent widths, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    same_shape(a, b, "opr")?;
    let n = a.nrows().max(1) as f64;
    let mut ga = Array2::zeros(a.raw_dim());
    let mut gb = Array2::zeros(b.raw_dim());
    let mut total = 0.0;
    for (r, (ra, rb)) in a.axis_iter(Axis(0)).zip(b.axis_iter(Axis(0))).enumerate() {
        let dot = ra.dot(&rb);
        let na = ra.dot(&ra).sqrt();
        let nb = rb.dot(&rb).sqrt();
        let denom = na * nb + COSINE_EPS;
        let cs = dot / denom;
        total += cs;
        // d/da (dot/denom) = b/denom − dot·nb/denom² · a/na
        for k in 0..ra.len() {
            let mut da = rb[k] / denom;
            let mut db = ra[k] / denom;
            if na > 0.0 {
                da -= dot * nb / (denom * denom) * ra[k] / na;
            }
            if nb > 0.0 {
                db -= dot * na / (denom * denom) * rb[k] / nb;
            }
            ga[[r, k]] = da / n;
            gb[[r, k]] = db / n;
        }
    }
    Ok((total / n, ga, gb))
}

/// Orthogonality-promoting regulariser: the batch-mean cosine similarity
/// between each sample's `z_a` and structured `z'_x`.
pub fn opr_loss(z_a: ArrayView2<f64>, z_x_structured: ArrayView2<f64>) -> Result<f64> {
    Ok(cosine_similarity_grad(z_a, z_x_structured)?.0)
}
