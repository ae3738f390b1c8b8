//! Per-batch objectives for every model family, with analytic gradients.
//!
//! Each family maximises `total`; the training loop descends on `-total`.
//! The discriminator's log-odds on the sampled codes enter as `tc_term`.
//! For the permutation families that is a total-correlation estimate, for
//! the prior-matching families a `KL(q(z) || p(z))` estimate.

use serde::{Deserialize, Serialize};

use crate::distributions::{sigmoid, softplus};
use crate::error::{Error, Result};
use crate::models::{ModelBundle, PosteriorBatch};
use crate::nn::{Act, Grads, Scalar, Tape};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Vae,
    BetaVae,
    FactorVae,
    FactorVaePriorVariant,
    Aae,
    DipVaeI,
    DipVaeIi,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Vae,
        Family::BetaVae,
        Family::FactorVae,
        Family::FactorVaePriorVariant,
        Family::Aae,
        Family::DipVaeI,
        Family::DipVaeIi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Vae => "vae",
            Family::BetaVae => "beta_vae",
            Family::FactorVae => "factor_vae",
            Family::FactorVaePriorVariant => "factor_vae_prior_variant",
            Family::Aae => "aae",
            Family::DipVaeI => "dip_vae_i",
            Family::DipVaeIi => "dip_vae_ii",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    /// What the discriminator is trained to tell apart from `q(z)`.
    pub fn fake_source(self) -> FakeSource {
        match self {
            Family::FactorVaePriorVariant | Family::Aae => FakeSource::Prior,
            _ => FakeSource::Permuted,
        }
    }

    /// The coefficient name swept for this family.
    pub fn coefficient_name(self) -> &'static str {
        match self {
            Family::Vae => "none",
            Family::BetaVae => "beta",
            Family::FactorVae | Family::FactorVaePriorVariant | Family::Aae => "gamma",
            Family::DipVaeI | Family::DipVaeIi => "lambda_od",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FakeSource {
    /// Codes from `permute_dims` of a second batch.
    Permuted,
    /// Draws from the `N(0, I)` prior.
    Prior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub family: Family,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub lambda_od: f64,
    #[serde(default)]
    pub lambda_d: f64,
}

fn one() -> f64 {
    1.0
}

impl ObjectiveConfig {
    pub fn vae() -> Self {
        Self::of(Family::Vae)
    }

    pub fn beta_vae(beta: f64) -> Self {
        Self {
            beta,
            ..Self::of(Family::BetaVae)
        }
    }

    pub fn factor_vae(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::of(Family::FactorVae)
        }
    }

    pub fn of(family: Family) -> Self {
        Self {
            family,
            beta: 1.0,
            gamma: 0.0,
            lambda_od: 0.0,
            lambda_d: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.beta, self.gamma, self.lambda_od, self.lambda_d]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("objective coefficients must be finite"));
        }
        match self.family {
            Family::BetaVae if self.beta < 1.0 => Err(Error::config("objective.beta must be at least 1")),
            Family::FactorVae | Family::FactorVaePriorVariant | Family::Aae if self.gamma < 0.0 => {
                Err(Error::config("objective.gamma must be non-negative"))
            }
            Family::DipVaeI | Family::DipVaeIi if self.lambda_od < 0.0 || self.lambda_d < 0.0 => {
                Err(Error::config("objective.lambda_od and objective.lambda_d must be non-negative"))
            }
            _ => Ok(()),
        }
    }

    /// The family's swept coefficient value (`0` for plain VAE).
    pub fn coefficient(&self) -> f64 {
        match self.family {
            Family::Vae => 0.0,
            Family::BetaVae => self.beta,
            Family::FactorVae | Family::FactorVaePriorVariant | Family::Aae => self.gamma,
            Family::DipVaeI | Family::DipVaeIi => self.lambda_od,
        }
    }

    fn kl_weight(&self) -> f64 {
        match self.family {
            Family::BetaVae => self.beta,
            Family::Aae => 0.0,
            _ => 1.0,
        }
    }

    fn tc_weight(&self) -> f64 {
        match self.family {
            Family::FactorVae | Family::FactorVaePriorVariant | Family::Aae => self.gamma,
            _ => 0.0,
        }
    }

    fn dip_variant(&self) -> Option<DipVariant> {
        match self.family {
            Family::DipVaeI => Some(DipVariant::I),
            Family::DipVaeIi => Some(DipVariant::Ii),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// Batch mean of the per-image Bernoulli log-likelihood (`≤ 0`).
    pub reconstruction: f64,
    pub kl_per_datapoint: f64,
    /// Batch mean of the discriminator log-odds on the sampled codes.
    pub tc_term: f64,
    /// DIP-VAE covariance penalty; zero for other families.
    pub penalty_extra: f64,
}

impl LossBreakdown {
    fn assemble(cfg: &ObjectiveConfig, reconstruction: f64, kl: f64, tc: f64, penalty: f64) -> Self {
        let total = match cfg.family {
            Family::Vae => reconstruction - kl,
            Family::BetaVae => reconstruction - cfg.beta * kl,
            Family::FactorVae | Family::FactorVaePriorVariant => reconstruction - kl - cfg.gamma * tc,
            Family::Aae => reconstruction - cfg.gamma * tc,
            Family::DipVaeI | Family::DipVaeIi => reconstruction - kl - penalty,
        };
        Self {
            total,
            reconstruction,
            kl_per_datapoint: kl,
            tc_term: tc,
            penalty_extra: penalty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DipVariant {
    I,
    Ii,
}

/// Covariance penalty `λ_od Σ_{i≠j} C_ij² + λ_d Σ_i (C_ii - 1)²` where `C` is
/// the unbiased covariance of the posterior means, plus (variant II) the
/// mean posterior variance on the diagonal.
pub fn dip_vae_penalty(
    means: &[f64],
    variances: &[f64],
    batch: usize,
    dim: usize,
    variant: DipVariant,
    lambda_od: f64,
    lambda_d: f64,
) -> Result<f64> {
    Ok(dip_penalty_and_grad(means, variances, batch, dim, variant, lambda_od, lambda_d, false)?.0)
}

/// Penalty value with gradients with respect to the means and variances.
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn dip_penalty_and_grad(
    means: &[f64],
    variances: &[f64],
    batch: usize,
    dim: usize,
    variant: DipVariant,
    lambda_od: f64,
    lambda_d: f64,
    want_grad: bool,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if batch < 2 {
        return Err(Error::domain("the covariance penalty needs at least two rows"));
    }
    if means.len() != batch * dim || variances.len() != batch * dim {
        return Err(Error::dim("means and variances must both be batch x dim"));
    }
    let b = batch as f64;
    let mut centre = vec![0.0; dim];
    for row in means.chunks(dim) {
        for (c, v) in centre.iter_mut().zip(row) {
            *c += v / b;
        }
    }
    let centred: Vec<f64> = means
        .chunks(dim)
        .flat_map(|row| row.iter().zip(&centre).map(|(v, c)| v - c).collect::<Vec<_>>())
        .collect();
    let mut cov = vec![0.0; dim * dim];
    for row in centred.chunks(dim) {
        for i in 0..dim {
            for j in 0..dim {
                cov[i * dim + j] += row[i] * row[j] / (b - 1.0);
            }
        }
    }
    if variant == DipVariant::Ii {
        for row in variances.chunks(dim) {
            for i in 0..dim {
                cov[i * dim + i] += row[i] / b;
            }
        }
    }
    let (penalty, g) = penalty_and_slope(&cov, dim, lambda_od, lambda_d);
    if !want_grad {
        return Ok((penalty, Vec::new(), Vec::new()));
    }
    let mut d_mean = vec![0.0; batch * dim];
    for (row, out) in centred.chunks(dim).zip(d_mean.chunks_mut(dim)) {
        for i in 0..dim {
            let s: f64 = (0..dim).map(|j| g[i * dim + j] * row[j]).sum();
            out[i] = 2.0 * s / (b - 1.0);
        }
    }
    let mut d_var = vec![0.0; batch * dim];
    if variant == DipVariant::Ii {
        for out in d_var.chunks_mut(dim) {
            for i in 0..dim {
                out[i] = g[i * dim + i] / b;
            }
        }
    }
    Ok((penalty, d_mean, d_var))
}

/// The penalty applied to a `dim × dim` covariance matrix.
pub fn covariance_penalty(cov: &[f64], dim: usize, lambda_od: f64, lambda_d: f64) -> Result<f64> {
    if cov.len() != dim * dim {
        return Err(Error::dim(format!("{} entries for a {dim} x {dim} matrix", cov.len())));
    }
    Ok(penalty_and_slope(cov, dim, lambda_od, lambda_d).0)
}

fn penalty_and_slope(cov: &[f64], dim: usize, lambda_od: f64, lambda_d: f64) -> (f64, Vec<f64>) {
    let mut penalty = 0.0;
    let mut g = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let c = cov[i * dim + j];
            if i == j {
                penalty += lambda_d * (c - 1.0).powi(2);
                g[i * dim + j] = 2.0 * lambda_d * (c - 1.0);
            } else {
                penalty += lambda_od * c * c;
                g[i * dim + j] = 2.0 * lambda_od * c;
            }
        }
    }
    (penalty, g)
}

/// `-(1/2m) [Σ log D(z_real) + Σ log(1 - D(z_fake))]` from `m × 2` logit
/// matrices, where `D` is the softmax probability of class 0.
pub fn discriminator_loss(d_logits_real: &[f64], d_logits_perm: &[f64]) -> Result<f64> {
    if d_logits_real.len() != d_logits_perm.len() || d_logits_real.is_empty() || !d_logits_real.len().is_multiple_of(2) {
        return Err(Error::dim(format!(
            "discriminator batches of {} and {} logits",
            d_logits_real.len(),
            d_logits_perm.len()
        )));
    }
    let m = (d_logits_real.len() / 2) as f64;
    let real: f64 = d_logits_real.chunks(2).map(|l| softplus(l[1] - l[0])).sum();
    let fake: f64 = d_logits_perm.chunks(2).map(|l| softplus(l[0] - l[1])).sum();
    Ok((real + fake) / (2.0 * m))
}

/// Result of one objective evaluation on a batch.
#[derive(Debug, Clone)]
pub struct VaeStep<T> {
    pub breakdown: LossBreakdown,
    pub posterior: PosteriorBatch<T>,
    /// The sampled codes `z = μ + σ ⊙ ε`, row-major `B × d`.
    pub codes: Vec<T>,
    /// Gradients of `-total`; present when requested.
    pub encoder_grads: Option<Grads<T>>,
    pub decoder_grads: Option<Grads<T>>,
}

/// Evaluates the configured objective on `images` (row-major, values in
/// `[0,1]`) with reparameterisation noise `noise` (`B × d`). With
/// `want_grads`, back-propagates `-total` into encoder and decoder
/// parameters; the discriminator is held fixed.
pub fn evaluate_objective<T: Scalar>(
    bundle: &ModelBundle<T>,
    images: &[T],
    noise: &[T],
    cfg: &ObjectiveConfig,
    want_grads: bool,
) -> Result<VaeStep<T>> {
    cfg.validate()?;
    let d = bundle.spec.latent_dim;
    let p = bundle.pixels();
    let mut enc_tape = Tape::default();
    let post = bundle.encode_batch(images, want_grads.then_some(&mut enc_tape))?;
    let b = post.batch;
    if noise.len() != b * d {
        return Err(Error::dim(format!("noise has {} values for a {b} x {d} batch", noise.len())));
    }
    let sigma: Vec<T> = post.log_variance.iter().map(|&lv| (lv * T::of(0.5)).exp()).collect();
    let codes: Vec<T> = post
        .mean
        .iter()
        .zip(&sigma)
        .zip(noise)
        .map(|((&m, &s), &e)| m + s * e)
        .collect();

    let mut dec_tape = Tape::default();
    let logits = bundle.decode_batch(&codes, want_grads.then_some(&mut dec_tape))?;
    let bf = b as f64;
    let mut recon = 0.0;
    let mut d_logits = if want_grads { vec![T::zero(); b * p] } else { Vec::new() };
    for (i, (&l, &t)) in logits.iter().zip(images).enumerate() {
        let (l, t) = (l.f64(), t.f64());
        recon -= t * softplus(-l) + (1.0 - t) * softplus(l);
        if want_grads {
            d_logits[i] = T::of((sigmoid(l) - t) / bf);
        }
    }
    recon /= bf;

    let mut kl = 0.0;
    for (&m, &lv) in post.mean.iter().zip(&post.log_variance) {
        let (m, lv) = (m.f64(), lv.f64());
        kl += 0.5 * (m * m + lv.exp() - 1.0 - lv);
    }
    kl /= bf;

    let tc_weight = cfg.tc_weight();
    let mut disc_tape = Tape::default();
    let use_tc_grad = want_grads && tc_weight != 0.0;
    let d_out = bundle.discriminate_batch(&codes, use_tc_grad.then_some(&mut disc_tape))?;
    let tc = d_out.chunks(2).map(|l| (l[0] - l[1]).f64()).sum::<f64>() / bf;

    let (penalty, d_pen_mean, d_pen_var) = match cfg.dip_variant() {
        Some(variant) => {
            let means: Vec<f64> = post.mean.iter().map(|v| v.f64()).collect();
            let vars: Vec<f64> = post.log_variance.iter().map(|v| v.f64().exp()).collect();
            dip_penalty_and_grad(&means, &vars, b, d, variant, cfg.lambda_od, cfg.lambda_d, want_grads)?
        }
        None => (0.0, Vec::new(), Vec::new()),
    };

    let breakdown = LossBreakdown::assemble(cfg, recon, kl, tc, penalty);
    if !want_grads {
        return Ok(VaeStep {
            breakdown,
            posterior: post,
            codes,
            encoder_grads: None,
            decoder_grads: None,
        });
    }

    let mut dec_grads = bundle.decoder.zero_grads();
    let dz_act = bundle.decoder.backward(dec_tape, Act::flat(d_logits, b, p), Some(&mut dec_grads));
    let mut dz = dz_act.data;
    if use_tc_grad {
        let w = T::of(tc_weight / bf);
        let g: Vec<T> = (0..b).flat_map(|_| [w, -w]).collect();
        let dz_tc = bundle.discriminator.backward(disc_tape, Act::flat(g, b, 2), None);
        for (a, v) in dz.iter_mut().zip(dz_tc.data) {
            *a += v;
        }
    }

    let kw = cfg.kl_weight();
    let mut d_head = vec![T::zero(); b * 2 * d];
    for i in 0..b {
        for j in 0..d {
            let k = i * d + j;
            let m = post.mean[k].f64();
            let lv = post.log_variance[k].f64();
            let dzk = dz[k].f64();
            let mut dm = dzk + kw * m / bf;
            let mut dlv = dzk * 0.5 * sigma[k].f64() * noise[k].f64() + kw * 0.5 * (lv.exp() - 1.0) / bf;
            if !d_pen_mean.is_empty() {
                dm += d_pen_mean[k];
                dlv += d_pen_var[k] * lv.exp();
            }
            d_head[i * 2 * d + j] = T::of(dm);
            d_head[i * 2 * d + d + j] = T::of(dlv);
        }
    }
    let mut enc_grads = bundle.encoder.zero_grads();
    bundle
        .encoder
        .backward(enc_tape, Act::flat(d_head, b, 2 * d), Some(&mut enc_grads));
    Ok(VaeStep {
        breakdown,
        posterior: post,
        codes,
        encoder_grads: Some(enc_grads),
        decoder_grads: Some(dec_grads),
    })
}

#[derive(Debug, Clone)]
pub struct DiscStep<T> {
    pub loss: f64,
    /// Fraction of real and fake rows classified correctly (ties → class 0).
    pub accuracy: f64,
    pub grads: Option<Grads<T>>,
}

/// Discriminator loss on `m` real codes and `m` fake codes, with optional
/// gradients for the discriminator parameters only.
pub fn discriminator_step<T: Scalar>(
    bundle: &ModelBundle<T>,
    real: &[T],
    fake: &[T],
    want_grads: bool,
) -> Result<DiscStep<T>> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(Error::dim(format!(
            "{} real and {} fake code values",
            real.len(),
            fake.len()
        )));
    }
    let d = bundle.spec.latent_dim;
    let m = real.len() / d;
    let mut both = Vec::with_capacity(2 * real.len());
    both.extend_from_slice(real);
    both.extend_from_slice(fake);
    let mut tape = Tape::default();
    let logits = bundle.discriminate_batch(&both, want_grads.then_some(&mut tape))?;
    let (lr, lf) = logits.split_at(2 * m);
    let lr64: Vec<f64> = lr.iter().map(|v| v.f64()).collect();
    let lf64: Vec<f64> = lf.iter().map(|v| v.f64()).collect();
    let loss = discriminator_loss(&lr64, &lf64)?;
    let correct = lr64.chunks(2).filter(|l| l[0] >= l[1]).count() + lf64.chunks(2).filter(|l| l[1] > l[0]).count();
    let accuracy = correct as f64 / (2 * m) as f64;
    let grads = if want_grads {
        let scale = 1.0 / (2 * m) as f64;
        let mut g = Vec::with_capacity(4 * m);
        for l in lr64.chunks(2) {
            let q = 1.0 - sigmoid(l[0] - l[1]);
            g.push(T::of(-q * scale));
            g.push(T::of(q * scale));
        }
        for l in lf64.chunks(2) {
            let p = sigmoid(l[0] - l[1]);
            g.push(T::of(p * scale));
            g.push(T::of(-p * scale));
        }
        let mut grads = bundle.discriminator.zero_grads();
        bundle
            .discriminator
            .backward(tape, Act::flat(g, 2 * m, 2), Some(&mut grads));
        Some(grads)
    } else {
        None
    };
    Ok(DiscStep { loss, accuracy, grads })
}

fn noise_for(bundle: &ModelBundle<f32>, images: &[f32], noise_seed: u64) -> Result<Vec<f32>> {
    let p = bundle.pixels();
    if images.is_empty() || !images.len().is_multiple_of(p) {
        return Err(Error::dim(format!("{} pixel values for {p}-pixel images", images.len())));
    }
    let n = images.len() / p * bundle.spec.latent_dim;
    Ok(SeedStream::new(noise_seed)
        .normals(n)
        .into_iter()
        .map(|v| v as f32)
        .collect())
}

fn loss_for_family(
    images: &[f32],
    bundle: &ModelBundle<f32>,
    cfg: &ObjectiveConfig,
    noise_seed: u64,
    allowed: &[Family],
) -> Result<LossBreakdown> {
    if !allowed.contains(&cfg.family) {
        return Err(Error::config(format!(
            "objective family {} does not fit this loss",
            cfg.family.name()
        )));
    }
    let noise = noise_for(bundle, images, noise_seed)?;
    Ok(evaluate_objective(bundle, images, &noise, cfg, false)?.breakdown)
}

/// ELBO parts with one reparameterised sample per image drawn from
/// `noise_seed`.
pub fn vae_elbo_parts(images: &[f32], bundle: &ModelBundle<f32>, noise_seed: u64) -> Result<LossBreakdown> {
    loss_for_family(images, bundle, &ObjectiveConfig::vae(), noise_seed, &[Family::Vae])
}

pub fn factor_vae_loss(
    images: &[f32],
    bundle: &ModelBundle<f32>,
    cfg: &ObjectiveConfig,
    noise_seed: u64,
) -> Result<LossBreakdown> {
    loss_for_family(images, bundle, cfg, noise_seed, &[Family::FactorVae])
}

pub fn factor_vae_prior_variant_loss(
    images: &[f32],
    bundle: &ModelBundle<f32>,
    cfg: &ObjectiveConfig,
    noise_seed: u64,
) -> Result<LossBreakdown> {
    loss_for_family(images, bundle, cfg, noise_seed, &[Family::FactorVaePriorVariant])
}

pub fn aae_loss(images: &[f32], bundle: &ModelBundle<f32>, cfg: &ObjectiveConfig, noise_seed: u64) -> Result<LossBreakdown> {
    loss_for_family(images, bundle, cfg, noise_seed, &[Family::Aae])
}

/// Any family, same noise convention as the dedicated entry points.
pub fn objective_loss(
    images: &[f32],
    bundle: &ModelBundle<f32>,
    cfg: &ObjectiveConfig,
    noise_seed: u64,
) -> Result<LossBreakdown> {
    loss_for_family(images, bundle, cfg, noise_seed, &Family::ALL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discriminator_loss_examples() {
        assert!((discriminator_loss(&[0.0, 0.0], &[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(discriminator_loss(&[30.0, -30.0], &[-30.0, 30.0]).unwrap() < 1e-12);
        // D = 0.9 on the real row, 0.2 on the fake row.
        let real = [0.9f64.ln() - 0.1f64.ln(), 0.0];
        let fake = [0.2f64.ln() - 0.8f64.ln(), 0.0];
        let want = -0.5 * (0.9f64.ln() + 0.8f64.ln());
        assert!((discriminator_loss(&real, &fake).unwrap() - want).abs() < 1e-12);
        assert!((want - 0.16425).abs() < 1e-5);
        assert!(discriminator_loss(&[0.0, 0.0], &[0.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn dip_penalty_examples() {
        let c = [1.0, 0.5, 0.5, 1.0];
        assert!((covariance_penalty(&c, 2, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-12);

        // Rows (1,1), (-1,-1), (1,0), (-1,0), (0,1), (0,-1): C_01 = 2/5.
        let corr = [1.0, 1.0, -1.0, -1.0, 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0];
        let v = dip_vae_penalty(&corr, &[0.0; 12], 6, 2, DipVariant::I, 1.0, 0.0).unwrap();
        assert!((v - 2.0 * 0.4f64.powi(2)).abs() < 1e-12);

        // Whitened means: rows ±sqrt(3/2) e_i give C = I.
        let a = 1.5f64.sqrt();
        let white = [a, 0.0, -a, 0.0, 0.0, a, 0.0, -a];
        let v = dip_vae_penalty(&white, &[0.0; 8], 4, 2, DipVariant::I, 3.0, 3.0).unwrap();
        assert!(v.abs() < 1e-12);

        // Constant means with unit posterior variances: total covariance I.
        let v = dip_vae_penalty(&[0.3; 6], &[1.0; 6], 3, 2, DipVariant::Ii, 1.0, 1.0).unwrap();
        assert_eq!(v, 0.0);
        assert!(dip_vae_penalty(&[0.0, 0.0], &[1.0, 1.0], 1, 2, DipVariant::I, 1.0, 1.0).is_err());
    }

    #[test]
    fn dip_gradients_match_finite_differences() {
        let mut s = SeedStream::new(5);
        let means = s.normals(15);
        let vars: Vec<f64> = s.normals(15).iter().map(|v| v.exp()).collect();
        for variant in [DipVariant::I, DipVariant::Ii] {
            let (_, gm, gv) = dip_penalty_and_grad(&means, &vars, 5, 3, variant, 0.7, 1.3, true).unwrap();
            let f = |m: &[f64], v: &[f64]| dip_vae_penalty(m, v, 5, 3, variant, 0.7, 1.3).unwrap();
            for k in 0..15 {
                let eps = 1e-6;
                let mut mp = means.clone();
                mp[k] += eps;
                let mut mm = means.clone();
                mm[k] -= eps;
                let fd = (f(&mp, &vars) - f(&mm, &vars)) / (2.0 * eps);
                assert!((fd - gm[k]).abs() < 1e-6);
                let mut vp = vars.clone();
                vp[k] += eps;
                let mut vm = vars.clone();
                vm[k] -= eps;
                let fd = (f(&means, &vp) - f(&means, &vm)) / (2.0 * eps);
                assert!((fd - gv[k]).abs() < 1e-6);
            }
        }
    }
}
