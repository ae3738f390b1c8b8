//! Diagonal-Gaussian posteriors, the standard-normal prior and the Bernoulli
//! pixel likelihood, plus a Monte Carlo estimator for the split of the
//! average KL into mutual information and marginal KL.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedStream;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `q(z|x) = ∏_j N(z_j | mean_j, exp(log_variance_j))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub log_variance: Vec<f64>,
}

impl GaussianPosterior {
    pub fn new(mean: Vec<f64>, log_variance: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != log_variance.len() {
            return Err(Error::dim(format!(
                "posterior mean has length {}, log-variance {}",
                mean.len(),
                log_variance.len()
            )));
        }
        if let Some(v) = log_variance.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("log-variance {v} is not finite")));
        }
        Ok(Self { mean, log_variance })
    }

    pub fn standard(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            log_variance: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `log q(z)` for a single code.
    pub fn log_density(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(&self.mean)
            .zip(&self.log_variance)
            .map(|((&z, &m), &lv)| log_normal(z, m, lv))
            .sum()
    }

    /// Per-dimension KL(q(z_j|x) || N(0,1)).
    pub fn kl_per_dim(&self) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_variance)
            .map(|(&m, &lv)| kl_term(m, lv))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    PosteriorSample,
    Permuted,
    PriorSample,
}

/// `B × d` row-major block of latent codes.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    pub values: Vec<f64>,
    pub batch: usize,
    pub dim: usize,
    pub source: SourceTag,
}

impl LatentBatch {
    pub fn new(values: Vec<f64>, batch: usize, dim: usize, source: SourceTag) -> Result<Self> {
        if batch == 0 || dim == 0 || values.len() != batch * dim {
            return Err(Error::dim(format!(
                "latent batch of {} values cannot be {batch} x {dim}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            batch,
            dim,
            source,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `batch` draws from the standard-normal prior.
    pub fn from_prior(batch: usize, dim: usize, stream: &mut SeedStream) -> Self {
        Self {
            values: stream.normals(batch * dim),
            batch,
            dim,
            source: SourceTag::PriorSample,
        }
    }
}

/// `log N(x | mean, exp(log_variance))`.
#[inline]
pub fn log_normal(x: f64, mean: f64, log_variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + log_variance + d * d * (-log_variance).exp())
}

#[inline]
pub fn log_standard_normal(x: f64) -> f64 {
    -0.5 * (LN_2PI + x * x)
}

#[inline]
fn kl_term(mean: f64, log_variance: f64) -> f64 {
    0.5 * (mean * mean + log_variance.exp() - 1.0 - log_variance)
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log Σ exp(x_i)`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn reparameterised_sample(post: &GaussianPosterior, noise: &[f64]) -> Result<Vec<f64>> {
    if noise.len() != post.dim() {
        return Err(Error::dim(format!(
            "noise has length {}, posterior dimension {}",
            noise.len(),
            post.dim()
        )));
    }
    Ok(post
        .mean
        .iter()
        .zip(&post.log_variance)
        .zip(noise)
        .map(|((&m, &lv), &e)| m + (0.5 * lv).exp() * e)
        .collect())
}

pub fn kl_to_standard_normal(post: &GaussianPosterior) -> f64 {
    post.kl_per_dim().iter().sum()
}

/// `Σ_p t_p log σ(l_p) + (1 - t_p) log(1 - σ(l_p))`.
pub fn bernoulli_log_likelihood(logits: &[f64], target: &[f64]) -> Result<f64> {
    if logits.len() != target.len() {
        return Err(Error::dim(format!(
            "{} logits for {} targets",
            logits.len(),
            target.len()
        )));
    }
    if let Some(t) = target.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::domain(format!("target {t} outside [0, 1]")));
    }
    Ok(logits
        .iter()
        .zip(target)
        .map(|(&l, &t)| -(t * softplus(-l) + (1.0 - t) * softplus(l)))
        .sum())
}

/// Monte Carlo split of the average KL into `I(x;z) + KL(q(z) || p(z))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlDecomposition {
    pub avg_kl: f64,
    pub mutual_info: f64,
    pub marginal_kl: f64,
    pub mutual_info_se: f64,
    pub marginal_kl_se: f64,
    /// Standard error of `mutual_info + marginal_kl`, estimated from the
    /// per-sample sum of the two integrands.
    pub sum_se: f64,
    pub mc_samples: usize,
}

/// Mean and standard error of the mean.
pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_mixture(posteriors: &[GaussianPosterior]) -> Result<usize> {
    let d = posteriors
        .first()
        .map(GaussianPosterior::dim)
        .ok_or_else(|| Error::domain("no posteriors"))?;
    if posteriors.iter().any(|p| p.dim() != d) {
        return Err(Error::dim("posteriors differ in dimension"));
    }
    Ok(d)
}

/// Draws `(n, z)` with `n` uniform over the posteriors and `z ~ q(z|x_n)`,
/// returning `log q(z|x_m)` for every component `m` alongside `n`.
fn mixture_draws(
    posteriors: &[GaussianPosterior],
    mc_samples: usize,
    seed: u64,
) -> impl Iterator<Item = (usize, Vec<f64>, Vec<f64>)> + '_ {
    let mut stream = SeedStream::new(seed);
    let d = posteriors[0].dim();
    (0..mc_samples).map(move |_| {
        let n = stream.below(posteriors.len());
        let noise = stream.normals(d);
        let z = reparameterised_sample(&posteriors[n], &noise).expect("dimension checked");
        let comps = posteriors.iter().map(|p| p.log_density(&z)).collect();
        (n, z, comps)
    })
}

pub fn kl_decomposition_terms(
    posteriors: &[GaussianPosterior],
    mc_samples: usize,
    seed: u64,
) -> Result<KlDecomposition> {
    if mc_samples < 1 {
        return Err(Error::config("mc_samples must be at least 1"));
    }
    if posteriors.len() < 2 {
        return Err(Error::domain("at least two posteriors are required"));
    }
    check_mixture(posteriors)?;
    let avg_kl = posteriors.iter().map(kl_to_standard_normal).sum::<f64>() / posteriors.len() as f64;
    let log_n = (posteriors.len() as f64).ln();
    let mut mi = Vec::with_capacity(mc_samples);
    let mut mk = Vec::with_capacity(mc_samples);
    let mut sum = Vec::with_capacity(mc_samples);
    for (n, z, comps) in mixture_draws(posteriors, mc_samples, seed) {
        let log_q = log_sum_exp(&comps) - log_n;
        let log_p: f64 = z.iter().map(|&v| log_standard_normal(v)).sum();
        let a = comps[n] - log_q;
        let b = log_q - log_p;
        mi.push(a);
        mk.push(b);
        sum.push(a + b);
    }
    let (mutual_info, mutual_info_se) = mean_and_se(&mi);
    let (marginal_kl, marginal_kl_se) = mean_and_se(&mk);
    let (_, sum_se) = mean_and_se(&sum);
    Ok(KlDecomposition {
        avg_kl,
        mutual_info,
        marginal_kl,
        mutual_info_se,
        marginal_kl_se,
        sum_se,
        mc_samples,
    })
}

/// Mutual information through the index-variable form: with the joint
/// `r(i, z) = q(z|x_i) / N`, `I = E_r[log r(i|z) - log(1/N)]` where
/// `r(i|z)` is the normalised responsibility of component `i` for `z`.
/// Uses the same draws as [`kl_decomposition_terms`] for a given seed.
pub fn mutual_info_index_form(posteriors: &[GaussianPosterior], mc_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if mc_samples < 1 {
        return Err(Error::config("mc_samples must be at least 1"));
    }
    check_mixture(posteriors)?;
    let log_n = (posteriors.len() as f64).ln();
    let vals: Vec<f64> = mixture_draws(posteriors, mc_samples, seed)
        .map(|(n, _, comps)| {
            let log_resp = comps[n] - log_sum_exp(&comps);
            log_resp + log_n
        })
        .collect();
    Ok(mean_and_se(&vals))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(m: &[f64], lv: &[f64]) -> GaussianPosterior {
        GaussianPosterior::new(m.to_vec(), lv.to_vec()).unwrap()
    }

    #[test]
    fn reparameterised_sample_examples() {
        assert_eq!(reparameterised_sample(&post(&[0., 0.], &[0., 0.]), &[0., 0.]).unwrap(), vec![0., 0.]);
        assert_eq!(reparameterised_sample(&post(&[1., 2.], &[0., 0.]), &[1., -1.]).unwrap(), vec![2., 1.]);
        let z = reparameterised_sample(&post(&[0.], &[4f64.ln()]), &[0.5]).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-12);
        assert!(matches!(
            reparameterised_sample(&post(&[0.], &[0.]), &[0., 1.]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_to_standard_normal(&post(&[0.], &[0.])), 0.0);
        assert!((kl_to_standard_normal(&post(&[1.], &[0.])) - 0.5).abs() < 1e-12);
        let e = std::f64::consts::E;
        assert!((kl_to_standard_normal(&post(&[0.], &[1.])) - 0.5 * (e - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_examples() {
        let half = bernoulli_log_likelihood(&[0.0], &[1.0]).unwrap();
        assert!((half - 0.5f64.ln()).abs() < 1e-12);
        assert!(bernoulli_log_likelihood(&[40.0], &[1.0]).unwrap().abs() < 1e-12);
        let s2 = 1.0 / (1.0 + (-2f64).exp());
        let v = bernoulli_log_likelihood(&[2.0, -2.0], &[1.0, 0.0]).unwrap();
        assert!((v - 2.0 * s2.ln()).abs() < 1e-12);
        assert!((v + 0.25386).abs() < 1e-5);
        assert!(matches!(
            bernoulli_log_likelihood(&[0.0], &[1.5]),
            Err(Error::Domain(_))
        ));
        assert!(bernoulli_log_likelihood(&[100.0, -100.0], &[0.0, 1.0]).unwrap().is_finite());
    }

    #[test]
    fn decomposition_of_prior_copies_vanishes() {
        let ps = vec![GaussianPosterior::standard(2); 3];
        let r = kl_decomposition_terms(&ps, 2000, 1).unwrap();
        assert_eq!(r.avg_kl, 0.0);
        assert!(r.mutual_info.abs() < 1e-12);
        assert!(r.marginal_kl.abs() < 1e-12);
    }

    #[test]
    fn identical_posteriors_have_no_mutual_information() {
        let ps = vec![post(&[0.7, -0.2], &[-0.5, 0.3]); 4];
        let r = kl_decomposition_terms(&ps, 20_000, 2).unwrap();
        assert!(r.mutual_info.abs() < 1e-12);
        assert!((r.avg_kl - r.marginal_kl).abs() < 3.0 * r.marginal_kl_se);
    }

    #[test]
    fn rejects_zero_samples() {
        let ps = vec![GaussianPosterior::standard(1); 2];
        assert!(matches!(kl_decomposition_terms(&ps, 0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-9);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
