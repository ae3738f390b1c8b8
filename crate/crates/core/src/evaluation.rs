//! Post-hoc evaluation of trained bundles: importance-weighted bounds,
//! latent traversals, prior samples, marginal histograms and discriminator
//! accuracy, plus lossless image-grid output.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::FactorDataset;
use crate::distributions::{
    bernoulli_log_likelihood, log_normal, log_standard_normal, log_sum_exp, sigmoid, GaussianPosterior, LatentBatch,
    SourceTag,
};
use crate::error::{Error, Result};
use crate::models::ModelBundle;
use crate::objectives::discriminator_step;
use crate::rng::{tags, SeedStream};
use crate::tc::permute_dims_with;

/// `log (1/P) Σ_p exp(w_p)` for the log-weights of one observation.
fn log_mean_exp(w: &[f64]) -> f64 {
    log_sum_exp(w) - (w.len() as f64).ln()
}

/// Importance-weighted bound averaged over `images` (row-major), with
/// `particles` samples from each image's posterior.
pub fn iwae_bound(bundle: &ModelBundle<f32>, images: &[f32], particles: usize, seed: u64) -> Result<f64> {
    if particles < 1 {
        return Err(Error::config("particles must be at least 1"));
    }
    let p = bundle.pixels();
    let d = bundle.spec.latent_dim;
    if images.is_empty() || !images.len().is_multiple_of(p) {
        return Err(Error::dim(format!("{} pixel values for {p}-pixel images", images.len())));
    }
    let n = images.len() / p;
    let mut total = 0.0;
    for (i, x) in images.chunks(p).enumerate() {
        let post = &bundle.encode_batch(x, None)?.posteriors()[0];
        let mut stream = SeedStream::new(seed).derive(i as u64);
        let target: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let mut weights = Vec::with_capacity(particles);
        let mut done = 0;
        while done < particles {
            let chunk = (particles - done).min(256);
            let z: Vec<f64> = (0..chunk * d)
                .map(|k| {
                    let j = k % d;
                    post.mean[j] + (0.5 * post.log_variance[j]).exp() * stream.normal()
                })
                .collect();
            let zf: Vec<f32> = z.iter().map(|&v| v as f32).collect();
            let logits = bundle.decode_batch(&zf, None)?;
            for (zr, lr) in z.chunks(d).zip(logits.chunks(p)) {
                let l: Vec<f64> = lr.iter().map(|&v| v as f64).collect();
                let log_px = bernoulli_log_likelihood(&l, &target)?;
                let log_pz: f64 = zr.iter().map(|&v| log_standard_normal(v)).sum();
                weights.push(log_px + log_pz - post.log_density(zr));
            }
            done += chunk;
        }
        total += log_mean_exp(&weights);
    }
    Ok(total / n as f64)
}

/// `z ~ N(0, I_d)`, `x | z ~ N(W z + b, σ² I_D)`, with a deliberately
/// mismatched diagonal Gaussian proposal so that importance weighting has
/// work to do. The marginal `p(x) = N(b, W Wᵀ + σ² I)` is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianToy {
    /// `D × d`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub noise_sd: f64,
    pub latent_dim: usize,
    /// Multiplier on the proposal's variances.
    pub proposal_inflation: f64,
}

impl LinearGaussianToy {
    /// A fixed 3-dimensional observation model over a 2-dimensional latent.
    pub fn standard() -> Self {
        Self {
            weight: vec![1.0, 0.5, -0.3, 0.8, 0.6, -1.2],
            bias: vec![0.2, -0.1, 0.4],
            noise_sd: 0.7,
            latent_dim: 2,
            proposal_inflation: 1.5,
        }
    }

    pub fn data_dim(&self) -> usize {
        self.bias.len()
    }

    fn w(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.data_dim(), self.latent_dim, &self.weight)
    }

    /// Exact `log p(x)`.
    pub fn log_marginal(&self, x: &[f64]) -> Result<f64> {
        let big_d = self.data_dim();
        if x.len() != big_d {
            return Err(Error::dim(format!("observation of width {} for D = {big_d}", x.len())));
        }
        let w = self.w();
        let cov = &w * w.transpose() + DMatrix::identity(big_d, big_d) * self.noise_sd.powi(2);
        let chol = cov.cholesky().ok_or_else(|| Error::domain("covariance is not positive definite"))?;
        let r = DVector::from_column_slice(x) - DVector::from_column_slice(&self.bias);
        let sol = chol.solve(&r);
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(-0.5 * (big_d as f64 * crate::distributions::LN_2PI + log_det + r.dot(&sol)))
    }

    /// Exact posterior mean with inflated diagonal variances.
    pub fn proposal(&self, x: &[f64]) -> Result<GaussianPosterior> {
        let d = self.latent_dim;
        let w = self.w();
        let s2 = self.noise_sd.powi(2);
        let precision = DMatrix::identity(d, d) + w.transpose() * &w / s2;
        let cov = precision
            .try_inverse()
            .ok_or_else(|| Error::domain("posterior precision is singular"))?;
        let r = DVector::from_column_slice(x) - DVector::from_column_slice(&self.bias);
        let mean = &cov * w.transpose() * r / s2;
        GaussianPosterior::new(
            mean.iter().copied().collect(),
            (0..d).map(|j| (cov[(j, j)] * self.proposal_inflation).ln()).collect(),
        )
    }

    /// `log p(x | z) + log p(z)`.
    pub fn log_joint(&self, x: &[f64], z: &[f64]) -> f64 {
        let d = self.latent_dim;
        let lv = 2.0 * self.noise_sd.ln();
        let lik: f64 = (0..self.data_dim())
            .map(|i| {
                let m = self.bias[i] + (0..d).map(|j| self.weight[i * d + j] * z[j]).sum::<f64>();
                log_normal(x[i], m, lv)
            })
            .sum();
        lik + z.iter().map(|&v| log_standard_normal(v)).sum::<f64>()
    }

    pub fn sample(&self, stream: &mut SeedStream) -> Vec<f64> {
        let d = self.latent_dim;
        let z: Vec<f64> = (0..d).map(|_| stream.normal()).collect();
        (0..self.data_dim())
            .map(|i| {
                self.bias[i] + (0..d).map(|j| self.weight[i * d + j] * z[j]).sum::<f64>() + self.noise_sd * stream.normal()
            })
            .collect()
    }

    /// Importance-weighted bound on `log p(x)` for one observation.
    pub fn iwae_bound(&self, x: &[f64], particles: usize, seed: u64) -> Result<f64> {
        if particles < 1 {
            return Err(Error::config("particles must be at least 1"));
        }
        let q = self.proposal(x)?;
        let mut stream = SeedStream::new(seed);
        let w: Vec<f64> = (0..particles)
            .map(|_| {
                let z: Vec<f64> = (0..self.latent_dim)
                    .map(|j| q.mean[j] + (0.5 * q.log_variance[j]).exp() * stream.normal())
                    .collect();
                self.log_joint(x, &z) - q.log_density(&z)
            })
            .collect();
        Ok(log_mean_exp(&w))
    }
}

/// Mean negative Bernoulli log-likelihood per image over the whole dataset,
/// one posterior sample per image.
pub fn reconstruction_error(bundle: &ModelBundle<f32>, dataset: &FactorDataset, seed: u64) -> Result<f64> {
    let d = bundle.spec.latent_dim;
    let p = bundle.pixels();
    let rows: Vec<usize> = (0..dataset.len()).collect();
    let mut stream = SeedStream::new(seed).derive(tags::EVALUATION);
    let mut total = 0.0;
    for chunk in rows.chunks(256) {
        let images = dataset.batch(chunk);
        let post = bundle.encode_batch(&images, None)?;
        let z: Vec<f32> = (0..chunk.len() * d)
            .map(|i| post.mean[i] + (0.5 * post.log_variance[i]).exp() * stream.normal() as f32)
            .collect();
        let logits = bundle.decode_batch(&z, None)?;
        for (l, x) in logits.chunks(p).zip(images.chunks(p)) {
            let l: Vec<f64> = l.iter().map(|&v| v as f64).collect();
            let x: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            total -= bernoulli_log_likelihood(&l, &x)?;
        }
    }
    Ok(total / dataset.len() as f64)
}

/// Pixel probabilities of `n` decoded prior samples.
pub fn sample_prior(bundle: &ModelBundle<f32>, n: usize, seed: u64) -> Result<Vec<Vec<f32>>> {
    let d = bundle.spec.latent_dim;
    let z = LatentBatch::from_prior(n, d, &mut SeedStream::new(seed));
    let zf: Vec<f32> = z.values.iter().map(|&v| v as f32).collect();
    let logits = bundle.decode_batch(&zf, None)?;
    Ok(logits
        .chunks(bundle.pixels())
        .map(|l| l.iter().map(|&v| sigmoid(v as f64) as f32).collect())
        .collect())
}

/// Fraction of correctly classified codes over `probes` posterior samples
/// and `probes` permuted samples drawn from an independent batch.
pub fn discriminator_accuracy(bundle: &ModelBundle<f32>, dataset: &FactorDataset, probes: usize, seed: u64) -> Result<f64> {
    if probes < 2 {
        return Err(Error::config("discriminator accuracy needs at least 2 probes"));
    }
    let d = bundle.spec.latent_dim;
    let root = SeedStream::new(seed).derive(tags::EVALUATION);
    let codes = |tag: u64| -> Result<LatentBatch> {
        let mut s = root.derive(tag);
        let rows: Vec<usize> = (0..probes).map(|_| s.below(dataset.len())).collect();
        let mut values = Vec::with_capacity(probes * d);
        for chunk in rows.chunks(256) {
            let post = bundle.encode_batch(&dataset.batch(chunk), None)?;
            for i in 0..post.mean.len() {
                values.push((post.mean[i] + (0.5 * post.log_variance[i]).exp() * s.normal() as f32) as f64);
            }
        }
        LatentBatch::new(values, probes, d, SourceTag::PosteriorSample)
    };
    let real = codes(0)?;
    let fake = permute_dims_with(&codes(1)?, &mut root.derive(2));
    let f32s = |b: &LatentBatch| b.values.iter().map(|&v| v as f32).collect::<Vec<f32>>();
    Ok(discriminator_step(bundle, &f32s(&real), &f32s(&fake), false)?.accuracy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversalGrid {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Row 0: references, row 1: their reconstructions, then one row per
    /// latent dimension. Each cell holds pixel probabilities (or the input
    /// pixels for row 0); an empty cell is left blank.
    pub rows: Vec<Vec<Vec<f32>>>,
    /// Latent index shown in each traversal row.
    pub dim_order: Vec<usize>,
    /// Mean `KL(q(z_j|x) || p(z_j))` over the references, by latent index.
    pub kl: Vec<f64>,
    pub range: (f64, f64),
    pub steps: usize,
}

/// Decodes the first reference's posterior mean with one dimension swept
/// over `range` in `steps` values; dimensions are ordered by decreasing
/// mean KL over all references.
pub fn traversal_grid(
    bundle: &ModelBundle<f32>,
    references: &[f32],
    range: (f64, f64),
    steps: usize,
) -> Result<TraversalGrid> {
    if steps < 2 {
        return Err(Error::config("a traversal needs at least 2 steps"));
    }
    let (p, d) = (bundle.pixels(), bundle.spec.latent_dim);
    let post = bundle.encode_batch(references, None)?;
    let n_ref = post.batch;
    let posts = post.posteriors();
    let kl: Vec<f64> = (0..d)
        .map(|j| posts.iter().map(|q| q.kl_per_dim()[j]).sum::<f64>() / n_ref as f64)
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| kl[b].total_cmp(&kl[a]).then(a.cmp(&b)));
    let probs = |logits: Vec<f32>| -> Vec<Vec<f32>> {
        logits
            .chunks(p)
            .map(|l| l.iter().map(|&v| sigmoid(v as f64) as f32).collect())
            .collect()
    };
    let shown = n_ref.min(steps);
    let mut rows = Vec::with_capacity(2 + d);
    rows.push(references.chunks(p).take(shown).map(<[f32]>::to_vec).collect());
    rows.push(probs(bundle.decode_batch(&post.mean[..shown * d], None)?));
    let base = &post.mean[..d];
    for &j in &order {
        let mut codes = Vec::with_capacity(steps * d);
        for s in 0..steps {
            let v = range.0 + (range.1 - range.0) * s as f64 / (steps - 1) as f64;
            codes.extend_from_slice(base);
            codes[s * d + j] = v as f32;
        }
        rows.push(probs(bundle.decode_batch(&codes, None)?));
    }
    let shape = bundle.spec.input_shape;
    Ok(TraversalGrid {
        height: shape.height,
        width: shape.width,
        channels: shape.channels,
        rows,
        dim_order: order,
        kl,
        range,
        steps,
    })
}

impl TraversalGrid {
    pub fn write_png(&self, path: &Path) -> Result<()> {
        write_image_grid(path, &self.rows, self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalHistograms {
    pub edges: Vec<f64>,
    pub centres: Vec<f64>,
    /// `counts[j][b]` for latent dimension `j`.
    pub counts: Vec<Vec<u64>>,
    /// Standard normal density at each bin centre.
    pub normal_pdf: Vec<f64>,
    pub samples: usize,
}

pub const HISTOGRAM_RANGE: (f64, f64) = (-4.0, 4.0);

/// Per-dimension histograms of `B × d` codes on [`HISTOGRAM_RANGE`]; values
/// outside the range land in the edge bins.
pub fn histogram_codes(codes: &LatentBatch, bins: usize) -> Result<MarginalHistograms> {
    if bins < 2 {
        return Err(Error::config("histograms need at least 2 bins"));
    }
    let (lo, hi) = HISTOGRAM_RANGE;
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|b| lo + width * b as f64).collect();
    let centres: Vec<f64> = (0..bins).map(|b| lo + width * (b as f64 + 0.5)).collect();
    let mut counts = vec![vec![0u64; bins]; codes.dim];
    for i in 0..codes.batch {
        for (j, &v) in codes.row(i).iter().enumerate() {
            let b = ((v - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
            counts[j][b] += 1;
        }
    }
    Ok(MarginalHistograms {
        edges,
        normal_pdf: centres.iter().map(|&c| log_standard_normal(c).exp()).collect(),
        centres,
        counts,
        samples: codes.batch,
    })
}

/// One posterior sample per data point (at most `max_points`, a seeded
/// subset beyond that), binned per latent dimension.
pub fn marginal_histograms(
    bundle: &ModelBundle<f32>,
    dataset: &FactorDataset,
    bins: usize,
    max_points: usize,
    seed: u64,
) -> Result<MarginalHistograms> {
    let d = bundle.spec.latent_dim;
    let mut s = SeedStream::new(seed).derive(tags::EVALUATION);
    let rows: Vec<usize> = if dataset.len() <= max_points {
        (0..dataset.len()).collect()
    } else {
        let mut r = s.permutation(dataset.len());
        r.truncate(max_points);
        r
    };
    let mut values = Vec::with_capacity(rows.len() * d);
    for chunk in rows.chunks(256) {
        let post = bundle.encode_batch(&dataset.batch(chunk), None)?;
        for i in 0..post.mean.len() {
            values.push((post.mean[i] + (0.5 * post.log_variance[i]).exp() * s.normal() as f32) as f64);
        }
    }
    histogram_codes(&LatentBatch::new(values, rows.len(), d, SourceTag::PosteriorSample)?, bins)
}

/// Tiles rows of images (values in `[0,1]`, per image `c, h, w`) into one
/// PNG with a one-pixel gap. Short rows leave blank cells.
pub fn write_image_grid(path: &Path, rows: &[Vec<Vec<f32>>], height: usize, width: usize, channels: usize) -> Result<()> {
    if channels != 1 && channels != 3 {
        return Err(Error::config(format!("cannot write {channels}-channel images")));
    }
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
    let gw = (cols * (width + 1) + 1) as u32;
    let gh = (rows.len().max(1) * (height + 1) + 1) as u32;
    let mut img = image::RgbImage::from_pixel(gw, gh, image::Rgb([128, 128, 128]));
    let plane = height * width;
    for (r, row) in rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if cell.len() != plane * channels {
                return Err(Error::dim(format!("image of {} values for {channels}×{height}×{width}", cell.len())));
            }
            for y in 0..height {
                for x in 0..width {
                    let px = |ch: usize| (cell[ch * plane + y * width + x].clamp(0.0, 1.0) * 255.0).round() as u8;
                    let rgb = if channels == 1 { [px(0); 3] } else { [px(0), px(1), px(2)] };
                    let gx = (c * (width + 1) + 1 + x) as u32;
                    let gy = (r * (height + 1) + 1 + y) as u32;
                    img.put_pixel(gx, gy, image::Rgb(rgb));
                }
            }
        }
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ArchitectureSpec;

    #[test]
    fn fresh_discriminator_scores_one_half() {
        let data = crate::data::generate_mini_shapes();
        let b = ModelBundle::<f32>::new(ArchitectureSpec::desk(10), 0).unwrap();
        assert_eq!(discriminator_accuracy(&b, &data, 64, 1).unwrap(), 0.5);
    }

    #[test]
    fn constant_codes_fill_one_bin() {
        let codes = LatentBatch::new(vec![0.3; 20], 10, 2, SourceTag::PriorSample).unwrap();
        let h = histogram_codes(&codes, 8).unwrap();
        for row in &h.counts {
            assert_eq!(row.iter().filter(|&&c| c > 0).count(), 1);
            assert_eq!(row.iter().sum::<u64>(), 10);
        }
        assert!(histogram_codes(&codes, 1).is_err());
    }

    #[test]
    fn toy_marginal_matches_monte_carlo_scale() {
        let toy = LinearGaussianToy::standard();
        let x = [0.5, -0.2, 0.1];
        let exact = toy.log_marginal(&x).unwrap();
        let one = toy.iwae_bound(&x, 1, 3).unwrap();
        assert!(exact.is_finite() && one.is_finite());
        assert!(toy.iwae_bound(&x, 0, 3).is_err());
    }

    #[test]
    fn traversal_grid_shape() {
        let b = ModelBundle::<f32>::new(ArchitectureSpec::toy(), 0).unwrap();
        let refs = vec![0.5f32; 3 * 16];
        let g = traversal_grid(&b, &refs, (-3.0, 3.0), 5).unwrap();
        assert_eq!(g.rows.len(), 2 + 2);
        assert!(g.rows[2..].iter().all(|r| r.len() == 5));
        assert_eq!(g.rows[0].len(), 3);
        assert!(traversal_grid(&b, &refs, (-3.0, 3.0), 1).is_err());
    }
}
