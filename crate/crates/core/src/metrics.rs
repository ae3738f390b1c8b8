//! Supervised disentanglement metrics.
//!
//! Both metrics read representations from a [`RepresentationTable`]: the
//! posterior mean of every dataset row, plus the per-dimension KL to the
//! prior when the representation comes from an encoder. Fixture
//! representations (hand-built tables) carry no KL and are never pruned.

use serde::{Deserialize, Serialize};

use crate::data::{sample_fixed_factor_rows, FactorDataset};
use crate::error::{Error, Result};
use crate::models::ModelBundle;
use crate::optim::Adagrad;
use crate::rng::{tags, SeedStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    /// `d(a, b) = 1` when the values differ.
    Discrete,
    /// `d(a, b) = (a - b)²`.
    Squared,
}

/// `1/(2N(N-1)) Σ_{i,j} d(x_i, x_j)`.
pub fn gini_variance(values: &[f64], distance: Distance) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::domain(format!("Gini variance needs at least 2 values, got {n}")));
    }
    let nf = n as f64;
    let pair_sum = match distance {
        Distance::Squared => {
            // Σ_{i,j} (x_i - x_j)² = 2N Σ_i (x_i - x̄)²
            let mean = values.iter().sum::<f64>() / nf;
            2.0 * nf * values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        }
        Distance::Discrete => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let same: f64 = sorted
                .chunk_by(|a, b| a == b)
                .map(|run| (run.len() as f64).powi(2))
                .sum();
            nf * nf - same
        }
    };
    Ok(pair_sum / (2.0 * nf * (nf - 1.0)))
}

/// Vote counts `V[j][k]` for the surviving latent dimensions `dims`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteMatrix {
    /// Latent index of each row.
    pub dims: Vec<usize>,
    pub factors: usize,
    pub counts: Vec<Vec<u64>>,
}

impl VoteMatrix {
    pub fn new(dims: Vec<usize>, factors: usize) -> Self {
        let counts = vec![vec![0; factors]; dims.len()];
        Self { dims, factors, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// `C(j) = argmax_k V[j][k]`, ties to the lowest factor index.
    pub fn classifier(&self) -> Vec<usize> {
        self.counts
            .iter()
            .map(|row| {
                let mut best = 0;
                for (k, &c) in row.iter().enumerate() {
                    if c > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    /// `Σ_j V[j][C(j)] / M`.
    pub fn accuracy(&self) -> Result<f64> {
        let m = self.total();
        if m == 0 {
            return Err(Error::domain("no votes"));
        }
        let hit: u64 = self.counts.iter().zip(self.classifier()).map(|(row, c)| row[c]).sum();
        Ok(hit as f64 / m as f64)
    }
}

/// Majority-vote classifier over `(a_i, b_i)` pairs with `a_i < dims` and
/// `b_i < factors`; returns `C` and its accuracy.
pub fn majority_vote_classifier(votes: &[(usize, usize)], dims: usize, factors: usize) -> Result<(Vec<usize>, f64)> {
    if votes.is_empty() {
        return Err(Error::domain("no votes"));
    }
    let mut v = VoteMatrix::new((0..dims).collect(), factors);
    for &(a, b) in votes {
        if a >= dims || b >= factors {
            return Err(Error::Index(format!("vote ({a}, {b}) outside {dims} × {factors}")));
        }
        v.counts[a][b] += 1;
    }
    let acc = v.accuracy()?;
    Ok((v.classifier(), acc))
}

/// Posterior means (`N × dim`, row-major) for every dataset row, with
/// optional per-dimension KL to the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationTable {
    pub dim: usize,
    pub means: Vec<f64>,
    pub kl: Option<Vec<f64>>,
}

impl RepresentationTable {
    pub fn new(dim: usize, means: Vec<f64>, kl: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 || !means.len().is_multiple_of(dim) {
            return Err(Error::dim(format!("{} values for width {dim}", means.len())));
        }
        if let Some(kl) = &kl {
            if kl.len() != means.len() {
                return Err(Error::dim("KL table and means differ in size"));
            }
        }
        Ok(Self { dim, means, kl })
    }

    /// Encodes the whole dataset.
    pub fn from_bundle(bundle: &ModelBundle<f32>, dataset: &FactorDataset) -> Result<Self> {
        let d = bundle.spec.latent_dim;
        let n = dataset.len();
        let mut means = Vec::with_capacity(n * d);
        let mut kl = Vec::with_capacity(n * d);
        let rows: Vec<usize> = (0..n).collect();
        for chunk in rows.chunks(256) {
            let post = bundle.encode_batch(&dataset.batch(chunk), None)?;
            for (&m, &lv) in post.mean.iter().zip(&post.log_variance) {
                let (m, lv) = (m as f64, lv as f64);
                means.push(m);
                kl.push(0.5 * (m * m + lv.exp() - 1.0 - lv));
            }
        }
        Self::new(d, means, Some(kl))
    }

    /// A fixed function of the factor classes, e.g. an oracle or the
    /// partially disentangled construction.
    pub fn from_factors(dataset: &FactorDataset, dim: usize, f: impl Fn(&[u32]) -> Vec<f64>) -> Result<Self> {
        let mut means = Vec::with_capacity(dataset.len() * dim);
        for i in 0..dataset.len() {
            let z = f(dataset.factors_of(i));
            if z.len() != dim {
                return Err(Error::dim(format!("representation of width {} expected {dim}", z.len())));
            }
            means.extend(z);
        }
        Self::new(dim, means, None)
    }

    pub fn len(&self) -> usize {
        self.means.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.means[i * self.dim..(i + 1) * self.dim]
    }

    /// Multiplies dimension `j` of every row by `c`.
    pub fn rescaled(&self, j: usize, c: f64) -> Self {
        let mut out = self.clone();
        for row in out.means.chunks_mut(self.dim) {
            row[j] *= c;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewMetricConfig {
    /// Images per vote.
    pub l: usize,
    pub votes: usize,
    /// A dimension is pruned when its mean KL over the probe is below this.
    pub prune_threshold: f64,
    pub probe_points: usize,
    /// Rows used for the per-dimension standard deviation.
    pub scale_points: usize,
}

impl Default for NewMetricConfig {
    fn default() -> Self {
        Self {
            l: 100,
            votes: 800,
            prune_threshold: 0.01,
            probe_points: 1000,
            scale_points: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HigginsConfig {
    /// Pairs per training or evaluation point.
    pub l: usize,
    pub train_iters: usize,
    pub train_batch: usize,
    pub eval_points: usize,
    pub lr: f64,
    pub initial_accumulator: f64,
}

impl Default for HigginsConfig {
    fn default() -> Self {
        Self {
            l: 200,
            train_iters: 10_000,
            train_batch: 10,
            eval_points: 800,
            lr: 0.01,
            initial_accumulator: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMethod {
    Higgins,
    MajorityVote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub score: f64,
    pub method: MetricMethod,
    pub votes: Option<VoteMatrix>,
    pub pruned_dims: Vec<usize>,
    /// Every dimension was pruned; the score is the chance level `1/K`.
    pub degenerate: bool,
    pub seed: u64,
    pub config: serde_json::Value,
}

fn require_factors(dataset: &FactorDataset, table: &RepresentationTable) -> Result<()> {
    if !dataset.has_factors() {
        return Err(Error::config("metric requires ground-truth factors"));
    }
    if table.len() != dataset.len() {
        return Err(Error::dim(format!(
            "representation has {} rows, dataset {}",
            table.len(),
            dataset.len()
        )));
    }
    Ok(())
}

/// `count` distinct rows drawn from the stream, or all rows if fewer.
fn subset(n: usize, count: usize, stream: &mut SeedStream) -> Vec<usize> {
    if n <= count {
        return (0..n).collect();
    }
    let mut rows = stream.permutation(n);
    rows.truncate(count);
    rows
}

/// Dimensions whose mean KL over a probe subset falls below the threshold.
pub fn pruned_dims(table: &RepresentationTable, probe_points: usize, threshold: f64, seed: u64) -> Vec<usize> {
    let Some(kl) = &table.kl else { return Vec::new() };
    let d = table.dim;
    let rows = subset(table.len(), probe_points, &mut SeedStream::new(seed).derive(tags::PROBE));
    (0..d)
        .filter(|&j| rows.iter().map(|&i| kl[i * d + j]).sum::<f64>() / (rows.len() as f64) < threshold)
        .collect()
}

fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    let ss: f64 = values.map(|v| (v - mean).powi(2)).sum();
    (ss / (n as f64 - 1.0)).sqrt()
}

/// Majority-vote metric on an encoder's posterior means.
pub fn new_metric(bundle: &ModelBundle<f32>, dataset: &FactorDataset, cfg: &NewMetricConfig, seed: u64) -> Result<MetricReport> {
    new_metric_on(&RepresentationTable::from_bundle(bundle, dataset)?, dataset, cfg, seed)
}

/// Majority-vote metric on a precomputed representation.
///
/// Each vote fixes one factor at a random class, draws `L` rows from that
/// stratum, divides each dimension by its standard deviation over the data
/// and votes for the surviving dimension of least variance.
pub fn new_metric_on(table: &RepresentationTable, dataset: &FactorDataset, cfg: &NewMetricConfig, seed: u64) -> Result<MetricReport> {
    require_factors(dataset, table)?;
    if cfg.l < 2 {
        return Err(Error::config("new metric needs L >= 2"));
    }
    if cfg.votes == 0 {
        return Err(Error::config("new metric needs at least one vote"));
    }
    let d = table.dim;
    let k_count = dataset.num_factors();
    let root = SeedStream::new(seed);
    let mut pruned = pruned_dims(table, cfg.probe_points, cfg.prune_threshold, seed);

    let scale_rows = subset(table.len(), cfg.scale_points, &mut root.derive(tags::SCALE));
    let scale: Vec<f64> = (0..d)
        .map(|j| sample_std(scale_rows.iter().map(|&i| table.means[i * d + j])))
        .collect();
    // A dimension constant over the data carries no information.
    for (j, s) in scale.iter().enumerate() {
        if (s.is_nan() || *s <= 0.0) && !pruned.contains(&j) {
            pruned.push(j);
        }
    }
    pruned.sort_unstable();
    let active: Vec<usize> = (0..d).filter(|j| !pruned.contains(j)).collect();
    let config = serde_json::to_value(cfg)?;
    if active.is_empty() {
        return Ok(MetricReport {
            score: 1.0 / k_count as f64,
            method: MetricMethod::MajorityVote,
            votes: None,
            pruned_dims: pruned,
            degenerate: true,
            seed,
            config,
        });
    }

    let mut votes = VoteMatrix::new(active.clone(), k_count);
    let mut normalised = vec![0.0; cfg.l];
    for v in 0..cfg.votes {
        let mut s = root.derive(tags::VOTE).derive(v as u64);
        let k = s.below(k_count);
        let value = s.below(dataset.spec.cardinalities[k]);
        let rows = sample_fixed_factor_rows(dataset, k, value, cfg.l, &mut s)?;
        let mut best = (0, f64::INFINITY);
        for (a, &j) in active.iter().enumerate() {
            for (slot, &i) in normalised.iter_mut().zip(&rows) {
                *slot = table.means[i * d + j] / scale[j];
            }
            let var = gini_variance(&normalised, Distance::Squared)?;
            if var < best.1 {
                best = (a, var);
            }
        }
        votes.counts[best.0][k] += 1;
    }
    Ok(MetricReport {
        score: votes.accuracy()?,
        method: MetricMethod::MajorityVote,
        votes: Some(votes),
        pruned_dims: pruned,
        degenerate: false,
        seed,
        config,
    })
}

/// One Higgins input: mean over `L` pairs (sharing factor `k`'s class) of
/// `|z_a - z_b|`.
fn higgins_point(table: &RepresentationTable, dataset: &FactorDataset, l: usize, s: &mut SeedStream) -> Result<(Vec<f64>, usize)> {
    let d = table.dim;
    let k = s.below(dataset.num_factors());
    let mut x = vec![0.0; d];
    for _ in 0..l {
        let value = s.below(dataset.spec.cardinalities[k]);
        let pair = sample_fixed_factor_rows(dataset, k, value, 2, s)?;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += (table.means[pair[0] * d + j] - table.means[pair[1] * d + j]).abs();
        }
    }
    x.iter_mut().for_each(|v| *v /= l as f64);
    Ok((x, k))
}

/// Linear softmax classifier `W x + b`; parameters flattened as
/// `[W (K × d), b (K)]`.
fn logits(params: &[f64], x: &[f64], k_count: usize) -> Vec<f64> {
    let d = x.len();
    (0..k_count)
        .map(|k| params[k_count * d + k] + params[k * d..(k + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect()
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Accuracy of a linear classifier predicting the fixed factor from
/// averaged absolute pair differences of an encoder's posterior means.
pub fn higgins_metric(bundle: &ModelBundle<f32>, dataset: &FactorDataset, cfg: &HigginsConfig, seed: u64) -> Result<MetricReport> {
    higgins_metric_on(&RepresentationTable::from_bundle(bundle, dataset)?, dataset, cfg, seed)
}

pub fn higgins_metric_on(table: &RepresentationTable, dataset: &FactorDataset, cfg: &HigginsConfig, seed: u64) -> Result<MetricReport> {
    require_factors(dataset, table)?;
    if cfg.l < 1 || cfg.eval_points == 0 || cfg.train_batch == 0 {
        return Err(Error::config("Higgins metric needs L, batch size and eval points of at least 1"));
    }
    let d = table.dim;
    let k_count = dataset.num_factors();
    let root = SeedStream::new(seed);
    let mut params = vec![0.0; k_count * d + k_count];
    let mut opt = Adagrad::new(cfg.lr, cfg.initial_accumulator, params.len());
    let mut grad = vec![0.0; params.len()];
    for it in 0..cfg.train_iters {
        let mut s = root.derive(tags::CLASSIFIER_TRAIN).derive(it as u64);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for _ in 0..cfg.train_batch {
            let (x, k) = higgins_point(table, dataset, cfg.l, &mut s)?;
            let z = logits(&params, &x, k_count);
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = z.iter().map(|v| (v - max).exp()).sum();
            for c in 0..k_count {
                let p = (z[c] - max).exp() / denom;
                let delta = (p - (c == k) as u8 as f64) / cfg.train_batch as f64;
                for j in 0..d {
                    grad[c * d + j] += delta * x[j];
                }
                grad[k_count * d + c] += delta;
            }
        }
        opt.step(&mut params, &grad);
    }
    let mut s = root.derive(tags::CLASSIFIER_EVAL);
    let mut hits = 0usize;
    for _ in 0..cfg.eval_points {
        let (x, k) = higgins_point(table, dataset, cfg.l, &mut s)?;
        hits += (argmax_first(&logits(&params, &x, k_count)) == k) as usize;
    }
    Ok(MetricReport {
        score: hits as f64 / cfg.eval_points as f64,
        method: MetricMethod::Higgins,
        votes: None,
        pruned_dims: Vec::new(),
        degenerate: false,
        seed,
        config: serde_json::to_value(cfg)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub pearson: f64,
    pub kendall: f64,
    pub spearman: f64,
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Ranks starting at 1, tied values sharing their average rank.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// Kendall's tau-b.
fn kendall(x: &[f64], y: &[f64]) -> f64 {
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i].total_cmp(&x[j]) as i64;
            let dy = y[i].total_cmp(&y[j]) as i64;
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => tie_x += 1,
                (_, 0) => tie_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n_x = (concordant + discordant + tie_y) as f64;
    let n_y = (concordant + discordant + tie_x) as f64;
    (concordant - discordant) as f64 / (n_x * n_y).sqrt()
}

/// Pearson, Kendall (tau-b) and Spearman correlations of paired scores.
pub fn metric_correlations(pairs: &[(f64, f64)]) -> Result<Correlations> {
    if pairs.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!("{} pairs, need at least 3", pairs.len())));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for (name, col) in [("first", &x), ("second", &y)] {
        if col.iter().all(|v| *v == col[0]) {
            return Err(Error::UndefinedCorrelation(format!("{name} column is constant")));
        }
    }
    Ok(Correlations {
        pearson: pearson(&x, &y),
        kendall: kendall(&x, &y),
        spearman: pearson(&average_ranks(&x), &average_ranks(&y)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_examples() {
        assert_eq!(gini_variance(&[3.0; 5], Distance::Squared).unwrap(), 0.0);
        assert_eq!(gini_variance(&[3.0; 5], Distance::Discrete).unwrap(), 0.0);
        assert!((gini_variance(&[0.0, 1.0], Distance::Discrete).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(gini_variance(&[1.0], Distance::Squared), Err(Error::Domain(_))));
    }

    #[test]
    fn majority_vote_examples() {
        let (c, acc) = majority_vote_classifier(&[(0, 1), (0, 1), (0, 2)], 1, 3).unwrap();
        assert_eq!(c, vec![1]);
        assert!((acc - 2.0 / 3.0).abs() < 1e-12);
        let (_, acc) = majority_vote_classifier(&[(0, 0), (1, 1), (2, 2)], 3, 3).unwrap();
        assert_eq!(acc, 1.0);
        let (c, _) = majority_vote_classifier(&[(0, 2), (0, 1)], 1, 3).unwrap();
        assert_eq!(c, vec![1]);
        assert!(majority_vote_classifier(&[], 1, 1).is_err());
    }

    #[test]
    fn correlation_examples() {
        let pairs: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, (i * i) as f64)).collect();
        let c = metric_correlations(&pairs).unwrap();
        assert!((c.kendall - 1.0).abs() < 1e-12 && (c.spearman - 1.0).abs() < 1e-12);
        let rev: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, -(i as f64).powi(3))).collect();
        assert!((metric_correlations(&rev).unwrap().spearman + 1.0).abs() < 1e-12);
        assert!(metric_correlations(&[(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)]).is_err());
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }
}
