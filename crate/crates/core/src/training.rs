//! The joint VAE / discriminator loop.
//!
//! Each iteration draws one batch for the VAE update and a second,
//! independently drawn batch for the discriminator update. Every random draw
//! comes from a stream derived from `(seed, iteration, purpose)`, so a run
//! split across a checkpoint replays exactly.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::FactorDataset;
use crate::distributions::{LatentBatch, SourceTag};
use crate::error::{Error, Result};
use crate::models::{ArchitectureSpec, Archive, ModelBundle, Net};
use crate::objectives::{discriminator_step, evaluate_objective, FakeSource, LossBreakdown, ObjectiveConfig};
use crate::optim::{Adam, AdamConfig};
use crate::rng::{tags, SeedStream};
use crate::tc::{permute_dims_with, tc_exact_gaussian_oracle, GaussianMixture};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// The small convolutional stack for 32×32 images.
    Desk,
    /// The 64×64 2D Shapes architecture.
    Paper2dShapes,
    Custom(ArchitectureSpec),
}

/// Settings for the exact TC of the aggregate posterior, computed at each
/// log row from the encoder posteriors of a fixed subset of the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub enabled: bool,
    pub max_points: usize,
    pub mc_samples: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            max_points: 1024,
            mc_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub objective: ObjectiveConfig,
    pub batch_size: usize,
    pub iterations: u64,
    pub latent_dim: usize,
    pub vae_optimiser: AdamConfig,
    pub disc_optimiser: AdamConfig,
    pub seed: u64,
    /// Write a checkpoint every this many iterations (0: final only).
    pub checkpoint_every: u64,
    /// Log a row every this many iterations, plus one at iteration 0.
    pub log_every: u64,
    pub architecture: Architecture,
    pub oracle: OracleConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveConfig::vae(),
            batch_size: 64,
            iterations: 10_000,
            latent_dim: 10,
            vae_optimiser: AdamConfig::new(1e-4, 0.9, 0.999),
            disc_optimiser: AdamConfig::new(1e-4, 0.5, 0.9),
            seed: 0,
            checkpoint_every: 0,
            log_every: 100,
            architecture: Architecture::Desk,
            oracle: OracleConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        if self.batch_size < 2 {
            return Err(Error::config("batch_size must be at least 2"));
        }
        if self.log_every == 0 {
            return Err(Error::config("log_every must be at least 1"));
        }
        for (name, o) in [("vae_optimiser", &self.vae_optimiser), ("disc_optimiser", &self.disc_optimiser)] {
            let ok = o.lr > 0.0
                && (0.0..1.0).contains(&o.beta1)
                && (0.0..1.0).contains(&o.beta2)
                && o.eps > 0.0;
            if !ok {
                return Err(Error::config(format!("{name} needs lr > 0, betas in [0,1), eps > 0")));
            }
        }
        if self.oracle.enabled && (self.oracle.max_points == 0 || self.oracle.mc_samples == 0) {
            return Err(Error::config("oracle max_points and mc_samples must be positive"));
        }
        let spec = self.architecture_spec();
        spec.validate()?;
        if spec.latent_dim != self.latent_dim {
            return Err(Error::config(format!(
                "architecture latent_dim {} differs from latent_dim {}",
                spec.latent_dim, self.latent_dim
            )));
        }
        Ok(())
    }

    pub fn architecture_spec(&self) -> ArchitectureSpec {
        match &self.architecture {
            Architecture::Desk => ArchitectureSpec::desk(self.latent_dim),
            Architecture::Paper2dShapes => ArchitectureSpec::paper_2d_shapes(self.latent_dim),
            Architecture::Custom(spec) => spec.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: u64,
    /// Mean negative Bernoulli log-likelihood per image.
    pub reconstruction_error: f64,
    pub kl: f64,
    pub tc_discriminator: f64,
    pub tc_oracle: Option<f64>,
    pub discriminator_accuracy: f64,
    /// Seconds since the run (or the resumed segment) started.
    pub wall_clock: f64,
}

impl LogRow {
    /// Equality on everything except wall-clock time.
    pub fn same_values(&self, other: &LogRow) -> bool {
        let bits = |v: f64| v.to_bits();
        self.iteration == other.iteration
            && bits(self.reconstruction_error) == bits(other.reconstruction_error)
            && bits(self.kl) == bits(other.kl)
            && bits(self.tc_discriminator) == bits(other.tc_discriminator)
            && self.tc_oracle.map(bits) == other.tc_oracle.map(bits)
            && bits(self.discriminator_accuracy) == bits(other.discriminator_accuracy)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
}

pub const RUNLOG_HEADER: &str =
    "iteration,reconstruction_error,kl,tc_discriminator,tc_oracle,discriminator_accuracy,wall_clock";

impl RunLog {
    pub fn push(&mut self, row: LogRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.iteration <= last.iteration {
                return Err(Error::config(format!(
                    "log row for iteration {} after iteration {}",
                    row.iteration, last.iteration
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, other: RunLog) -> Result<()> {
        other.rows.into_iter().try_for_each(|r| self.push(r))
    }

    /// Bit equality of every column but `wall_clock`.
    pub fn same_values(&self, other: &RunLog) -> bool {
        self.rows.len() == other.rows.len() && self.rows.iter().zip(&other.rows).all(|(a, b)| a.same_values(b))
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(RUNLOG_HEADER);
        s.push('\n');
        for r in &self.rows {
            let oracle = r.tc_oracle.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.iteration,
                r.reconstruction_error,
                r.kl,
                r.tc_discriminator,
                oracle,
                r.discriminator_accuracy,
                r.wall_clock
            ));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<RunLog> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let label = path.display().to_string();
        let mut lines = text.lines();
        if lines.next() != Some(RUNLOG_HEADER) {
            return Err(Error::format(label, "unexpected header"));
        }
        let mut log = RunLog::default();
        for line in lines.filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::format(label, format!("row `{line}` has {} fields", f.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::format(label.clone(), format!("bad number `{s}`")))
            };
            log.push(LogRow {
                iteration: f[0]
                    .parse()
                    .map_err(|_| Error::format(label.clone(), format!("bad iteration `{}`", f[0])))?,
                reconstruction_error: num(f[1])?,
                kl: num(f[2])?,
                tc_discriminator: num(f[3])?,
                tc_oracle: if f[4].is_empty() { None } else { Some(num(f[4])?) },
                discriminator_accuracy: num(f[5])?,
                wall_clock: num(f[6])?,
            })?;
        }
        Ok(log)
    }
}

/// Running sums over the iterations since the last log row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct Window {
    count: u64,
    reconstruction_error: f64,
    kl: f64,
    tc: f64,
    accuracy: f64,
}

impl Window {
    fn add(&mut self, b: &LossBreakdown, accuracy: f64) {
        self.count += 1;
        self.reconstruction_error -= b.reconstruction;
        self.kl += b.kl_per_datapoint;
        self.tc += b.tc_term;
        self.accuracy += accuracy;
    }

    fn mean(&self) -> [f64; 4] {
        let n = self.count.max(1) as f64;
        [self.reconstruction_error / n, self.kl / n, self.tc / n, self.accuracy / n]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrainerState {
    iteration: u64,
    config: TrainConfig,
    window: Window,
    adam_steps: [u64; 3],
}

/// The row indices of both batches for one iteration. The VAE batch and the
/// discriminator batch come from different streams.
pub fn iteration_batches(seed: u64, iteration: u64, n: usize, m: usize) -> (Vec<usize>, Vec<usize>) {
    let it = iteration_stream(seed, iteration);
    let draw = |tag| {
        let mut s = it.derive(tag);
        (0..m).map(|_| s.below(n)).collect::<Vec<_>>()
    };
    (draw(tags::VAE_BATCH), draw(tags::DISC_BATCH))
}

fn iteration_stream(seed: u64, iteration: u64) -> SeedStream {
    SeedStream::new(seed).derive(tags::TRAIN).derive(iteration)
}

fn normals_f32(stream: SeedStream, n: usize) -> Vec<f32> {
    let mut s = stream;
    s.normals(n).into_iter().map(|v| v as f32).collect()
}

/// Dataset rows whose posteriors form the oracle mixture: all rows, or a
/// seeded subset of `max_points` of them.
fn oracle_rows(seed: u64, n: usize, max_points: usize) -> Vec<usize> {
    if n <= max_points {
        return (0..n).collect();
    }
    let mut s = SeedStream::new(seed).derive(tags::ORACLE).derive(0);
    let mut rows = s.permutation(n);
    rows.truncate(max_points);
    rows.sort_unstable();
    rows
}

/// Exact TC of the aggregate posterior over `rows`, by Monte Carlo over
/// `z ~ q(z)` with exact mixture densities.
pub fn aggregate_posterior_tc(
    bundle: &ModelBundle<f32>,
    dataset: &FactorDataset,
    rows: &[usize],
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut posteriors = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(256) {
        posteriors.extend(bundle.encode_batch(&dataset.batch(chunk), None)?.posteriors());
    }
    let mixture = GaussianMixture::uniform(posteriors)?;
    Ok(tc_exact_gaussian_oracle(&mixture, mc_samples, seed)?.value)
}

/// Owns the mutable state of a run: parameters, optimiser moments, the
/// iteration counter and the pending log window.
pub struct Trainer<'a> {
    dataset: &'a FactorDataset,
    config: TrainConfig,
    bundle: ModelBundle<f32>,
    opt_encoder: Adam,
    opt_decoder: Adam,
    opt_disc: Adam,
    iteration: u64,
    window: Window,
    oracle_rows: Vec<usize>,
    log: RunLog,
    started: Instant,
}

impl<'a> Trainer<'a> {
    /// Fresh run; logs the row for iteration 0.
    pub fn new(dataset: &'a FactorDataset, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let bundle = ModelBundle::new(config.architecture_spec(), config.seed)?;
        let mut t = Self::assemble(dataset, config, bundle)?;
        t.log_initial_row()?;
        Ok(t)
    }

    /// Restores a run from a checkpoint written by [`Trainer::checkpoint`].
    /// The checkpoint must agree with `config` on everything except the
    /// iteration budget and the checkpoint/oracle bookkeeping.
    pub fn from_checkpoint(path: &Path, dataset: &'a FactorDataset, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let archive = Archive::read(path)?;
        let state: TrainerState = archive.json("state.json")?;
        let bundle = ModelBundle::read_from(&archive)?;
        if bundle.spec != config.architecture_spec() {
            return Err(Error::config("checkpoint architecture differs from the configured one"));
        }
        let saved = &state.config;
        let mismatch = [
            ("objective", saved.objective != config.objective),
            ("batch_size", saved.batch_size != config.batch_size),
            ("seed", saved.seed != config.seed),
            ("vae_optimiser", saved.vae_optimiser != config.vae_optimiser),
            ("disc_optimiser", saved.disc_optimiser != config.disc_optimiser),
            ("log_every", saved.log_every != config.log_every),
        ];
        if let Some((key, _)) = mismatch.iter().find(|(_, differs)| *differs) {
            return Err(Error::config(format!("checkpoint was trained with a different {key}")));
        }
        let mut t = Self::assemble(dataset, config, bundle)?;
        for (k, (which, opt)) in [
            (Net::Encoder, &mut t.opt_encoder),
            (Net::Decoder, &mut t.opt_decoder),
            (Net::Discriminator, &mut t.opt_disc),
        ]
        .into_iter()
        .enumerate()
        {
            let names = moment_names(&t.bundle, which);
            opt.steps = state.adam_steps[k];
            for (i, name) in names.iter().enumerate() {
                for (suffix, dst) in [("m", &mut opt.m[i]), ("v", &mut opt.v[i])] {
                    let key = format!("{name}.{suffix}");
                    let src = archive.array(&key)?;
                    if src.len() != dst.len() {
                        return Err(Error::format(key, format!("expected {} values", dst.len())));
                    }
                    dst.copy_from_slice(src);
                }
            }
        }
        t.iteration = state.iteration;
        t.window = state.window;
        Ok(t)
    }

    fn assemble(dataset: &'a FactorDataset, config: TrainConfig, bundle: ModelBundle<f32>) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::config("dataset is empty"));
        }
        let s = bundle.spec.input_shape;
        if (s.height, s.width, s.channels) != (dataset.height, dataset.width, dataset.channels) {
            return Err(Error::config(format!(
                "architecture expects {}×{}×{} images, dataset `{}` has {}×{}×{}",
                s.height, s.width, s.channels, dataset.name, dataset.height, dataset.width, dataset.channels
            )));
        }
        Ok(Self {
            dataset,
            opt_encoder: Adam::new(config.vae_optimiser, &bundle.encoder),
            opt_decoder: Adam::new(config.vae_optimiser, &bundle.decoder),
            opt_disc: Adam::new(config.disc_optimiser, &bundle.discriminator),
            oracle_rows: oracle_rows(config.seed, dataset.len(), config.oracle.max_points),
            config,
            bundle,
            iteration: 0,
            window: Window::default(),
            log: RunLog::default(),
            started: Instant::now(),
        })
    }

    pub fn bundle(&self) -> &ModelBundle<f32> {
        &self.bundle
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn into_parts(self) -> (ModelBundle<f32>, RunLog) {
        (self.bundle, self.log)
    }

    /// Fake codes for the discriminator: a permuted batch of posterior
    /// samples, or prior samples for the prior-matching families.
    fn fake_codes(&self, rows: &[usize], it: &SeedStream) -> Result<Vec<f32>> {
        let (m, d) = (rows.len(), self.config.latent_dim);
        match self.config.objective.family.fake_source() {
            FakeSource::Permuted => {
                let post = self.bundle.encode_batch(&self.dataset.batch(rows), None)?;
                let noise = normals_f32(it.derive(tags::DISC_NOISE), m * d);
                let codes: Vec<f64> = (0..m * d)
                    .map(|i| {
                        let sd = (0.5 * post.log_variance[i]).exp();
                        (post.mean[i] + sd * noise[i]) as f64
                    })
                    .collect();
                let batch = LatentBatch::new(codes, m, d, SourceTag::PosteriorSample)?;
                let permuted = permute_dims_with(&batch, &mut it.derive(tags::DISC_PERMUTE));
                Ok(permuted.values.into_iter().map(|v| v as f32).collect())
            }
            FakeSource::Prior => Ok(normals_f32(it.derive(tags::DISC_PRIOR), m * d)),
        }
    }

    fn log_initial_row(&mut self) -> Result<()> {
        let (m, d) = (self.config.batch_size, self.config.latent_dim);
        let it = iteration_stream(self.config.seed, 0);
        let (vae_rows, disc_rows) = iteration_batches(self.config.seed, 0, self.dataset.len(), m);
        let noise = normals_f32(it.derive(tags::VAE_NOISE), m * d);
        let step = evaluate_objective(&self.bundle, &self.dataset.batch(&vae_rows), &noise, &self.config.objective, false)?;
        let fake = self.fake_codes(&disc_rows, &it)?;
        let disc = discriminator_step(&self.bundle, &step.codes, &fake, false)?;
        let mut w = Window::default();
        w.add(&step.breakdown, disc.accuracy);
        self.push_row(0, w)
    }

    fn push_row(&mut self, iteration: u64, w: Window) -> Result<()> {
        let [reconstruction_error, kl, tc_discriminator, discriminator_accuracy] = w.mean();
        let tc_oracle = if self.config.oracle.enabled {
            let seed = SeedStream::new(self.config.seed)
                .derive(tags::ORACLE)
                .derive(1)
                .derive(iteration)
                .next_u64();
            Some(aggregate_posterior_tc(
                &self.bundle,
                self.dataset,
                &self.oracle_rows,
                self.config.oracle.mc_samples,
                seed,
            )?)
        } else {
            None
        };
        self.log.push(LogRow {
            iteration,
            reconstruction_error,
            kl,
            tc_discriminator,
            tc_oracle,
            discriminator_accuracy,
            wall_clock: self.started.elapsed().as_secs_f64(),
        })
    }

    /// One VAE update followed by one discriminator update on a fresh batch.
    pub fn step(&mut self) -> Result<()> {
        let (m, d) = (self.config.batch_size, self.config.latent_dim);
        let iteration = self.iteration;
        let it = iteration_stream(self.config.seed, iteration);
        let (vae_rows, disc_rows) = iteration_batches(self.config.seed, iteration, self.dataset.len(), m);

        let noise = normals_f32(it.derive(tags::VAE_NOISE), m * d);
        let step = evaluate_objective(&self.bundle, &self.dataset.batch(&vae_rows), &noise, &self.config.objective, true)?;
        let b = &step.breakdown;
        if ![b.total, b.reconstruction, b.kl_per_datapoint, b.tc_term, b.penalty_extra]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::NonFinite {
                iteration,
                detail: format!("VAE batch rows {vae_rows:?}; loss parts {b:?}"),
            });
        }
        let disc_before = cfg!(debug_assertions).then(|| self.bundle.fingerprint(Net::Discriminator));
        let (enc_grads, dec_grads) = step
            .encoder_grads
            .as_ref()
            .zip(step.decoder_grads.as_ref())
            .expect("gradients were requested");
        self.opt_encoder.step(&mut self.bundle.encoder, enc_grads);
        self.opt_decoder.step(&mut self.bundle.decoder, dec_grads);
        if let Some(h) = disc_before {
            debug_assert_eq!(h, self.bundle.fingerprint(Net::Discriminator), "VAE step touched the discriminator");
        }

        // The real codes are those of the VAE step, detached; the fake codes
        // come from the second batch under the updated encoder.
        let fake = self.fake_codes(&disc_rows, &it)?;
        let disc = discriminator_step(&self.bundle, &step.codes, &fake, true)?;
        if !disc.loss.is_finite() {
            return Err(Error::NonFinite {
                iteration,
                detail: format!("discriminator batch rows {disc_rows:?}; loss {}", disc.loss),
            });
        }
        let vae_before = cfg!(debug_assertions)
            .then(|| (self.bundle.fingerprint(Net::Encoder), self.bundle.fingerprint(Net::Decoder)));
        self.opt_disc
            .step(&mut self.bundle.discriminator, disc.grads.as_ref().expect("gradients were requested"));
        if let Some(h) = vae_before {
            debug_assert_eq!(
                h,
                (self.bundle.fingerprint(Net::Encoder), self.bundle.fingerprint(Net::Decoder)),
                "discriminator step touched the VAE"
            );
        }

        self.window.add(&step.breakdown, disc.accuracy);
        self.iteration += 1;
        if self.iteration.is_multiple_of(self.config.log_every) {
            let w = std::mem::take(&mut self.window);
            self.push_row(self.iteration, w)?;
        }
        Ok(())
    }

    /// Runs `iterations` further steps, writing checkpoints into `dir` at
    /// multiples of `checkpoint_every` and after the last step.
    pub fn run(&mut self, iterations: u64, dir: Option<&Path>) -> Result<()> {
        let end = self.iteration + iterations;
        while self.iteration < end {
            self.step()?;
            if let Some(dir) = dir {
                let every = self.config.checkpoint_every;
                if every > 0 && self.iteration.is_multiple_of(every) && self.iteration < end {
                    self.save_checkpoint(&checkpoint_path(dir, self.iteration))?;
                }
            }
        }
        if let Some(dir) = dir {
            self.save_checkpoint(&checkpoint_path(dir, self.iteration))?;
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Result<Archive> {
        let mut a = Archive::default();
        self.bundle.write_into(&mut a)?;
        a.put_json(
            "state.json",
            &TrainerState {
                iteration: self.iteration,
                config: self.config.clone(),
                window: self.window,
                adam_steps: [self.opt_encoder.steps, self.opt_decoder.steps, self.opt_disc.steps],
            },
        )?;
        for (which, opt) in [
            (Net::Encoder, &self.opt_encoder),
            (Net::Decoder, &self.opt_decoder),
            (Net::Discriminator, &self.opt_disc),
        ] {
            for (i, name) in moment_names(&self.bundle, which).iter().enumerate() {
                a.put_array(format!("{name}.m"), opt.m[i].clone());
                a.put_array(format!("{name}.v"), opt.v[i].clone());
            }
        }
        Ok(a)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        self.checkpoint()?.write(path)
    }
}

fn moment_names(bundle: &ModelBundle<f32>, which: Net) -> Vec<String> {
    bundle
        .net(which)
        .params()
        .iter()
        .map(|p| format!("adam/{}/{}.{}", which.name(), p.name, p.suffix))
        .collect()
}

/// `dir/checkpoint-00001000.zip` for iteration 1000.
pub fn checkpoint_path(dir: &Path, iteration: u64) -> PathBuf {
    dir.join(format!("checkpoint-{iteration:08}.zip"))
}

/// The checkpoint with the highest iteration in `dir`, if any.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let it = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("checkpoint-"))
            .and_then(|n| n.strip_suffix(".zip"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(it) = it {
            if best.as_ref().is_none_or(|(b, _)| it > *b) {
                best = Some((it, path));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Trains for `config.iterations` iterations from a fresh initialisation.
pub fn train(dataset: &FactorDataset, config: TrainConfig) -> Result<(ModelBundle<f32>, RunLog)> {
    let n = config.iterations;
    let mut t = Trainer::new(dataset, config)?;
    t.run(n, None)?;
    Ok(t.into_parts())
}

/// Continues a checkpointed run for `config.iterations` further iterations.
/// The returned log holds only the rows logged after the checkpoint.
pub fn resume(checkpoint: &Path, dataset: &FactorDataset, config: TrainConfig) -> Result<(ModelBundle<f32>, RunLog)> {
    let n = config.iterations;
    let mut t = Trainer::from_checkpoint(checkpoint, dataset, config)?;
    t.run(n, None)?;
    Ok(t.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FactorSpec;

    fn toy_data() -> FactorDataset {
        let spec = FactorSpec::new(&["a", "b"], &[4, 4]);
        let mut images = Vec::new();
        let mut classes = Vec::new();
        for i in 0..16u32 {
            let (a, b) = (i / 4, i % 4);
            for p in 0..16u32 {
                images.push(((p % 4 == a) || (p / 4 == b)) as u8);
            }
            classes.extend([a, b]);
        }
        FactorDataset::new("toy", spec, (4, 4, 1), images, 1.0, classes).unwrap()
    }

    fn toy_config(family: ObjectiveConfig) -> TrainConfig {
        TrainConfig {
            objective: family,
            batch_size: 8,
            iterations: 20,
            latent_dim: 2,
            seed: 3,
            log_every: 5,
            architecture: Architecture::Custom(ArchitectureSpec::toy()),
            oracle: OracleConfig {
                enabled: true,
                max_points: 16,
                mc_samples: 50,
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_iterations_keeps_initialisation() {
        let data = toy_data();
        let mut cfg = toy_config(ObjectiveConfig::factor_vae(5.0));
        cfg.iterations = 0;
        let (bundle, log) = train(&data, cfg.clone()).unwrap();
        let fresh = ModelBundle::<f32>::new(cfg.architecture_spec(), cfg.seed).unwrap();
        assert_eq!(bundle, fresh);
        assert_eq!(log.rows.len(), 1);
        assert_eq!(log.rows[0].iteration, 0);
    }

    #[test]
    fn gamma_zero_matches_plain_vae_trajectory() {
        let data = toy_data();
        let (a, la) = train(&data, toy_config(ObjectiveConfig::vae())).unwrap();
        let (b, lb) = train(&data, toy_config(ObjectiveConfig::factor_vae(0.0))).unwrap();
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.decoder, b.decoder);
        assert!(la.same_values(&lb));
    }

    #[test]
    fn batches_are_distinct_streams() {
        let (a, b) = iteration_batches(1, 7, 1000, 64);
        assert_eq!(a.len(), 64);
        assert_ne!(a, b);
    }

    #[test]
    fn csv_round_trip() {
        let data = toy_data();
        let (_, log) = train(&data, toy_config(ObjectiveConfig::factor_vae(5.0))).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.csv");
        log.write_csv(&p).unwrap();
        let back = RunLog::read_csv(&p).unwrap();
        assert!(back.same_values(&log));
        assert_eq!(log.rows.iter().map(|r| r.iteration).collect::<Vec<_>>(), vec![0, 5, 10, 15, 20]);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = toy_config(ObjectiveConfig::vae());
        cfg.batch_size = 1;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = toy_config(ObjectiveConfig::vae());
        cfg.latent_dim = 3;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
