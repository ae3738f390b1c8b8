//! One sweep cell: train, then score the result with both metrics and the
//! evaluation probes. Shared by the command line and the acceptance suite.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::FactorDataset;
use crate::error::Result;
use crate::evaluation::{discriminator_accuracy, reconstruction_error};
use crate::metrics::{higgins_metric_on, new_metric_on, HigginsConfig, NewMetricConfig, RepresentationTable};
use crate::models::ModelBundle;
use crate::training::{RunLog, TrainConfig, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub new_metric: NewMetricConfig,
    pub higgins: HigginsConfig,
    pub discriminator_probes: usize,
    /// Seed for metric votes, classifier data and evaluation noise.
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            new_metric: NewMetricConfig::default(),
            higgins: HigginsConfig::default(),
            discriminator_probes: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub family: String,
    pub coefficient: f64,
    pub seed: u64,
    pub iterations: u64,
    pub reconstruction_error: f64,
    pub new_metric: f64,
    pub higgins_metric: f64,
    /// Oracle TC at iteration 0, at the first row after it, and at the end.
    pub tc_oracle_initial: Option<f64>,
    pub tc_oracle_first: Option<f64>,
    pub tc_oracle: Option<f64>,
    pub discriminator_accuracy: f64,
}

pub const SWEEP_HEADER: &str =
    "family,coefficient,seed,reconstruction_error,new_metric,higgins_metric,tc_oracle,discriminator_accuracy";

impl CellSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.family,
            self.coefficient,
            self.seed,
            self.reconstruction_error,
            self.new_metric,
            self.higgins_metric,
            self.tc_oracle.map(|v| v.to_string()).unwrap_or_default(),
            self.discriminator_accuracy
        )
    }
}

/// Scores a trained bundle.
pub fn summarise(
    bundle: &ModelBundle<f32>,
    log: &RunLog,
    config: &TrainConfig,
    dataset: &FactorDataset,
    eval: &EvalSettings,
) -> Result<CellSummary> {
    let table = RepresentationTable::from_bundle(bundle, dataset)?;
    let oracle = |i: usize| log.rows.get(i).and_then(|r| r.tc_oracle);
    Ok(CellSummary {
        family: config.objective.family.name().to_string(),
        coefficient: config.objective.coefficient(),
        seed: config.seed,
        iterations: log.last().map_or(0, |r| r.iteration),
        reconstruction_error: reconstruction_error(bundle, dataset, eval.seed)?,
        new_metric: new_metric_on(&table, dataset, &eval.new_metric, eval.seed)?.score,
        higgins_metric: higgins_metric_on(&table, dataset, &eval.higgins, eval.seed)?.score,
        tc_oracle_initial: oracle(0),
        tc_oracle_first: oracle(1),
        tc_oracle: log.last().and_then(|r| r.tc_oracle),
        discriminator_accuracy: discriminator_accuracy(bundle, dataset, eval.discriminator_probes, eval.seed)?,
    })
}

/// Trains from scratch (checkpointing into `dir` when given) and scores the
/// result.
pub fn run_cell(
    dataset: &FactorDataset,
    config: &TrainConfig,
    eval: &EvalSettings,
    dir: Option<&Path>,
) -> Result<(ModelBundle<f32>, RunLog, CellSummary)> {
    let mut trainer = Trainer::new(dataset, config.clone())?;
    trainer.run(config.iterations, dir)?;
    let (bundle, log) = trainer.into_parts();
    let summary = summarise(&bundle, &log, config, dataset, eval)?;
    Ok((bundle, log, summary))
}
