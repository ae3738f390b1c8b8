#![allow(dead_code)]

use factorvae::data::{FactorDataset, FactorSpec};
use factorvae::models::ArchitectureSpec;
use factorvae::objectives::ObjectiveConfig;
use factorvae::training::{Architecture, OracleConfig, TrainConfig};

/// 16 images of 4×4 pixels: factor `a` lights a column, factor `b` a row.
pub fn toy_data() -> FactorDataset {
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

pub fn toy_config(objective: ObjectiveConfig, iterations: u64) -> TrainConfig {
    TrainConfig {
        objective,
        batch_size: 8,
        iterations,
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

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
