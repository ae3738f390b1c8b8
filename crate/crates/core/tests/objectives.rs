mod common;

use factorvae::data::generate_mini_shapes;
use factorvae::distributions::LatentBatch;
use factorvae::models::{ArchitectureSpec, ModelBundle, Net};
use factorvae::objectives::{
    aae_loss, factor_vae_loss, factor_vae_prior_variant_loss, objective_loss, vae_elbo_parts, Family,
    ObjectiveConfig,
};
use factorvae::rng::SeedStream;
use factorvae::training::train;
use factorvae::Error;

use common::{toy_config, toy_data};

fn desk() -> ModelBundle<f32> {
    ModelBundle::new(ArchitectureSpec::desk(10), 0).unwrap()
}

/// Zeroes the output layer of `net`.
fn zero_head(bundle: &mut ModelBundle<f32>, net: Net) {
    let mut params = bundle.net_mut(net).params_mut();
    let n = params.len();
    for p in &mut params[n - 2..] {
        p.fill(0.0);
    }
}

#[test]
fn fresh_bundles_are_finite_deterministic_and_seeded() {
    let data = generate_mini_shapes();
    let images = data.batch(&[0, 1, 2, 3]);
    let a = desk();
    let post = a.encode_batch(&images, None).unwrap();
    assert!(post.mean.iter().chain(&post.log_variance).all(|v| v.is_finite()));
    assert_eq!(a.encode_batch(&images, None).unwrap(), post);
    let b = ModelBundle::<f32>::new(ArchitectureSpec::desk(10), 1).unwrap();
    assert_ne!(b.encode_batch(&images, None).unwrap().mean, post.mean);

    let logits = a.decode_batch(&[0.0; 10], None).unwrap();
    assert!(logits.iter().all(|v| v.is_finite()));
    let twice = a.decode_batch(&[0.3; 20], None).unwrap();
    let p = a.pixels();
    assert_eq!(twice[..p], twice[p..]);

    let codes = LatentBatch::from_prior(5, 10, &mut SeedStream::new(1));
    // Equal logits: D(z) = 1/2.
    let logits = a.discriminate(&codes).unwrap();
    assert_eq!(logits.len(), 10);
    assert!(logits.iter().all(|&l| l == 0.0));
}

#[test]
fn posterior_at_prior_and_flat_decoder() {
    let data = generate_mini_shapes();
    let mut bundle = desk();
    zero_head(&mut bundle, Net::Encoder);
    zero_head(&mut bundle, Net::Decoder);
    let images = data.batch(&[5, 50, 500]);
    let parts = vae_elbo_parts(&images, &bundle, 0).unwrap();
    let pixels = bundle.pixels() as f64;
    assert!((parts.reconstruction + pixels * 2f64.ln()).abs() < 1e-6 * pixels);
    assert_eq!(parts.kl_per_datapoint, 0.0);
}

#[test]
fn family_equivalences_at_the_boundary() {
    let data = generate_mini_shapes();
    let bundle = desk();
    let images = data.batch(&[1, 2, 3, 4, 5, 6]);
    let vae = vae_elbo_parts(&images, &bundle, 9).unwrap();
    assert_eq!(objective_loss(&images, &bundle, &ObjectiveConfig::beta_vae(1.0), 9).unwrap(), vae);
    assert_eq!(factor_vae_loss(&images, &bundle, &ObjectiveConfig::factor_vae(0.0), 9).unwrap(), vae);
    // The fresh discriminator gives D = 1/2 everywhere.
    let fv = factor_vae_loss(&images, &bundle, &ObjectiveConfig::factor_vae(7.0), 9).unwrap();
    assert_eq!(fv.tc_term, 0.0);
    assert_eq!(fv.total, vae.total);
    let prior = ObjectiveConfig {
        gamma: 7.0,
        ..ObjectiveConfig::of(Family::FactorVaePriorVariant)
    };
    assert_eq!(factor_vae_prior_variant_loss(&images, &bundle, &prior, 9).unwrap().total, vae.total);
    let aae = ObjectiveConfig {
        gamma: 3.0,
        ..ObjectiveConfig::of(Family::Aae)
    };
    let a = aae_loss(&images, &bundle, &aae, 9).unwrap();
    assert_eq!(a.total, a.reconstruction);
    let b = aae_loss(&images, &bundle, &ObjectiveConfig::of(Family::Aae), 9).unwrap();
    assert_eq!(b.total, b.reconstruction);
}

#[test]
fn entry_points_reject_other_families() {
    let data = generate_mini_shapes();
    let bundle = desk();
    let images = data.batch(&[1, 2]);
    let err = factor_vae_loss(&images, &bundle, &ObjectiveConfig::vae(), 0).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    let bad = ObjectiveConfig {
        beta: 0.5,
        ..ObjectiveConfig::of(Family::BetaVae)
    };
    assert!(matches!(objective_loss(&images, &bundle, &bad, 0), Err(Error::Config(_))));
}

#[test]
fn prior_variant_trains_a_different_model() {
    let data = toy_data();
    let images = data.batch(&(0..16).collect::<Vec<_>>());
    let permuted = ObjectiveConfig::factor_vae(4.0);
    let prior = ObjectiveConfig {
        gamma: 4.0,
        ..ObjectiveConfig::of(Family::FactorVaePriorVariant)
    };
    let (a, _) = train(&data, toy_config(permuted, 30)).unwrap();
    let (b, _) = train(&data, toy_config(prior, 30)).unwrap();
    let la = factor_vae_loss(&images, &a, &permuted, 0).unwrap();
    let lb = factor_vae_prior_variant_loss(&images, &b, &prior, 0).unwrap();
    assert_ne!(la.total, lb.total);
    assert_ne!(la.tc_term, lb.tc_term);
}
