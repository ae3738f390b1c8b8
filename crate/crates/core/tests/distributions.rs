use factorvae::distributions::{
    kl_decomposition_terms, kl_to_standard_normal, log_normal, log_standard_normal, log_sum_exp,
    mutual_info_index_form, GaussianPosterior, LatentBatch, SourceTag,
};
use factorvae::metrics::{gini_variance, Distance};
use factorvae::objectives::discriminator_loss;
use factorvae::rng::SeedStream;
use factorvae::tc::{permute_dims, tc_batch_density_estimate};
use proptest::prelude::*;

/// Brute-force `KL(q(z) || p(z))` for 1-d posteriors, by plain Monte Carlo
/// over the mixture with its own sampler.
fn brute_force_marginal_kl(ps: &[(f64, f64)], samples: usize, seed: u64) -> (f64, f64) {
    let mut s = SeedStream::new(seed);
    let n = ps.len() as f64;
    let vals: Vec<f64> = (0..samples)
        .map(|_| {
            let (m, lv) = ps[s.below(ps.len())];
            let z = m + (0.5 * lv).exp() * s.normal();
            let log_q = log_sum_exp(&ps.iter().map(|&(m, lv)| log_normal(z, m, lv)).collect::<Vec<_>>()) - n.ln();
            log_q - log_standard_normal(z)
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / samples as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    (mean, (var / samples as f64).sqrt())
}

#[test]
fn decomposition_matches_an_independent_oracle() {
    let ps = [(-1.0, -0.5), (0.3, 0.2), (1.2, -1.0), (2.0, 0.0)];
    let posts: Vec<_> = ps.iter().map(|&(m, lv)| GaussianPosterior::new(vec![m], vec![lv]).unwrap()).collect();
    let k = kl_decomposition_terms(&posts, 100_000, 1).unwrap();
    assert!((k.avg_kl - (k.mutual_info + k.marginal_kl)).abs() < 3.0 * k.sum_se);
    // The marginal KL alone, estimated with a different sampler and seed.
    let (mk, se) = brute_force_marginal_kl(&ps, 100_000, 99);
    assert!((k.marginal_kl - mk).abs() < 3.0 * (se * se + k.marginal_kl_se * k.marginal_kl_se).sqrt());
    let (mi, mi_se) = mutual_info_index_form(&posts, 100_000, 1).unwrap();
    assert!((mi - k.mutual_info).abs() < 3.0 * mi_se.max(k.mutual_info_se));
}

#[test]
fn identical_posteriors_off_the_prior() {
    let p = GaussianPosterior::new(vec![0.7, -0.4], vec![-0.3, 0.5]).unwrap();
    let k = kl_decomposition_terms(&vec![p.clone(); 5], 1000, 2).unwrap();
    assert!(k.mutual_info.abs() < 1e-12);
    assert!((k.avg_kl - kl_to_standard_normal(&p)).abs() < 1e-12);
}

#[test]
fn tight_posteriors_give_negative_batch_estimates() {
    // Codes from held-out posteriors sit far from every component of the
    // batch mixture jointly, but not per coordinate.
    let mut s = SeedStream::new(3);
    let mut batch = || -> Vec<GaussianPosterior> {
        (0..64).map(|_| GaussianPosterior::new(s.normals(10), vec![-10.0; 10]).unwrap()).collect()
    };
    let ps = batch();
    let held_out = batch();
    let codes: Vec<f64> = held_out.iter().flat_map(|p| p.mean.clone()).collect();
    assert!(tc_batch_density_estimate(&ps, &codes).unwrap() < 0.0);
    // On the batch's own means the estimate is positive.
    let own: Vec<f64> = ps.iter().flat_map(|p| p.mean.clone()).collect();
    assert!(tc_batch_density_estimate(&ps, &own).unwrap() > 0.0);
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #[test]
    fn kl_is_non_negative(mean in prop::collection::vec(-5.0f64..5.0, 1..6), lv in -4.0f64..4.0) {
        let d = mean.len();
        let p = GaussianPosterior::new(mean, vec![lv; d]).unwrap();
        prop_assert!(kl_to_standard_normal(&p) >= 0.0);
        let total: f64 = p.kl_per_dim().iter().sum();
        prop_assert!((total - kl_to_standard_normal(&p)).abs() < 1e-9);
    }

    #[test]
    fn permute_dims_preserves_every_column(b in 1usize..20, d in 1usize..5, seed in any::<u64>()) {
        let values = SeedStream::new(seed ^ 1).normals(b * d);
        let batch = LatentBatch::new(values, b, d, SourceTag::PosteriorSample).unwrap();
        let out = permute_dims(&batch, seed);
        prop_assert_eq!(out.source, SourceTag::Permuted);
        for j in 0..d {
            let col = |x: &LatentBatch| sorted((0..b).map(|i| x.row(i)[j]).collect());
            prop_assert_eq!(col(&batch), col(&out));
        }
    }

    #[test]
    fn squared_gini_is_sample_variance(xs in prop::collection::vec(-100.0f64..100.0, 2..50)) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let g = gini_variance(&xs, Distance::Squared).unwrap();
        prop_assert!((g - var).abs() <= 1e-9 * var.max(1.0));
    }

    #[test]
    fn discriminator_loss_is_non_negative(l in prop::collection::vec(-30.0f64..30.0, 4)) {
        let v = discriminator_loss(&l[..2], &l[2..]).unwrap();
        prop_assert!(v >= 0.0 && v.is_finite());
    }
}
