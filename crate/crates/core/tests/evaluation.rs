use factorvae::data::generate_mini_shapes;
use factorvae::distributions::LatentBatch;
use factorvae::evaluation::{
    histogram_codes, iwae_bound, marginal_histograms, reconstruction_error, sample_prior, traversal_grid,
    LinearGaussianToy, HISTOGRAM_RANGE,
};
use factorvae::models::{ArchitectureSpec, ModelBundle};
use factorvae::nn::Layer;
use factorvae::objectives::discriminator_step;
use factorvae::rng::SeedStream;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

#[test]
fn prior_codes_pass_a_chi_square_test() {
    let bins = 20;
    let n = 20_000;
    let codes = LatentBatch::from_prior(n, 3, &mut SeedStream::new(12));
    let h = histogram_codes(&codes, bins).unwrap();
    let normal = Normal::new(0.0, 1.0).unwrap();
    // Edge bins absorb the tails.
    let prob = |b: usize| {
        let lo = if b == 0 { f64::NEG_INFINITY } else { h.edges[b] };
        let hi = if b == bins - 1 { f64::INFINITY } else { h.edges[b + 1] };
        normal.cdf(hi) - normal.cdf(lo)
    };
    let limit = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
    for counts in &h.counts {
        assert_eq!(counts.iter().sum::<u64>(), n as u64);
        let stat: f64 = (0..bins)
            .map(|b| {
                let e = n as f64 * prob(b);
                (counts[b] as f64 - e).powi(2) / e
            })
            .sum();
        assert!(stat < limit, "chi-square {stat} over {limit}");
    }
    assert_eq!(h.edges.first(), Some(&HISTOGRAM_RANGE.0));
    assert_eq!(h.edges.last(), Some(&HISTOGRAM_RANGE.1));
}

#[test]
fn histograms_of_a_bundle_count_every_point() {
    let data = generate_mini_shapes();
    let bundle = ModelBundle::<f32>::new(ArchitectureSpec::desk(10), 0).unwrap();
    let h = marginal_histograms(&bundle, &data, 16, 100, 0).unwrap();
    assert_eq!(h.samples, 100);
    assert!(h.counts.iter().all(|c| c.iter().sum::<u64>() == 100));
}

#[test]
fn iwae_tightens_with_particles_on_average() {
    let toy = LinearGaussianToy::standard();
    let mut s = SeedStream::new(1);
    let x = toy.sample(&mut s);
    let exact = toy.log_marginal(&x).unwrap();
    let seeds = 1000;
    // Mean and standard error over independent seeds.
    let stats = |k: usize| {
        let v: Vec<f64> = (0..seeds).map(|seed| toy.iwae_bound(&x, k, seed).unwrap()).collect();
        let m = v.iter().sum::<f64>() / seeds as f64;
        let var = v.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (seeds - 1) as f64;
        (m, (var / seeds as f64).sqrt())
    };
    let bounds: Vec<(f64, f64)> = [1, 4, 16, 64].iter().map(|&k| stats(k)).collect();
    for w in bounds.windows(2) {
        let se = (w[0].1.powi(2) + w[1].1.powi(2)).sqrt();
        assert!(w[1].0 > w[0].0 - 3.0 * se, "{bounds:?}");
    }
    let (first, last) = (bounds[0], bounds[bounds.len() - 1]);
    assert!(last.0 - first.0 > 3.0 * (first.1.powi(2) + last.1.powi(2)).sqrt(), "{bounds:?}");
    assert!(last.0 < exact + 3.0 * last.1, "{bounds:?} {exact}");
}

#[test]
fn single_particle_bound_is_the_elbo_in_expectation() {
    let toy = LinearGaussianToy::standard();
    let x = toy.sample(&mut SeedStream::new(2));
    let q = toy.proposal(&x).unwrap();
    // Closed-form ELBO by a large independent Monte Carlo average.
    let mut s = SeedStream::new(77);
    let n = 200_000;
    let elbo = (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..toy.latent_dim)
                .map(|j| q.mean[j] + (0.5 * q.log_variance[j]).exp() * s.normal())
                .collect();
            toy.log_joint(&x, &z) - q.log_density(&z)
        })
        .sum::<f64>()
        / n as f64;
    let single = (0..2000).map(|seed| toy.iwae_bound(&x, 1, seed).unwrap()).sum::<f64>() / 2000.0;
    assert!((single - elbo).abs() < 0.05, "{single} vs {elbo}");
}

#[test]
fn bundle_iwae_is_finite_and_bounded_by_zero() {
    let data = generate_mini_shapes();
    let bundle = ModelBundle::<f32>::new(ArchitectureSpec::desk(10), 1).unwrap();
    let v = iwae_bound(&bundle, &data.batch(&[0, 300]), 8, 0).unwrap();
    assert!(v.is_finite() && v < 0.0);
    let r = reconstruction_error(&bundle, &data, 0).unwrap();
    assert!(r > 0.0 && r.is_finite());
}

#[test]
fn traversal_centre_reproduces_the_reconstruction() {
    let data = generate_mini_shapes();
    let bundle = ModelBundle::<f32>::new(ArchitectureSpec::desk(10), 2).unwrap();
    let refs = data.batch(&[10, 20]);
    let grid = traversal_grid(&bundle, &refs, (-2.0, 2.0), 5).unwrap();
    assert_eq!(grid.rows.len(), 2 + 10);
    assert!(grid.rows[2..].iter().all(|r| r.len() == 5));
    let mean = bundle.encode_batch(&refs, None).unwrap().mean;
    let j = grid.dim_order[0];
    let m = mean[j] as f64;
    let centred = traversal_grid(&bundle, &refs, (m - 1.0, m + 1.0), 3).unwrap();
    assert_eq!(centred.rows[2][1], centred.rows[1][0]);
}

#[test]
fn prior_samples_are_probabilities() {
    let bundle = ModelBundle::<f32>::new(ArchitectureSpec::desk(10), 3).unwrap();
    let s = sample_prior(&bundle, 4, 0).unwrap();
    assert_eq!(s.len(), 4);
    assert!(s.iter().flatten().all(|&p| (0.0..=1.0).contains(&p)));
}

#[test]
fn sign_reading_discriminator_is_perfect() {
    let mut bundle = ModelBundle::<f32>::new(ArchitectureSpec::toy(), 0).unwrap().cast::<f64>();
    // Every layer passes z_0 forward on unit 0; leaky ReLU keeps its sign.
    let last = bundle.discriminator.layers.iter().rposition(|l| matches!(l, Layer::Linear(_))).unwrap();
    for (i, layer) in bundle.discriminator.layers.iter_mut().enumerate() {
        if let Layer::Linear(l) = layer {
            l.weight.fill(0.0);
            l.bias.fill(0.0);
            l.weight[0] = 1.0;
            if i == last {
                l.weight[l.in_features] = -1.0;
            }
        }
    }
    let mut s = SeedStream::new(4);
    let real: Vec<f64> = (0..8).flat_map(|_| [0.1 + s.uniform(), s.normal()]).collect();
    let fake: Vec<f64> = (0..8).flat_map(|_| [-0.1 - s.uniform(), s.normal()]).collect();
    assert_eq!(discriminator_step(&bundle, &real, &fake, false).unwrap().accuracy, 1.0);
    // A zeroed discriminator ties everywhere: real rows right, fake rows wrong.
    for layer in bundle.discriminator.layers.iter_mut() {
        if let Layer::Linear(l) = layer {
            l.weight.fill(0.0);
        }
    }
    assert_eq!(discriminator_step(&bundle, &real, &fake, false).unwrap().accuracy, 0.5);
}
