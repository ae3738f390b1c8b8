use factorvae::data::generate_mini_shapes;
use factorvae::metrics::{
    higgins_metric_on, majority_vote_classifier, metric_correlations, new_metric_on, HigginsConfig, MetricMethod,
    NewMetricConfig, RepresentationTable,
};
use factorvae::rng::SeedStream;
use factorvae::Error;

fn noisy_oracle(noise: f64) -> RepresentationTable {
    let data = generate_mini_shapes();
    let mut s = SeedStream::new(8);
    let means = (0..data.len())
        .flat_map(|i| {
            let f: Vec<f64> = data.factors_of(i).iter().map(|&v| v as f64).collect();
            f.into_iter().map(|v| v + noise * s.normal()).collect::<Vec<_>>()
        })
        .collect();
    RepresentationTable::new(4, means, None).unwrap()
}

#[test]
fn oracle_representation_scores_one_on_both_metrics() {
    let data = generate_mini_shapes();
    let table = noisy_oracle(1e-6);
    let new = new_metric_on(&table, &data, &NewMetricConfig::default(), 0).unwrap();
    assert_eq!(new.score, 1.0);
    assert_eq!(new.method, MetricMethod::MajorityVote);
    assert_eq!(new.votes.unwrap().total(), 800);
    let old = higgins_metric_on(&table, &data, &HigginsConfig::default(), 0).unwrap();
    assert_eq!(old.score, 1.0);
}

#[test]
fn factor_free_representation_scores_chance() {
    let data = generate_mini_shapes();
    let mut s = SeedStream::new(2);
    let table = RepresentationTable::new(3, s.normals(3 * data.len()), None).unwrap();
    let cfg = NewMetricConfig::default();
    let r = new_metric_on(&table, &data, &cfg, 5).unwrap();
    let k = 4.0;
    let sigma = (1.0 / k * (1.0 - 1.0 / k) / cfg.votes as f64).sqrt();
    // Majority voting over few dimensions can only push the score up.
    assert!(r.score >= 1.0 / k - 3.0 * sigma && r.score <= 1.0 / k + 3.0 * sigma + 0.25, "{}", r.score);
}

#[test]
fn untrained_classifier_scores_chance() {
    let data = generate_mini_shapes();
    let cfg = HigginsConfig {
        train_iters: 0,
        ..HigginsConfig::default()
    };
    let r = higgins_metric_on(&noisy_oracle(0.0), &data, &cfg, 1).unwrap();
    let sigma = (0.25 * 0.75 / cfg.eval_points as f64).sqrt();
    assert!((r.score - 0.25).abs() < 3.0 * sigma, "{}", r.score);
}

#[test]
fn collapsed_representation_is_degenerate() {
    let data = generate_mini_shapes();
    let table = RepresentationTable::new(2, vec![0.5; 2 * data.len()], None).unwrap();
    let r = new_metric_on(&table, &data, &NewMetricConfig::default(), 0).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.pruned_dims, [0, 1]);
    assert_eq!(r.score, 0.25);
}

#[test]
fn metric_runs_are_reproducible() {
    let data = generate_mini_shapes();
    let table = noisy_oracle(0.7);
    let cfg = NewMetricConfig::default();
    let a = new_metric_on(&table, &data, &cfg, 4).unwrap();
    let b = new_metric_on(&table, &data, &cfg, 4).unwrap();
    assert_eq!(a.votes, b.votes);
    assert_eq!(a.score, b.score);
}

#[test]
fn majority_vote_hand_counts() {
    let (c, acc) = majority_vote_classifier(&[(1, 2), (1, 2), (1, 3)], 2, 4).unwrap();
    assert_eq!(c[1], 2);
    assert!((acc - 2.0 / 3.0).abs() < 1e-12);
    let diagonal: Vec<_> = (0..4).map(|j| (j, j)).collect();
    assert_eq!(majority_vote_classifier(&diagonal, 4, 4).unwrap().1, 1.0);
    let (c, _) = majority_vote_classifier(&[(0, 3), (0, 1)], 1, 4).unwrap();
    assert_eq!(c[0], 1);
}

#[test]
fn correlation_edge_cases() {
    let same: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, i as f64)).collect();
    let c = metric_correlations(&same).unwrap();
    assert_eq!((c.pearson, c.kendall, c.spearman), (1.0, 1.0, 1.0));
    let reversed: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, (10 - i * i) as f64)).collect();
    assert_eq!(metric_correlations(&reversed).unwrap().spearman, -1.0);
    let flat = [(1.0, 2.0), (2.0, 2.0), (3.0, 2.0)];
    assert!(matches!(metric_correlations(&flat), Err(Error::UndefinedCorrelation(_))));
}
