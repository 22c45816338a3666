//! Prior behaviour seen through the sampler and the projections.

use l1ball::models::{
    mixture_weights_from_ball, structured_base_covariance, FusedModel, GridData, InverseGamma, PriorOnlyModel, RadiusModel,
};
use l1ball::priors::{cardinality_pmf, simulate_cardinality, BaseDistribution, RadiusDraw, RadiusPrior};
use l1ball::projection::project_l1_ball;
use l1ball::sampler::{run_chains, Model, NutsConfig};
use l1ball::Execution;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn prior_only_chains_reproduce_the_cardinality_pmf() {
    let (p, lambda, r) = (6, 1.0, 2.0);
    let model = PriorOnlyModel::new(BaseDistribution::iid_de(p, lambda).unwrap(), RadiusModel::Fixed(r)).unwrap();
    let config = NutsConfig { n_warmup: 500, n_samples: 5000, seed: 3, ..NutsConfig::default() };
    let chains = run_chains(&model, &config, 2, Execution::Parallel).unwrap();
    let mut counts = vec![0usize; p + 1];
    for record in chains.iter().flat_map(|c| &c.records) {
        counts[record.theta.iter().filter(|t| **t != 0.0).count()] += 1;
    }
    let n: usize = counts.iter().sum();
    let tv: f64 = (1..=p).map(|j| (counts[j] as f64 / n as f64 - cardinality_pmf(j, p, r, lambda).unwrap()).abs()).sum::<f64>() / 2.0;
    // autocorrelated draws; the empirical pmf of 10000 independent draws would sit near 0.01
    assert!(tv < 0.05, "total variation {tv:.4}, counts {counts:?}");
}

#[test]
fn simulation_is_identical_in_both_execution_modes() {
    let base = BaseDistribution::iid_de(10, 0.5).unwrap();
    let radius = RadiusDraw::Prior(RadiusPrior::Exponential { alpha: 2.0 });
    let a = simulate_cardinality(&base, &radius, 20_000, 11, Execution::Sequential).unwrap();
    let b = simulate_cardinality(&base, &radius, 20_000, 11, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn chains_are_identical_in_both_execution_modes() {
    let model = PriorOnlyModel::new(BaseDistribution::iid_de(4, 1.0).unwrap(), RadiusModel::Fixed(1.0)).unwrap();
    let config = NutsConfig { n_warmup: 100, n_samples: 100, seed: 5, ..NutsConfig::default() };
    let a = run_chains(&model, &config, 3, Execution::Sequential).unwrap();
    let b = run_chains(&model, &config, 3, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mixture_weights_put_mass_on_every_component_count() {
    let k1 = 6;
    let base = BaseDistribution::iid_de(k1, 1.0).unwrap();
    let radius = RadiusPrior::Exponential { alpha: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counts = vec![0usize; k1 + 1];
    for _ in 0..20_000 {
        let beta = base.sample(&mut rng);
        let w = mixture_weights_from_ball(&beta, radius.sample(&mut rng)).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        counts[w.iter().filter(|x| **x > 0.0).count()] += 1;
    }
    assert_eq!(counts[0], 0);
    assert!(counts[1..].iter().all(|&c| c > 0), "{counts:?}");
}

#[test]
fn fused_draws_have_literally_equal_neighbours() {
    let pixels = DMatrix::from_fn(3, 3, |_, j| if j < 1 { 0.0 } else { 1.0 });
    let base = BaseDistribution::iid_de(9, 1.0).unwrap();
    let model = FusedModel::new(GridData::new(pixels).unwrap(), base, RadiusModel::Fixed(0.5), 10.0, InverseGamma::default()).unwrap();
    let edges = model.data().edges();
    let mut target = model.make_target().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut tied = 0;
    for _ in 0..50 {
        let mut q = model.initial_position(&mut rng);
        for v in &mut q[..9] {
            *v += rng.random_range(-1.0..1.0);
        }
        let draw = target.draw(&q).unwrap();
        tied += edges.iter().filter(|&&(a, b)| draw.theta[a] == draw.theta[b]).count();
        let changes = edges.iter().filter(|&&(a, b)| draw.theta[a] != draw.theta[b]).count();
        assert_eq!(draw.extras["cardinality"], changes as f64);
    }
    assert!(tied > 0);
}

#[test]
fn disconnected_pairs_are_jointly_zero_more_often() {
    // two communities of three; S marks shared membership
    let p = 6;
    let community = |i: usize| i / 3;
    let s = DMatrix::from_fn(p, p, |i, j| if community(i) == community(j) { 1.0 } else { 0.0 });
    let cov = structured_base_covariance(&s, 3.5).unwrap();
    let base = BaseDistribution::gaussian(vec![0.0; p], cov).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 40_000;
    let (mut within, mut across) = (0usize, 0usize);
    let (mut n_within, mut n_across) = (0usize, 0usize);
    for _ in 0..n {
        let theta = project_l1_ball(&base.sample(&mut rng), 1.5).unwrap().theta;
        for i in 0..p {
            for j in i + 1..p {
                let both = usize::from(theta[i] == 0.0 && theta[j] == 0.0);
                if community(i) == community(j) {
                    within += both;
                    n_within += 1;
                } else {
                    across += both;
                    n_across += 1;
                }
            }
        }
    }
    let (pw, pa) = (within as f64 / n_within as f64, across as f64 / n_across as f64);
    assert!(pa > pw + 0.01, "joint zero probability across {pa:.4}, within {pw:.4}");
}
