use punn::data::{Partition, RawDataset, SplitDataset};
use punn::evolution::{
    evolve_generation, init_population, parametric_mutation, perturb_coefficients, perturb_exponents, run_ea,
    structural_mutation, update_variance_one_fifth, EAParams, Variances,
};
use punn::network::{HiddenNode, Individual, OutputLayout, OutputNode, PUNetwork};
use punn::rng;
use rand::seq::index;
use rand_distr::{Distribution, Normal};

fn small_params() -> EAParams {
    EAParams {
        population_size: 40,
        max_generations: 12,
        max_hidden: 3,
        ..EAParams::default()
    }
}

/// Two inputs on a grid, class 1 iff x0 > x1.
fn diagonal_dataset() -> SplitDataset {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            if i == j {
                continue;
            }
            features.push(vec![i as f64, j as f64 + 0.5]);
            labels.push(usize::from(i as f64 > j as f64 + 0.5));
        }
    }
    let raw = RawDataset {
        name: "diagonal".into(),
        feature_names: vec!["a".into(), "b".into()],
        class_labels: vec!["lo".into(), "hi".into()],
        features,
        labels,
    };
    SplitDataset::from_raw(&raw, 0.75, 5).unwrap()
}

/// A network that confidently predicts class 0 for every pattern.
fn stubborn_network(bias: f64) -> PUNetwork {
    PUNetwork::new(
        2,
        2,
        OutputLayout::ReferenceClass,
        vec![HiddenNode { inputs: vec![(0, 1.0)] }],
        vec![OutputNode {
            bias,
            hidden: vec![(0, 0.5)],
        }],
    )
    .unwrap()
}

fn all_class(part_len: usize, class: usize) -> Partition {
    Partition::new(2, 2, vec![vec![1.5, 1.5]; part_len], vec![class; part_len]).unwrap()
}

fn comparable(
    r: &punn::evolution::RunResult,
) -> (Individual, f64, f64, usize, String, punn::evolution::EvolutionTrace) {
    (
        r.best.clone(),
        r.train_ccr,
        r.test_ccr,
        r.connections,
        r.topology.clone(),
        r.trace.clone(),
    )
}

#[test]
fn same_seed_same_run() {
    let data = diagonal_dataset();
    let params = small_params();
    let a = run_ea(&params, &data, 11).unwrap();
    let b = run_ea(&params, &data, 11).unwrap();
    assert_eq!(comparable(&a), comparable(&b));
    let c = run_ea(&params, &data, 12).unwrap();
    assert_ne!(a.best, c.best);
}

#[test]
fn thread_count_does_not_change_result() {
    let data = diagonal_dataset();
    let params = small_params();
    let on = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ea(&params, &data, 99).unwrap())
    };
    assert_eq!(comparable(&on(1)), comparable(&on(3)));
}

#[test]
fn run_invariants_hold_every_generation() {
    let data = diagonal_dataset();
    let params = small_params();
    let mut population = init_population(&params, 2, 2, &data.train, 3).unwrap();
    let mut best = population.iter().map(Individual::fitness).fold(f64::MIN, f64::max);
    let v = Variances {
        alpha1: params.alpha1_init,
        alpha2: params.alpha2_init,
    };
    for g in 1..=15 {
        let tally = evolve_generation(&mut population, v, &params, &data.train, 3, g).unwrap();
        assert_eq!(population.len(), params.population_size);
        assert_eq!(tally.attempts, params.elite_count());
        for ind in &population {
            ind.network().validate(Some(params.max_hidden)).unwrap();
            assert!(ind.fitness() > 0.0 && ind.fitness() <= 1.0);
            assert!((ind.temperature() - (1.0 - ind.fitness())).abs() < 1e-15);
        }
        let now = population.iter().map(Individual::fitness).fold(f64::MIN, f64::max);
        assert!(now >= best, "generation {g}: best fell from {best} to {now}");
        best = now;
    }
    let run = run_ea(&params, &data, 3).unwrap();
    assert_eq!(run.trace.records.len(), params.max_generations + 1);
    assert!(run.trace.is_elitist());
    assert!(run.train_ccr >= 0.0 && run.train_ccr <= 100.0);
}

#[test]
fn learns_the_diagonal() {
    let data = diagonal_dataset();
    let params = EAParams {
        population_size: 200,
        max_generations: 40,
        ..small_params()
    };
    let run = run_ea(&params, &data, 1).unwrap();
    assert!(run.train_ccr > 85.0, "train ccr {}", run.train_ccr);
    assert!(run.trace.records.last().unwrap().best_fitness > run.trace.records[0].best_fitness);
}

#[test]
fn zero_generations_returns_best_initial_individual() {
    let data = diagonal_dataset();
    let params = EAParams {
        max_generations: 0,
        ..small_params()
    };
    let run = run_ea(&params, &data, 8).unwrap();
    let initial = init_population(&params, 2, 2, &data.train, 8).unwrap();
    let top = initial.iter().map(Individual::fitness).fold(f64::MIN, f64::max);
    assert_eq!(run.best.fitness(), top);
    assert_eq!(run.trace.records.len(), 1);
}

#[test]
fn hot_individuals_fire_every_operator() {
    // error near 100, so T is about 0.99
    let train = all_class(4, 1);
    let ind = Individual::evaluate(stubborn_network(100.0), &train).unwrap();
    assert!(ind.temperature() > 0.98);
    let params = small_params();
    let trials = 2000;
    let mut counts = [0usize; 4];
    for s in 0..trials {
        let out = structural_mutation(&ind, &params, &train, &mut rng::seeded(s)).unwrap();
        for k in 0..4 {
            counts[k] += usize::from(out.fired[k]);
        }
        out.individual.network().validate(Some(params.max_hidden)).unwrap();
    }
    for (k, c) in counts.iter().enumerate() {
        let share = *c as f64 / trials as f64;
        // binomial(2000, 0.99) sits well above 0.97
        assert!(share > 0.97, "operator {k} fired {share}");
    }
}

#[test]
fn cold_individuals_pick_exactly_one_operator_uniformly() {
    let train = all_class(4, 0);
    let ind = Individual::evaluate(stubborn_network(100.0), &train).unwrap();
    assert_eq!(ind.temperature(), 0.0);
    let params = small_params();
    let trials = 4000u64;
    let mut counts = [0usize; 4];
    for s in 0..trials {
        let out = structural_mutation(&ind, &params, &train, &mut rng::seeded(s)).unwrap();
        assert_eq!(out.fired.iter().filter(|&&f| f).count(), 1);
        for k in 0..4 {
            counts[k] += usize::from(out.fired[k]);
        }
    }
    for c in counts {
        // mean 1000, sd about 27
        assert!((880..=1120).contains(&c), "{counts:?}");
    }
}

#[test]
fn exponent_noise_is_the_seeded_gaussian_stream() {
    let net = PUNetwork::new(
        3,
        2,
        OutputLayout::ReferenceClass,
        vec![
            HiddenNode {
                inputs: vec![(0, 1.0), (1, -2.0), (2, 0.5)],
            },
            HiddenNode { inputs: vec![(1, 3.0)] },
        ],
        vec![OutputNode {
            bias: 0.1,
            hidden: vec![(0, 1.0), (1, 1.0)],
        }],
    )
    .unwrap();
    let sd = 0.7;
    let mutated = perturb_exponents(&net, 1.0, sd, &mut rng::stream(42, &[9]));

    let mut r = rng::stream(42, &[9]);
    let _ = index::sample(&mut r, 4, 4);
    let normal = Normal::new(0.0, sd).unwrap();
    let expected: Vec<f64> = [1.0, -2.0, 0.5, 3.0]
        .iter()
        .map(|w| w + normal.sample(&mut r))
        .collect();
    let got: Vec<f64> = mutated
        .hidden()
        .iter()
        .flat_map(|h| h.inputs.iter().map(|&(_, w)| w))
        .collect();
    assert_eq!(got, expected);
}

#[test]
fn perturbation_moments_match_sigma() {
    let net = stubborn_network(0.0);
    let sd = 1.3;
    let n = 20_000;
    let deltas: Vec<f64> = (0..n)
        .map(|s| perturb_coefficients(&net, 1.0, sd, &mut rng::seeded(s)).outputs()[0].bias)
        .collect();
    let mean = deltas.iter().sum::<f64>() / n as f64;
    let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    // standard error of the mean is about 0.009
    assert!(mean.abs() < 0.04, "mean {mean}");
    assert!((var.sqrt() - sd).abs() < 0.04, "sd {}", var.sqrt());
}

#[test]
fn perturbation_touches_the_requested_share() {
    let hidden = (0..10)
        .map(|_| HiddenNode {
            inputs: (0..10).map(|i| (i, 1.0)).collect(),
        })
        .collect();
    let net = PUNetwork::new(
        10,
        2,
        OutputLayout::ReferenceClass,
        hidden,
        vec![OutputNode {
            bias: 0.0,
            hidden: (0..10).map(|m| (m, 1.0)).collect(),
        }],
    )
    .unwrap();
    let mutated = perturb_exponents(&net, 0.3, 1.0, &mut rng::seeded(1));
    let changed = mutated
        .hidden()
        .iter()
        .flat_map(|h| h.inputs.iter())
        .filter(|&&(_, w)| w != 1.0)
        .count();
    assert_eq!(changed, 30);
    assert_eq!(perturb_exponents(&net, 0.3, 0.0, &mut rng::seeded(1)), net);
}

#[test]
fn parametric_mutation_never_worsens() {
    let data = diagonal_dataset();
    let params = small_params();
    let population = init_population(&params, 2, 2, &data.train, 21).unwrap();
    for (s, ind) in population.iter().enumerate() {
        let out = parametric_mutation(ind, 0.5, 1.0, &params, &data.train, &mut rng::seeded(s as u64)).unwrap();
        assert!(out.individual.fitness() >= ind.fitness());
        if out.success() {
            assert!(out.individual.fitness() > ind.fitness());
        }
    }
}

#[test]
fn zero_temperature_leaves_parameters_alone() {
    let train = all_class(3, 0);
    let ind = Individual::evaluate(stubborn_network(100.0), &train).unwrap();
    let params = small_params();
    let out = parametric_mutation(&ind, 0.5, 1.0, &params, &train, &mut rng::seeded(0)).unwrap();
    assert_eq!(out.individual.network(), ind.network());
    assert!(!out.success());
}

#[test]
fn one_fifth_rule_steps() {
    let c = 0.85;
    assert!((update_variance_one_fifth(0.3, 1.0, c) - 1.0 / 0.85).abs() < 1e-15);
    assert!((update_variance_one_fifth(0.1, 1.0, c) - 0.85).abs() < 1e-15);
    assert_eq!(update_variance_one_fifth(0.2, 1.0, c), 1.0);
}
