use proptest::prelude::*;
use punn::rng;
use punn::stats::{compare_configs, ks_normality, levene, t_test, RunSet};
use rand_distr::{Distribution, Normal as Gaussian};
use statrs::distribution::{ContinuousCDF, Normal};

/// Evenly spaced normal quantiles: a noise-free sample with the requested
/// mean and spread.
fn quantile_sample(n: usize, mean: f64, sd: f64, round: bool) -> Vec<f64> {
    let z = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|i| {
            let v = mean + sd * z.inverse_cdf((i as f64 + 0.5) / n as f64);
            if round {
                v.round()
            } else {
                v
            }
        })
        .collect()
}

fn seeded_sample(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    let g = Gaussian::new(mean, sd).unwrap();
    (0..n).map(|_| g.sample(&mut r)).collect()
}

fn run_set(label: &str, ccr: Vec<f64>, connections: Vec<f64>) -> RunSet {
    RunSet {
        dataset: "synthetic".into(),
        label: label.into(),
        ccr,
        connections,
    }
}

#[test]
fn identical_sets_show_nothing() {
    let a = run_set(
        "1",
        quantile_sample(30, 95.0, 1.2, false),
        quantile_sample(30, 20.0, 3.0, true),
    );
    let report = compare_configs(&a, &a.clone()).unwrap();
    assert!(report.no_significant_differences());
    for m in report.metrics() {
        assert_eq!(m.t.statistic, 0.0);
        assert!((m.t.p_value - 1.0).abs() < 1e-12);
        let lev = m.levene.as_ref().unwrap();
        assert_eq!(lev.statistic, 0.0);
        assert!((lev.p_value - 1.0).abs() < 1e-12);
    }
    assert!(report.narrative().contains("no significant differences"));
}

#[test]
fn mean_shift_without_spread_change() {
    // same spread, CCR unchanged, connections shifted by two sds
    let base = run_set(
        "1",
        quantile_sample(30, 95.3, 1.4, false),
        quantile_sample(30, 18.0, 2.0, true),
    );
    let best = run_set(
        "4",
        quantile_sample(30, 95.5, 1.2, false),
        quantile_sample(30, 22.0, 2.0, true),
    );
    let r = compare_configs(&base, &best).unwrap();
    assert!(!r.ccr.variances_differ() && !r.ccr.means_differ());
    assert!(!r.connections.variances_differ() && r.connections.means_differ());
    assert!(r.connections.t.p_value < 0.001);
}

#[test]
fn spread_and_mean_both_change() {
    let base = run_set(
        "1",
        quantile_sample(30, 98.2, 0.9, false),
        quantile_sample(30, 12.0, 2.0, true),
    );
    let best = run_set(
        "2",
        quantile_sample(30, 98.9, 0.3, false),
        quantile_sample(30, 16.0, 2.0, true),
    );
    let r = compare_configs(&base, &best).unwrap();
    assert!(r.ccr.variances_differ() && r.ccr.means_differ());
    assert!(!r.ccr.equal_variances, "Welch path expected");
    assert!(r.ccr.t.df.unwrap() < 58.0);
    assert!(r.connections.means_differ());
    assert!(r.narrative().contains("the best configuration has the higher mean CCR"));
}

#[test]
fn k_s_accepts_normal_draws_mostly() {
    let accepted = (0..20)
        .filter(|&s| !ks_normality(&seeded_sample(1000, 0.0, 1.0, s)).unwrap().significant_05)
        .count();
    assert!(accepted >= 15, "{accepted}/20");
}

#[test]
fn k_s_rejects_a_skewed_sample() {
    let skewed: Vec<f64> = seeded_sample(500, 0.0, 1.0, 4).iter().map(|v| v.exp()).collect();
    assert!(ks_normality(&skewed).unwrap().significant_01);
    assert!(ks_normality(&[1.0, 2.0, 3.0, 4.0]).is_err());
    assert!(ks_normality(&[2.0; 10]).is_err());
}

#[test]
fn levene_sees_tenfold_spread() {
    let a = seeded_sample(30, 0.0, 1.0, 1);
    let b = seeded_sample(30, 0.0, 10.0, 2);
    assert!(levene(&a, &b).unwrap().p_value < 0.05);
}

#[test]
fn t_test_sees_five_sd_shift() {
    let a = seeded_sample(30, 0.0, 1.0, 5);
    let b = seeded_sample(30, 5.0, 1.0, 6);
    assert!(t_test(&a, &b, true).unwrap().p_value < 0.001);
    assert!(t_test(&a, &b, false).unwrap().p_value < 0.001);
}

#[test]
fn mismatched_datasets_are_refused() {
    let a = run_set("1", vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]);
    let mut b = a.clone();
    b.dataset = "other".into();
    assert!(compare_configs(&a, &b).is_err());
}

fn group() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, 3..25)
        .prop_filter("needs spread", |v| v.iter().any(|&x| (x - v[0]).abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tests_are_symmetric_and_p_is_a_probability(a in group(), b in group()) {
        for equal in [true, false] {
            let ab = t_test(&a, &b, equal).unwrap();
            let ba = t_test(&b, &a, equal).unwrap();
            prop_assert!((ab.statistic + ba.statistic).abs() <= 1e-9 * (1.0 + ab.statistic.abs()));
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }
        if let Ok(l) = levene(&a, &b) {
            let r = levene(&b, &a).unwrap();
            prop_assert!((l.statistic - r.statistic).abs() <= 1e-9 * (1.0 + l.statistic));
            prop_assert!((0.0..=1.0).contains(&l.p_value));
        }
        if a.len() >= 5 {
            let k = ks_normality(&a).unwrap();
            prop_assert!((0.0..=1.0).contains(&k.p_value));
            prop_assert!(k.statistic > 0.0 && k.statistic < 1.0);
        }
    }
}
