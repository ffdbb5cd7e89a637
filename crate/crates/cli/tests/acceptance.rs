//! End-to-end acceptance checks. Each criterion prints one line:
//! `PASS`, `FAIL` or `SKIP`, followed by the measured values. The test
//! fails if any criterion fails. Run with
//! `cargo test -p punn-cli --test acceptance -- --nocapture`; set
//! `ACCEPTANCE_ONLY=1,2` to run selected criteria.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use punn::cluster::{efficiency, speedup, truncate_decimals};
use punn::data::{load_csv, Partition, RawDataset, Schema, SplitDataset, DEFAULT_TRAIN_RATIO};
use punn::evolution::{run_ea, EAParams};
use punn::grid::{base_config_for, config_master_seed, expand_grid_2param, expand_grid_3param, ExperimentConfig};
use punn::network::{fitness, softmax, temperature, HiddenNode, OutputLayout, OutputNode, PUNetwork};
use punn::rng;
use punn::stats::{compare_configs, ks_normality, levene, t_test, RunSet, TestOutcome};
use rand::Rng as _;
use serde::Deserialize;
use statrs::distribution::{ContinuousCDF, Normal};

const SOFTMAX_TOL: f64 = 1e-12;
const LOSS_TOL: f64 = 1e-10;
const MATH_BUDGET: Duration = Duration::from_secs(60);
/// Minimum mean test CCR over ten runs, per dataset and grid column.
const CCR_FLOORS: [(&str, &str, f64); 3] = [("cancer", "2", 96.0), ("balance", "4", 91.0), ("pima", "2", 73.0)];
const CCR_RUNS: usize = 10;
const BENCH_RUNS: usize = 16;
const BENCH_NODES: [usize; 3] = [1, 2, 4];
const MIN_EFFICIENCY: f64 = 0.85;
const MIN_CORES_FOR_EFFICIENCY: usize = 4;
const ORACLE_TOL: f64 = 1e-6;
const MASTER_SEED: u64 = 1;
const SPLIT_SEED: u64 = 1;

enum Verdict {
    Pass(String),
    Skip(String),
}

type Check = std::result::Result<Verdict, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn load(name: &str) -> RawDataset {
    let dir = data_dir();
    let schema = Schema::load(dir.join(format!("{name}.toml"))).unwrap();
    load_csv(dir.join(format!("{name}.csv")), &schema).unwrap()
}

// ---------------------------------------------------------------- 1

fn random_links(r: &mut rng::Rng, n: usize, keep: f64) -> Vec<(usize, f64)> {
    let mut links = Vec::new();
    for i in 0..n {
        if r.random_bool(keep) {
            links.push((i, r.random_range(-5.0..5.0)));
        }
    }
    links
}

fn random_network(r: &mut rng::Rng) -> PUNetwork {
    let k = r.random_range(1..=6);
    let m = r.random_range(1..=5);
    let l = r.random_range(2..=4);
    let layout = if r.random_bool(0.5) {
        OutputLayout::ReferenceClass
    } else {
        OutputLayout::AllClasses
    };
    let hidden = (0..m)
        .map(|_| {
            let mut inputs = random_links(r, k, 0.6);
            if inputs.is_empty() {
                inputs.push((r.random_range(0..k), r.random_range(-5.0..5.0)));
            }
            HiddenNode { inputs }
        })
        .collect();
    let outputs = (0..layout.output_count(l))
        .map(|_| OutputNode {
            bias: r.random_range(-5.0..5.0),
            hidden: random_links(r, m, 0.7),
        })
        .collect();
    PUNetwork::new(k, l, layout, hidden, outputs).unwrap()
}

/// Outputs computed link by link with `powf`.
fn reference_outputs(net: &PUNetwork, x: &[f64]) -> Vec<f64> {
    let h: Vec<f64> = net
        .hidden()
        .iter()
        .map(|n| n.inputs.iter().map(|&(i, w)| x[i].powf(w)).product())
        .collect();
    let mut f = vec![0.0; net.n_classes()];
    for (j, o) in net.outputs().iter().enumerate() {
        f[j] = o.bias + o.hidden.iter().map(|&(m, b)| b * h[m]).sum::<f64>();
    }
    f
}

/// Cross-entropy of one pattern as `-ln` of its softmax probability.
fn probability_form(f: &[f64], c: usize) -> f64 {
    let denom: f64 = f.iter().map(|v| v.exp()).sum();
    -(f[c].exp() / denom).ln()
}

/// The same quantity as `ln sum_j e^{f_j} - f_c`.
fn log_sum_exp_form(f: &[f64], c: usize) -> f64 {
    punn::network::log_sum_exp(f) - f[c]
}

fn math_properties() -> Check {
    let start = Instant::now();
    let mut r = rng::seeded(11);
    let mut worst_softmax = 0.0f64;
    let mut worst_loss = 0.0f64;
    let mut worst_fast = 0.0f64;
    for _ in 0..10_000 {
        let n = r.random_range(1..=6);
        let f: Vec<f64> = (0..n).map(|_| r.random_range(-30.0..30.0)).collect();
        let g = softmax(&f);
        ensure(g.iter().all(|&v| (0.0..=1.0).contains(&v)), || {
            format!("softmax out of range: {g:?}")
        })?;
        worst_softmax = worst_softmax.max((g.iter().sum::<f64>() - 1.0).abs());
        let c = r.random_range(-500.0..500.0);
        let shifted = softmax(&f.iter().map(|v| v + c).collect::<Vec<_>>());
        for (a, b) in g.iter().zip(&shifted) {
            worst_softmax = worst_softmax.max((a - b).abs());
        }
    }
    ensure(worst_softmax <= SOFTMAX_TOL, || {
        format!("softmax deviation {worst_softmax:e}")
    })?;

    for _ in 0..2_000 {
        let net = random_network(&mut r);
        let n = r.random_range(1..=8);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..net.n_inputs()).map(|_| r.random_range(1.0..=2.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..net.n_classes())).collect();
        let mut reference = 0.0;
        for (x, &c) in rows.iter().zip(&labels) {
            let f = reference_outputs(&net, x);
            let (a, b) = (probability_form(&f, c), log_sum_exp_form(&f, c));
            if a.is_finite() {
                worst_loss = worst_loss.max((a - b).abs() / (1.0 + a.abs()));
            }
            reference += b;
        }
        reference /= n as f64;
        // the training path works from ln x; compare it with powf
        let part = Partition::new(net.n_inputs(), net.n_classes(), rows, labels).unwrap();
        let fast = net.evaluate(&part).unwrap().loss;
        worst_fast = worst_fast.max((fast - reference).abs() / (1.0 + reference.abs()));
    }
    ensure(worst_loss <= LOSS_TOL, || {
        format!("loss forms differ by {worst_loss:e}")
    })?;
    ensure(worst_fast <= LOSS_TOL, || {
        format!("log-domain pass differs by {worst_fast:e}")
    })?;

    for i in 0..1_000 {
        let l = i as f64 * 0.05;
        let a = fitness(l).unwrap();
        ensure(a > 0.0 && a <= 1.0 && (a - 1.0 / (1.0 + l)).abs() < 1e-15, || {
            format!("A({l}) = {a}")
        })?;
        ensure((a + temperature(a) - 1.0).abs() < 1e-15, || {
            format!("A + T != 1 at l = {l}")
        })?;
        ensure(fitness(l + 0.05).unwrap() < a, || {
            format!("A not decreasing at l = {l}")
        })?;
    }
    ensure(fitness(0.0).unwrap() == 1.0 && temperature(1.0) == 0.0, || {
        "A(0) = 1, T = 0 expected".into()
    })?;

    let data = SplitDataset::from_raw(&load("cancer"), DEFAULT_TRAIN_RATIO, SPLIT_SEED).unwrap();
    let params = EAParams {
        population_size: 60,
        max_generations: 30,
        max_hidden: 3,
        ..EAParams::default()
    };
    let mut traces = 0;
    for seed in 0..8 {
        let run = run_ea(&params, &data, seed).unwrap();
        ensure(run.trace.is_elitist(), || format!("seed {seed}: best fitness fell"))?;
        traces += 1;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < MATH_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(Verdict::Pass(format!(
        "softmax dev {worst_softmax:.1e} (tol {SOFTMAX_TOL:e}); loss forms dev {worst_loss:.1e}, \
         log-domain pass dev {worst_fast:.1e} (tol {LOSS_TOL:e}); {traces} elitist traces; {:.1}s",
        elapsed.as_secs_f64()
    )))
}

// ---------------------------------------------------------------- 2

fn grid_golden() -> Check {
    let balance = expand_grid_3param(&base_config_for("Balance").unwrap()).unwrap();
    let want3 = [
        (5, 150, 1.0),
        (6, 150, 1.0),
        (5, 150, 1.5),
        (6, 150, 1.5),
        (5, 120, 1.0),
        (6, 120, 1.0),
        (5, 120, 1.5),
        (6, 120, 1.5),
    ];
    for (c, &(neu, gen, a2)) in balance.iter().zip(&want3) {
        ensure(
            (c.neu(), c.gen(), c.alpha2().to_bits()) == (neu, gen, f64::to_bits(a2)),
            || format!("Balance {}: {} {} {}", c.index, c.neu(), c.gen(), c.alpha2()),
        )?;
    }
    let hypo = expand_grid_2param(&base_config_for("Hypothyroid").unwrap()).unwrap();
    let want2 = [
        (3, 500),
        (4, 500),
        (5, 500),
        (6, 500),
        (3, 400),
        (4, 400),
        (5, 400),
        (6, 400),
    ];
    for (c, &(neu, gen)) in hypo.iter().zip(&want2) {
        ensure((c.neu(), c.gen()) == (neu, gen), || {
            format!("Hypothyroid {}: {} {}", c.index, c.neu(), c.gen())
        })?;
    }
    ensure(balance.len() == 8 && hypo.len() == 8, || {
        "grids must have 8 columns".into()
    })?;
    Ok(Verdict::Pass(
        "Balance 3-parameter and Hypothyroid 2-parameter grids, 8/8 columns each".into(),
    ))
}

// ---------------------------------------------------------------- 3

fn column(dataset: &str, label: &str) -> ExperimentConfig {
    let base = base_config_for(dataset).unwrap();
    expand_grid_3param(&base)
        .unwrap()
        .into_iter()
        .find(|c| c.index.to_string() == label)
        .unwrap()
}

fn ccr_reproduction() -> Check {
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (file, label, floor) in CCR_FLOORS {
        let raw = load(file);
        let data = SplitDataset::from_raw(&raw, DEFAULT_TRAIN_RATIO, SPLIT_SEED).unwrap();
        let cfg = column(&raw.name, label);
        let master = config_master_seed(MASTER_SEED, cfg.index);
        let ccr: Vec<f64> = (0..CCR_RUNS as u64)
            .map(|i| run_ea(&cfg.params, &data, master.wrapping_add(i)).unwrap().test_ccr)
            .collect();
        let mean = ccr.iter().sum::<f64>() / ccr.len() as f64;
        let sd = (ccr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ccr.len() - 1) as f64).sqrt();
        lines.push(format!(
            "{} config {label}: {mean:.2}+-{sd:.2} (floor {floor})",
            raw.name
        ));
        if mean < floor {
            failures.push(raw.name.clone());
        }
    }
    ensure(failures.is_empty(), || {
        format!("below floor: {failures:?}; {}", lines.join("; "))
    })?;
    Ok(Verdict::Pass(format!("{CCR_RUNS} runs each; {}", lines.join("; "))))
}

// ---------------------------------------------------------------- 4

#[derive(Deserialize)]
struct BenchRow {
    nodes: usize,
    seconds: Option<f64>,
    speedup: Option<f64>,
    efficiency: Option<f64>,
    failure: Option<String>,
}

#[derive(Deserialize)]
struct BenchJson {
    rows: Vec<BenchRow>,
}

fn bench_efficiency() -> Check {
    // published raw times must give the published ratios
    let s = speedup(349.0, 177.0).map_err(|e| e.to_string())?;
    let e = efficiency(s, 2);
    ensure(
        truncate_decimals(s, 4) == 1.9717 && truncate_decimals(e, 4) == 0.9858,
        || format!("S(349,177) = {s}, E = {e}"),
    )?;

    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("bench");
    let nodes = BENCH_NODES.map(|p| p.to_string()).join(",");
    let out = Command::new(env!("CARGO_BIN_EXE_punn"))
        .args(["bench", "--data"])
        .arg(data_dir().join("cancer.csv"))
        .args(["--column", "2", "--runs", &BENCH_RUNS.to_string(), "--nodes", &nodes])
        .args([
            "--local",
            &BENCH_NODES[BENCH_NODES.len() - 1].to_string(),
            "--seed",
            &MASTER_SEED.to_string(),
        ])
        .arg("--run-dir")
        .arg(&run)
        .output()
        .unwrap();
    ensure(out.status.success(), || {
        format!(
            "bench exited {:?}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        )
    })?;
    let report: BenchJson = serde_json::from_str(&std::fs::read_to_string(run.join("bench.json")).unwrap()).unwrap();
    let mut measured = Vec::new();
    let mut low = Vec::new();
    for row in &report.rows {
        ensure(row.failure.is_none(), || {
            format!("P={} failed: {:?}", row.nodes, row.failure)
        })?;
        let (t, sp, ef) = (row.seconds.unwrap(), row.speedup.unwrap(), row.efficiency.unwrap());
        measured.push(format!("P={} T={t:.1}s S={sp:.4} E={ef:.4}", row.nodes));
        if row.nodes > 1 && ef < MIN_EFFICIENCY {
            low.push(row.nodes);
        }
    }
    ensure(report.rows.iter().map(|r| r.nodes).eq(BENCH_NODES), || {
        "missing node counts".into()
    })?;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let summary = format!("S(349,177)=1.9717 E=0.9858; {}", measured.join(", "));
    if cores < MIN_CORES_FOR_EFFICIENCY {
        return Ok(Verdict::Skip(format!(
            "efficiency floor {MIN_EFFICIENCY} needs >= {MIN_CORES_FOR_EFFICIENCY} cores, host has {cores}; {summary}"
        )));
    }
    ensure(low.is_empty(), || {
        format!("efficiency below {MIN_EFFICIENCY} at P={low:?}; {summary}")
    })?;
    Ok(Verdict::Pass(format!("{cores} cores; {summary}")))
}

// ---------------------------------------------------------------- 5

fn dispatch_outcomes(workers: usize, dir: &Path) -> std::result::Result<Vec<(String, String, String)>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_punn"))
        .args(["dispatch", "--data"])
        .arg(data_dir().join("cancer.csv"))
        .args(["--population", "60", "--gen", "15", "--runs", "12", "--seed", "7"])
        .args(["--local", &workers.to_string(), "--run-dir"])
        .arg(dir)
        .output()
        .unwrap();
    ensure(out.status.success(), || {
        format!("P={workers}: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    let mut reader = csv::Reader::from_path(dir.join("results.csv")).unwrap();
    let h = reader.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|x| x == name).unwrap();
    let (s, c, n) = (col("seed"), col("test_ccr"), col("connections"));
    let mut rows: Vec<_> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[s].to_string(), r[c].to_string(), r[n].to_string())
        })
        .collect();
    rows.sort();
    Ok(rows)
}

fn distribution_invariance() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let one = dispatch_outcomes(1, &tmp.path().join("p1"))?;
    let four = dispatch_outcomes(4, &tmp.path().join("p4"))?;
    ensure(one.len() == 12, || format!("{} runs at P=1", one.len()))?;
    ensure(one == four, || "P=1 and P=4 outcomes differ".into())?;
    Ok(Verdict::Pass(format!(
        "{} (seed, test CCR, connections) triples identical for P=1 and P=4",
        one.len()
    )))
}

// ---------------------------------------------------------------- 6

#[derive(Deserialize)]
struct Expected {
    statistic: f64,
    p_value: f64,
}

#[derive(Deserialize)]
struct Pair {
    a: Vec<f64>,
    b: Vec<f64>,
    ks_a: Expected,
    ks_b: Expected,
    levene: Expected,
    student: Expected,
    welch: Expected,
}

#[derive(Deserialize)]
struct Golden {
    pairs: Vec<Pair>,
}

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

fn run_set(label: &str, ccr: Vec<f64>, connections: Vec<f64>) -> RunSet {
    RunSet {
        dataset: "synthetic".into(),
        label: label.into(),
        ccr,
        connections,
    }
}

fn statistics_oracle() -> Check {
    let golden: Golden =
        serde_json::from_str(include_str!("../../core/tests/data/stats_golden.json")).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut gap = |got: &TestOutcome, want: &Expected| {
        let ds = (got.statistic - want.statistic).abs() / (1.0 + want.statistic.abs());
        worst = worst.max(ds).max((got.p_value - want.p_value).abs());
    };
    for p in &golden.pairs {
        gap(&ks_normality(&p.a).unwrap(), &p.ks_a);
        gap(&ks_normality(&p.b).unwrap(), &p.ks_b);
        gap(&levene(&p.a, &p.b).unwrap(), &p.levene);
        gap(&t_test(&p.a, &p.b, true).unwrap(), &p.student);
        gap(&t_test(&p.a, &p.b, false).unwrap(), &p.welch);
    }
    ensure(worst <= ORACLE_TOL, || format!("golden deviation {worst:e}"))?;

    // synthetic sets with known shifts
    let same = run_set(
        "1",
        quantile_sample(30, 95.0, 1.2, false),
        quantile_sample(30, 20.0, 3.0, true),
    );
    let r = compare_configs(&same, &same.clone()).unwrap();
    ensure(r.no_significant_differences(), || "identical sets flagged".into())?;
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
    ensure(
        !r.ccr.variances_differ()
            && !r.ccr.means_differ()
            && !r.connections.variances_differ()
            && r.connections.means_differ(),
        || "connections-only pattern not reproduced".into(),
    )?;
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
    ensure(
        r.ccr.variances_differ() && r.ccr.means_differ() && !r.ccr.equal_variances && r.connections.means_differ(),
        || "spread-and-mean pattern not reproduced".into(),
    )?;
    Ok(Verdict::Pass(format!(
        "{} golden pairs, max deviation {worst:.1e} (tol {ORACLE_TOL:e}); 3 decision patterns",
        golden.pairs.len()
    )))
}

// ---------------------------------------------------------------- 7

fn data_ingestion() -> Check {
    // (file, total, train, test)
    let table = [
        ("balance", 625, 469, 156),
        ("cancer", 699, 525, 174),
        ("pima", 768, 576, 192),
        ("waveform", 5000, 3750, 1250),
    ];
    let mut seen = Vec::new();
    for (file, total, train, test) in table {
        if !data_dir().join(format!("{file}.csv")).exists() {
            continue;
        }
        let raw = load(file);
        ensure(raw.len() == total, || format!("{file}: {} rows", raw.len()))?;
        for seed in [SPLIT_SEED, 2, 3] {
            let split = SplitDataset::from_raw(&raw, DEFAULT_TRAIN_RATIO, seed).unwrap();
            ensure((split.train.len(), split.test.len()) == (train, test), || {
                format!("{file}: {}/{}", split.train.len(), split.test.len())
            })?;
            for part in [&split.train, &split.test] {
                for row in part.rows() {
                    ensure(row.iter().all(|v| (1.0..=2.0).contains(v)), || {
                        format!("{file}: {row:?}")
                    })?;
                }
            }
        }
        seen.push(format!("{} {total}->{train}/{test}", raw.name));
    }
    ensure(!seen.is_empty(), || "no datasets present".into())?;
    Ok(Verdict::Pass(format!("{}; every split within [1,2]", seen.join(", "))))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 7] = [
        ("math properties", math_properties),
        ("grid golden tables", grid_golden),
        ("scaled CCR reproduction", ccr_reproduction),
        ("speedup and efficiency", bench_efficiency),
        ("distribution invariance", distribution_invariance),
        ("statistics oracle", statistics_oracle),
        ("data ingestion", data_ingestion),
    ];
    // ACCEPTANCE_ONLY=1,6 runs a subset; the rest report SKIP
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut tally = BTreeMap::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            println!("SKIP [{}] {name}: not selected by ACCEPTANCE_ONLY", i + 1);
            *tally.entry("SKIP").or_insert(0) += 1;
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Ok(Verdict::Pass(d)) => ("PASS", d),
            Ok(Verdict::Skip(d)) => ("SKIP", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} [{}] {name} ({secs:.0}s): {detail}", i + 1);
        *tally.entry(tag).or_insert(0) += 1;
    }
    println!("acceptance: {tally:?}");
    assert!(!tally.contains_key("FAIL"), "acceptance failures: {tally:?}");
}
