//! Train one network: `cargo run --example single_run -- data/cancer.csv data/cancer.toml 3 100 1.0 1`
use std::env;

use punn::data::{load_csv, Schema, SplitDataset};
use punn::evolution::{run_ea, EAParams};

fn main() -> punn::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let schema = Schema::load(&args[1])?;
    let raw = load_csv(&args[0], &schema)?;
    let split = SplitDataset::from_raw(&raw, 0.75, 1)?;
    let params = EAParams {
        max_hidden: args[2].parse().unwrap(),
        max_generations: args[3].parse().unwrap(),
        alpha2_init: args[4].parse().unwrap(),
        ..Default::default()
    };
    let seed = args[5].parse().unwrap();
    let r = run_ea(&params, &split, seed)?;
    for rec in r.trace.records.iter().step_by(10) {
        println!(
            "gen {:4} best {:.4} mean {:.4} train {:.2} a1 {:.3} a2 {:.3} succ {:.2}",
            rec.generation,
            rec.best_fitness,
            rec.mean_fitness,
            rec.best_train_ccr,
            rec.alpha1,
            rec.alpha2,
            rec.success_ratio
        );
    }
    println!(
        "{} train {:.4} test {:.4} conns {} in {:.1}s",
        r.topology, r.train_ccr, r.test_ccr, r.connections, r.seconds
    );
    Ok(())
}
