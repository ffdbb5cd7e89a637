mod config;
mod output;
mod report;

use std::io::Write as _;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use punn::cluster::{
    self, dispatch, serve_worker, DatasetRef, DispatchOptions, JobSpec, LocalCluster, RunRecord, WorkerOptions,
};
use punn::data::{load_csv, Schema, SplitDataset};
use punn::evolution::run_ea;
use punn::grid::{config_master_seed, expand_grid_2param, expand_grid_3param, split_runs, ExperimentConfig};
use punn::stats::{compare_configs, RunSet};
use punn::{Error, ErrorKind, Result};

use config::Settings;

#[derive(Parser)]
#[command(
    name = "punn",
    version,
    about = "Evolutionary product-unit networks: training, grids and cluster runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One seeded evolutionary run.
    Train(TrainArgs),
    /// The eight-configuration grid around a base configuration.
    Grid(GridArgs),
    /// Time the same runs split over 1..P worker nodes.
    Bench(BenchArgs),
    /// Serve jobs from a master.
    Worker(WorkerArgs),
    /// Split one configuration's runs over workers.
    Dispatch(DispatchArgs),
    /// Compare two result files (base against best configuration).
    Stats(StatsArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML file with any of the settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Delimited data file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Schema for --data; defaults to the data path with a .toml extension.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// A split saved by an earlier command, instead of --data.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    train_ratio: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Run seed (train) or master seed (grid, dispatch, bench).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    neu: Option<usize>,
    #[arg(long)]
    gen: Option<usize>,
    #[arg(long)]
    alpha2: Option<f64>,
    /// Population size override.
    #[arg(long)]
    population: Option<usize>,
    /// Rayon threads for fitness evaluation in this process.
    #[arg(long)]
    threads: Option<usize>,
    /// Parent of the run-stamped output directory.
    #[arg(long, default_value = "runs")]
    output_dir: PathBuf,
    /// Exact output directory, bypassing the stamped name.
    #[arg(long)]
    run_dir: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct Remote {
    /// Worker endpoints, host:port, comma separated.
    #[arg(long, value_delimiter = ',')]
    workers: Option<Vec<String>>,
    /// Spawn this many worker processes on this host instead.
    #[arg(long)]
    local: Option<usize>,
    /// Embed the split in each job rather than sending its path.
    #[arg(long)]
    inline: bool,
    #[arg(long)]
    connect_timeout: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Grid column to train, e.g. 4 or 2*.
    #[arg(long)]
    column: Option<String>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    remote: Remote,
    /// 3 distributes neu, gen and alpha2; 2 only neu and gen.
    #[arg(long)]
    mode: Option<u8>,
    /// Seeded runs per configuration.
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    remote: Remote,
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    /// Node counts to time; 1 is always included.
    #[arg(long, value_delimiter = ',')]
    nodes: Option<Vec<usize>>,
}

#[derive(Args)]
struct DispatchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    remote: Remote,
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Args)]
struct WorkerArgs {
    #[arg(long, default_value = "127.0.0.1:7070")]
    listen: String,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    id: Option<String>,
    /// Exit after serving this many connections.
    #[arg(long)]
    max_connections: Option<usize>,
}

#[derive(Args)]
struct StatsArgs {
    base: PathBuf,
    best: PathBuf,
    #[arg(long, default_value = "runs")]
    output_dir: PathBuf,
    #[arg(long)]
    run_dir: Option<PathBuf>,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        let flags = Settings {
            data: self.data.clone(),
            schema: self.schema.clone(),
            split: self.split.clone(),
            train_ratio: self.train_ratio,
            split_seed: self.split_seed,
            seed: self.seed,
            neu: self.neu,
            gen: self.gen,
            alpha2: self.alpha2,
            threads: self.threads,
            ..Settings::default()
        };
        let mut s = file.overlay(flags);
        if let Some(p) = self.population {
            let mut ea = s.ea();
            ea.population_size = p;
            s.ea = Some(ea);
        }
        Ok(s)
    }
}

impl Remote {
    fn settings(&self) -> Settings {
        Settings {
            workers: self.workers.clone(),
            local_workers: self.local,
            inline_dataset: self.inline.then_some(true),
            connect_timeout_secs: self.connect_timeout,
            ..Settings::default()
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Other => 1,
        ErrorKind::Ingestion => 2,
        ErrorKind::Protocol => 3,
        ErrorKind::Precondition => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Worker(a) => cmd_worker(a),
        Command::Dispatch(a) => cmd_dispatch(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

/// A loaded split with the settings resolved against its name.
struct Session {
    settings: Settings,
    data: SplitDataset,
    dir: PathBuf,
    split_path: PathBuf,
}

impl Session {
    fn open(command: &str, settings: Settings, common: &Common) -> Result<Session> {
        if let Some(n) = settings.threads {
            // ignore a second initialisation, e.g. in tests
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        let data = load_split(&settings)?;
        let mut settings = settings.resolve(&data.name);
        if settings.split.is_none() {
            settings.schema = settings
                .schema
                .or_else(|| settings.data.as_ref().map(|d| d.with_extension("toml")));
        }
        let dir = match &common.run_dir {
            Some(d) => {
                std::fs::create_dir_all(d)?;
                d.clone()
            }
            None => output::run_dir(&common.output_dir, command, &data.name)?,
        };
        let header = format!("# punn {command}: effective configuration\n{}", settings.to_toml());
        println!("{header}");
        output::write_text(&dir.join("effective_config.toml"), &header)?;
        let split_path = dir.join("split.json");
        data.save(&split_path)?;
        Ok(Session {
            settings,
            data,
            dir,
            split_path,
        })
    }

    fn dataset_ref(&self) -> Result<DatasetRef> {
        if self.settings.inline_dataset == Some(true) {
            Ok(DatasetRef::Inline(Box::new(self.data.clone())))
        } else {
            Ok(DatasetRef::Path(std::fs::canonicalize(&self.split_path)?))
        }
    }

    fn dispatch_options(&self) -> DispatchOptions {
        let mut o = DispatchOptions::default();
        if let Some(s) = self.settings.connect_timeout_secs {
            o.connect_timeout = Duration::from_secs_f64(s);
        }
        o
    }

    /// Endpoints from `workers`, or `local_workers` freshly spawned ones.
    fn endpoints(&self, wanted: usize) -> Result<(Vec<String>, Option<LocalCluster>)> {
        if let Some(w) = &self.settings.workers {
            return Ok((w.clone(), None));
        }
        let n = self.settings.local_workers.unwrap_or(wanted);
        let exe = std::env::current_exe()?;
        let cluster = LocalCluster::spawn(&exe, n, &[])?;
        Ok((cluster.endpoints().to_vec(), Some(cluster)))
    }

    fn remote(&self) -> bool {
        self.settings.workers.is_some() || self.settings.local_workers.is_some()
    }
}

fn load_split(s: &Settings) -> Result<SplitDataset> {
    if let Some(p) = &s.split {
        return SplitDataset::load(p);
    }
    let data = s
        .data
        .as_ref()
        .ok_or_else(|| Error::precondition("give --data (with --schema) or --split"))?;
    let schema_path = s.schema.clone().unwrap_or_else(|| data.with_extension("toml"));
    let schema = Schema::load(&schema_path)?;
    let raw = load_csv(data, &schema)?;
    let ratio = s.train_ratio.unwrap_or(punn::data::DEFAULT_TRAIN_RATIO);
    SplitDataset::from_raw(&raw, ratio, s.split_seed.unwrap_or(1))
}

fn describe(cfg: &ExperimentConfig) -> String {
    format!(
        "{} config {}: neu {}, gen {}, alpha2 {}, population {}",
        cfg.dataset,
        cfg.index,
        cfg.neu(),
        cfg.gen(),
        cfg.alpha2(),
        cfg.params.population_size
    )
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut settings = args.common.settings()?;
    settings.column = args.column.clone().or(settings.column);
    let session = Session::open("train", settings, &args.common)?;
    let cfg = session.settings.experiment(&session.data.name)?;
    eprintln!("{}", describe(&cfg));
    let seed = session.settings.seed();
    let run = run_ea(&cfg.params, &session.data, seed)?;
    let record = RunRecord::from_run(&cfg, 0, &run);
    output::write_csv(&session.dir.join("result.csv"), std::slice::from_ref(&record))?;
    output::write_csv(&session.dir.join("trace.csv"), &run.trace.records)?;
    output::write_text(
        &session.dir.join("network.json"),
        &serde_json::to_string_pretty(run.best.network())?,
    )?;
    println!(
        "seed {seed}: train CCR {:.4}, test CCR {:.4}, topology {}, {} connections, {:.2} s",
        run.train_ccr, run.test_ccr, run.topology, run.connections, run.seconds
    );
    println!("results in {}", session.dir.display());
    Ok(())
}

fn grid_configs(session: &Session, mode: u8) -> Result<Vec<ExperimentConfig>> {
    let base = session.settings.base_config(&session.data.name)?;
    match mode {
        3 => expand_grid_3param(&base),
        2 => expand_grid_2param(&base),
        m => Err(Error::precondition(format!("grid mode must be 2 or 3, got {m}"))),
    }
}

fn cmd_grid(args: GridArgs) -> Result<()> {
    let mut settings = args.common.settings()?.overlay(args.remote.settings());
    settings.mode = args.mode.or(settings.mode);
    settings.runs = args.runs.or(settings.runs);
    let mut session = Session::open("grid", settings, &args.common)?;
    let mode = session
        .settings
        .mode
        .unwrap_or(if session.settings.alpha2.is_some() { 3 } else { 2 });
    let runs = session.settings.runs.unwrap_or(30);
    session.settings.mode = Some(mode);
    session.settings.runs = Some(runs);
    if runs == 0 {
        return Err(Error::precondition("runs must be positive"));
    }
    let configs = grid_configs(&session, mode)?;
    let master = session.settings.seed();

    let mut records = Vec::new();
    if session.remote() {
        let (endpoints, _cluster) = session.endpoints(configs.len())?;
        let data = session.dataset_ref()?;
        // each node takes a whole configuration, as many at a time as there are nodes
        for batch in configs.chunks(endpoints.len().max(1)) {
            let jobs: Vec<JobSpec> = batch
                .iter()
                .map(|cfg| {
                    let assignment = split_runs(runs, 1, config_master_seed(master, cfg.index))?.remove(0);
                    Ok(JobSpec::new(
                        format!("grid-{}", cfg.index),
                        cfg.clone(),
                        assignment,
                        data.clone(),
                    ))
                })
                .collect::<Result<_>>()?;
            let report = dispatch(&endpoints, &jobs, &session.dispatch_options())?;
            for job in &jobs {
                if let Some(done) = report.jobs.iter().find(|j| j.job_id == job.job_id) {
                    records.extend(done.runs.iter().cloned());
                }
            }
            if let Some(f) = report.failures.first() {
                output::write_csv(&session.dir.join("results.csv"), &records)?;
                return Err(Error::Worker {
                    endpoint: f.endpoint.clone(),
                    message: format!("job {} failed: {}", f.job_id, f.message),
                });
            }
        }
    } else {
        for cfg in &configs {
            eprintln!("{}", describe(cfg));
            let seed0 = config_master_seed(master, cfg.index);
            for i in 0..runs {
                let run = run_ea(&cfg.params, &session.data, seed0.wrapping_add(i as u64))?;
                eprintln!("  run {i}: test CCR {:.4}", run.test_ccr);
                records.push(RunRecord::from_run(cfg, i, &run));
            }
        }
    }
    output::write_csv(&session.dir.join("results.csv"), &records)?;
    let outputs = session
        .settings
        .ea()
        .output_layout
        .output_count(session.data.n_classes());
    let summary = report::summarize_grid(&configs, &records, session.data.n_inputs(), outputs)?;
    output::write_csv(&session.dir.join("summary.csv"), &summary)?;
    let table = format!(
        "{} grid, mode {mode}, {runs} runs per configuration, master seed {master}\ngeneralization CCR (test)\n{}",
        session.data.name,
        report::grid_table(&summary)
    );
    output::write_text(&session.dir.join("summary.txt"), &table)?;
    println!("{table}");
    println!("results in {}", session.dir.display());
    Ok(())
}

fn cmd_dispatch(args: DispatchArgs) -> Result<()> {
    let mut settings = args.common.settings()?.overlay(args.remote.settings());
    settings.column = args.column.clone().or(settings.column);
    settings.runs = args.runs.or(settings.runs);
    if settings.workers.is_none() && settings.local_workers.is_none() {
        return Err(Error::precondition("dispatch needs --workers or --local"));
    }
    let session = Session::open("dispatch", settings, &args.common)?;
    let cfg = session.settings.experiment(&session.data.name)?;
    let runs = session.settings.runs.unwrap_or(30);
    let (endpoints, _cluster) = session.endpoints(0)?;
    let master = config_master_seed(session.settings.seed(), cfg.index);
    let data = session.dataset_ref()?;
    let jobs: Vec<JobSpec> = split_runs(runs, endpoints.len().min(runs), master)?
        .into_iter()
        .map(|a| JobSpec::new(format!("dispatch-{}", a.worker), cfg.clone(), a, data.clone()))
        .collect();
    eprintln!("{} over {} workers", describe(&cfg), jobs.len());
    let report = dispatch(&endpoints, &jobs, &session.dispatch_options())?;
    let records = report.runs();
    output::write_csv(&session.dir.join("results.csv"), &records)?;
    output::write_text(
        &session.dir.join("dispatch.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "{} of {runs} runs in {:.3} s over {} workers",
        records.len(),
        report.wall_seconds,
        jobs.len()
    );
    for j in &report.jobs {
        println!(
            "  {} on {}: {} runs, {:.3} s",
            j.job_id,
            j.worker_id,
            j.runs.len(),
            j.worker_seconds
        );
    }
    println!("results in {}", session.dir.display());
    match report.failures.first() {
        Some(f) => Err(Error::Worker {
            endpoint: f.endpoint.clone(),
            message: format!("job {} failed: {}", f.job_id, f.message),
        }),
        None => Ok(()),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut settings = args.common.settings()?.overlay(args.remote.settings());
    settings.column = args.column.clone().or(settings.column);
    settings.runs = args.runs.or(settings.runs);
    settings.nodes = args.nodes.clone().or(settings.nodes);
    let mut session = Session::open("bench", settings, &args.common)?;
    let cfg = session.settings.experiment(&session.data.name)?;
    let runs = session.settings.runs.unwrap_or(32);
    let nodes = session.settings.nodes.clone().unwrap_or_else(|| vec![1, 2, 4, 8]);
    session.settings.runs = Some(runs);
    let max_p = nodes.iter().copied().max().unwrap_or(1);
    let (endpoints, _cluster) = session.endpoints(max_p)?;
    let master = config_master_seed(session.settings.seed(), cfg.index);
    eprintln!("{}; {runs} runs at nodes {nodes:?}", describe(&cfg));
    let report = cluster::bench(
        &cfg,
        &session.dataset_ref()?,
        runs,
        master,
        &nodes,
        &endpoints,
        &session.dispatch_options(),
    )?;
    output::write_text(&session.dir.join("bench.json"), &serde_json::to_string_pretty(&report)?)?;
    output::write_text(&session.dir.join("bench_plot.csv"), &report.to_plot_csv())?;
    for row in &report.rows {
        output::write_csv(&session.dir.join(format!("results_p{}.csv", row.nodes)), &row.runs)?;
    }
    print!("{}", report.to_table());
    println!("results in {}", session.dir.display());
    if report.is_partial() {
        return Err(Error::Protocol("benchmark incomplete; see the failure markers".into()));
    }
    Ok(())
}

fn cmd_worker(args: WorkerArgs) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build_global()
        .map_err(|e| Error::precondition(format!("thread pool: {e}")))?;
    let listener = TcpListener::bind(&args.listen)
        .map_err(|e| Error::precondition(format!("cannot listen on {}: {e}", args.listen)))?;
    let addr = listener.local_addr()?;
    println!("{} {addr}", cluster::LISTENING_PREFIX);
    std::io::stdout().flush()?;
    serve_worker(
        listener,
        WorkerOptions {
            worker_id: args.id,
            max_connections: args.max_connections,
        },
    )
}

fn run_set(path: &Path) -> Result<RunSet> {
    let rows = output::read_records(path)?;
    let first = rows
        .first()
        .ok_or_else(|| Error::precondition(format!("{} has no runs", path.display())))?;
    if let Some(other) = rows.iter().find(|r| !r.dataset.eq_ignore_ascii_case(&first.dataset)) {
        return Err(Error::precondition(format!(
            "{} mixes datasets {} and {}",
            path.display(),
            first.dataset,
            other.dataset
        )));
    }
    let mut labels: Vec<&str> = rows.iter().map(|r| r.config.as_str()).collect();
    labels.dedup();
    let label = if labels.len() == 1 {
        labels[0].to_string()
    } else {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    Ok(RunSet {
        dataset: first.dataset.clone(),
        label,
        ccr: rows.iter().map(|r| r.test_ccr).collect(),
        connections: rows.iter().map(|r| r.connections as f64).collect(),
    })
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let base = run_set(&args.base)?;
    let best = run_set(&args.best)?;
    let report = compare_configs(&base, &best)?;
    let dir = match &args.run_dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            d.clone()
        }
        None => output::run_dir(&args.output_dir, "stats", &report.dataset)?,
    };
    let header = format!(
        "# punn stats: effective configuration\nbase = {:?}\nbest = {:?}\n",
        args.base.display().to_string(),
        args.best.display().to_string()
    );
    println!("{header}");
    output::write_text(&dir.join("effective_config.toml"), &header)?;
    let narrative = report.narrative();
    output::write_text(&dir.join("narrative.txt"), &narrative)?;
    output::write_text(&dir.join("stats.csv"), &report.to_csv())?;
    print!("{narrative}");
    println!("results in {}", dir.display());
    Ok(())
}
