//! `occufuse`: prepare and synthesize benchmark packages, run evaluations,
//! ablations and proxy sensitivity sweeps, and explain single recommendations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use occufuse::benchmark::{self, AllowList, BenchmarkPackage, FilterConfig};
use occufuse::config::{planned_comparisons, RunConfig, CONFIG_ENV};
use occufuse::experiment::{EvaluationReport, Experiment, ModelKind, Timings};
use occufuse::metrics::Metric;
use occufuse::report;
use occufuse::synth::{self, SynthConfig};
use occufuse::{Error, Result};

#[derive(Parser)]
#[command(name = "occufuse", version, about = "Late-fusion next-occupation recommender")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// Configuration override, repeatable: `--set beta=0.9`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter raw histories and items into a frozen package.
    Prepare(PrepareArgs),
    /// Generate a synthetic package.
    Synth(SynthArgs),
    /// Evaluate the configured models over the repeated splits.
    Evaluate(EvalArgs),
    /// Evaluate the whole baseline and ablation suite.
    Ablate(EvalArgs),
    /// Leave-one-proxy-out sweep of the full hybrid.
    Sensitivity(EvalArgs),
    /// Per-user breakdown of one full-hybrid recommendation.
    Explain(ExplainArgs),
    /// Re-run paired tests from a metrics file.
    Stats(StatsArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// `user_id<TAB>occ_1,occ_2,...`
    #[arg(long)]
    histories: PathBuf,
    /// `occupation_id<TAB>title<TAB>description<TAB>skill|skill`
    #[arg(long)]
    items: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Allow-list of occupation ids, one per line, instead of title patterns.
    #[arg(long, conflicts_with = "allow_all")]
    allow_ids: Option<PathBuf>,
    /// Skip the allow-list pass.
    #[arg(long)]
    allow_all: bool,
    #[arg(long, default_value_t = 3)]
    min_length: usize,
    #[arg(long, default_value_t = 25)]
    min_support: usize,
    /// Also write the drop audit as TSV.
    #[arg(long)]
    audit: Option<PathBuf>,
    #[arg(long, default_value = "prepared")]
    source: String,
}

#[derive(Args)]
struct SynthArgs {
    /// One of regime-jobhop, regime-karrierewege, prevalence.
    #[arg(long, default_value = "regime-jobhop")]
    preset: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    p_stay: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Package directory; overrides the `benchmark` key.
    #[arg(long)]
    benchmark: Option<PathBuf>,
    /// Report directory; overrides the `output` key.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma list of model keys or `all`; overrides the `models` key.
    #[arg(long)]
    models: Option<String>,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    benchmark: Option<PathBuf>,
    /// Split seed; defaults to the canonical seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    user: String,
}

#[derive(Args)]
struct StatsArgs {
    /// A `metrics.tsv` written by evaluate.
    #[arg(long)]
    metrics: PathBuf,
    /// `a:b` pairs; defaults to the configured comparisons.
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long, default_value = "ndcg@5")]
    metric: String,
    /// Write `tests.tsv` into this directory as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let base = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let mut c = base.with_overrides(&cli.overrides)?;
    if let Some(j) = cli.jobs {
        c.jobs = j;
    }
    Ok(c)
}

fn init_pool(jobs: usize) {
    if jobs > 0 {
        // Only fails if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
}

fn benchmark_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.benchmark.clone())
        .ok_or_else(|| Error::Config("no benchmark directory: pass --benchmark or set benchmark".into()))
}

fn output_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("occufuse-out"))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn print_timings(t: &Timings) {
    eprintln!(
        "timings: fit {:.3}s, select {:.3}s, score {:.3}s, total {:.3}s",
        t.fit.as_secs_f64(),
        t.select.as_secs_f64(),
        t.score.as_secs_f64(),
        t.total.as_secs_f64()
    );
}

fn prepare(args: &PrepareArgs, cfg: &RunConfig) -> Result<()> {
    let (histories, items) = benchmark::ingest(&args.histories, &args.items)?;
    let allow_list = if args.allow_all {
        AllowList::All
    } else if let Some(p) = &args.allow_ids {
        AllowList::ids_from_text(&read_text(p)?)
    } else if let Some(p) = &cfg.allow_list {
        AllowList::patterns_from_text(&read_text(p)?)
    } else {
        AllowList::illustrative_default()
    };
    let filters = FilterConfig {
        allow_list,
        min_sequence_length: args.min_length,
        min_item_user_support: args.min_support,
    };
    let (users, kept, audit) = benchmark::apply_filters(&histories, &items, &filters)?;
    eprintln!(
        "dropped {} occupations and {} users",
        audit.dropped_occupations().count(),
        audit.dropped_users().count()
    );
    if let Some(p) = &args.audit {
        std::fs::write(p, audit.to_tsv()).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?;
    }
    let pkg = BenchmarkPackage::assemble(
        users,
        kept,
        filters.summary(),
        args.source.clone(),
        cfg.canonical_seed,
        cfg.seeds.clone(),
    )?;
    let digest = benchmark::freeze(&pkg, &args.out)?;
    let c = &pkg.meta.counts;
    println!("users\t{}\noccupations\t{}\ninteractions\t{}", c.users, c.occupations, c.interactions);
    println!("digest\t{digest}");
    Ok(())
}

fn synth_cmd(args: &SynthArgs) -> Result<()> {
    let mut sc = SynthConfig::preset(&args.preset)?;
    if let Some(s) = args.seed {
        sc.seed = s;
    }
    if let Some(u) = args.users {
        sc.n_users = u;
    }
    if let Some(p) = args.p_stay {
        sc.p_stay = p;
    }
    let pkg = synth::generate(&sc)?;
    let digest = benchmark::freeze(&pkg, &args.out)?;
    let c = &pkg.meta.counts;
    println!("users\t{}\noccupations\t{}\ninteractions\t{}", c.users, c.occupations, c.interactions);
    println!("digest\t{digest}");
    Ok(())
}

fn finish_evaluation(report: &EvaluationReport, out: &Path) -> Result<()> {
    report::write_evaluation(report, out)?;
    print!("{}", report::render_summary(report));
    print_timings(&report.timings);
    Ok(())
}

fn evaluate(args: &EvalArgs, mut cfg: RunConfig, all: bool) -> Result<()> {
    if all {
        cfg.models = ModelKind::ALL.to_vec();
    } else if let Some(m) = &args.models {
        cfg.set("models", m)?;
    }
    let pkg = benchmark::load(benchmark_dir(&args.benchmark, &cfg)?)?;
    let out = output_dir(&args.out, &cfg);
    let exp = Experiment::new(&pkg, cfg)?;
    let report = exp.run_repeated_evaluation()?;
    finish_evaluation(&report, &out)
}

fn sensitivity(args: &EvalArgs, cfg: RunConfig) -> Result<()> {
    let pkg = benchmark::load(benchmark_dir(&args.benchmark, &cfg)?)?;
    let out = output_dir(&args.out, &cfg);
    let start = Instant::now();
    let exp = Experiment::new(&pkg, cfg)?;
    let table = exp.proxy_sensitivity()?;
    report::write_sensitivity(&table, &out)?;
    println!("baseline\t{:.4}", table.baseline);
    for r in &table.rows {
        println!("{}\t{}", r.removed.name(), report::value_delta(r.ndcg, r.delta));
    }
    eprintln!("timings: total {:.3}s", start.elapsed().as_secs_f64());
    Ok(())
}

fn explain(args: &ExplainArgs, cfg: RunConfig) -> Result<()> {
    let pkg = benchmark::load(benchmark_dir(&args.benchmark, &cfg)?)?;
    let seed = args.seed.unwrap_or(cfg.canonical_seed);
    let exp = Experiment::new(&pkg, cfg)?;
    print!("{}", exp.explain(seed, &args.user)?.render());
    Ok(())
}

fn stats(args: &StatsArgs, cfg: &RunConfig) -> Result<()> {
    let table = report::parse_metrics_tsv(&read_text(&args.metrics)?, &args.metrics.display().to_string())?;
    let metric: Metric = args.metric.parse()?;
    let pairs = match &args.pairs {
        Some(p) => {
            let mut c = cfg.clone();
            c.set("comparisons", p)?;
            c.validate()?;
            c.comparisons
        }
        None if cfg.comparisons.is_empty() => planned_comparisons(),
        None => cfg.comparisons.clone(),
    };
    let comparisons = report::comparisons_from_metrics(&table, &pairs, metric)?;
    let text = report::tests_tsv(&comparisons);
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let path = dir.join(report::TESTS_FILE);
        std::fs::write(&path, &text).map_err(|e| Error::Io { path, source: e })?;
    }
    print!("{text}");
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    init_pool(cfg.jobs);
    match &cli.command {
        Command::Prepare(a) => prepare(a, &cfg),
        Command::Synth(a) => synth_cmd(a),
        Command::Evaluate(a) => evaluate(a, cfg, false),
        Command::Ablate(a) => evaluate(a, cfg, true),
        Command::Sensitivity(a) => sensitivity(a, cfg),
        Command::Explain(a) => explain(a, cfg),
        Command::Stats(a) => stats(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
