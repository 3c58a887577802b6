//! Command-line front end: pool construction, single-method adjudication,
//! significance testing, full experiment sweeps, and report re-rendering.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use poolsig::adjudicate::{adjudicate, trace_to_qrels, write_traces_csv, MethodConfig};
use poolsig::harness::config::{expand_ids, ConfigFile};
use poolsig::harness::experiment::load_results;
use poolsig::harness::{run_experiment, write_reports, ExperimentResult};
use poolsig::measures::{score_matrix, Measure};
use poolsig::pool::{build_pools, pool_stats, Budget, TopicPool};
use poolsig::significance::{significant_pairs, tukey_hsd, SignificanceConfig};
use poolsig::trec::{load_qrels, load_runs, write_qrels, Qrels, RunSet};
use poolsig::{Error, Result};

#[derive(Parser)]
#[command(
    name = "poolsig",
    version,
    about = "Judgment pooling, adjudication, and significance-preservation analysis \
             for ranked retrieval experiments"
)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build depth-k judgment pools and dump their contents.
    Pool {
        /// Run file or directory of run files.
        #[arg(long)]
        runs: PathBuf,
        /// Judgments; adds a relevant-document count to the summary.
        #[arg(long)]
        qrels: Option<PathBuf>,
        /// Pool depth.
        #[arg(long, default_value_t = 100)]
        depth: usize,
        /// Systems whose runs build the pool (default: all; @file reads ids
        /// from a file, one per line).
        #[arg(long, value_delimiter = ',')]
        pooling_systems: Vec<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Judge pooled documents with one adjudication method.
    Adjudicate {
        /// Run file or directory of run files.
        #[arg(long)]
        runs: PathBuf,
        /// Gold judgments answering each assessment.
        #[arg(long)]
        qrels: PathBuf,
        /// Pool depth.
        #[arg(long, default_value_t = 100)]
        depth: usize,
        /// Judgments allowed per topic.
        #[arg(long)]
        budget: usize,
        /// Adjudication method (topk, mtf, mm, mm-ns, ts, ts-ns, hedge, ntcir).
        #[arg(long)]
        method: String,
        /// Seed for the stochastic methods.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Systems whose runs build the pool (default: all).
        #[arg(long, value_delimiter = ',')]
        pooling_systems: Vec<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score systems and test all pairwise differences.
    Significance {
        /// Run file or directory of run files.
        #[arg(long)]
        runs: PathBuf,
        /// Judgments to score under.
        #[arg(long)]
        qrels: PathBuf,
        /// Effectiveness measure (map, ndcg, ndcg@k).
        #[arg(long, default_value = "map")]
        measure: String,
        /// Significance level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Number of permutations.
        #[arg(long, default_value_t = 1_000_000)]
        permutations: u64,
        /// Seed for the permutation streams.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Systems to compare (default: all).
        #[arg(long, value_delimiter = ',')]
        eval_systems: Vec<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full sweep: pools, adjudication, scoring, testing, agreement.
    Evaluate {
        /// Declarative experiment file; every flag below overrides it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        runs: Option<PathBuf>,
        #[arg(long)]
        qrels: Option<PathBuf>,
        #[arg(long)]
        depth: Option<usize>,
        /// Per-topic budgets, strictly increasing (repeat or comma-separate).
        #[arg(long = "budget", value_delimiter = ',')]
        budgets: Vec<usize>,
        /// Adjudication methods (default: all eight).
        #[arg(long = "method", value_delimiter = ',')]
        methods: Vec<String>,
        /// Effectiveness measures (default: map and ndcg).
        #[arg(long = "measure", value_delimiter = ',')]
        measures: Vec<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        permutations: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Executions per stochastic cell.
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        pooling_systems: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        eval_systems: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render all reports from a stored results.json.
    Report {
        /// results.json, or the directory containing it.
        #[arg(long)]
        results: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.workers > 0 {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Pool { runs, qrels, depth, pooling_systems, out } => {
            cmd_pool(&runs, qrels.as_deref(), depth, &pooling_systems, &out)
        }
        Command::Adjudicate { runs, qrels, depth, budget, method, seed, pooling_systems, out } => {
            cmd_adjudicate(&runs, &qrels, depth, budget, &method, seed, &pooling_systems, &out)
        }
        Command::Significance {
            runs,
            qrels,
            measure,
            alpha,
            permutations,
            seed,
            eval_systems,
            out,
        } => cmd_significance(&runs, &qrels, &measure, alpha, permutations, seed, &eval_systems, &out),
        Command::Evaluate {
            config,
            runs,
            qrels,
            depth,
            budgets,
            methods,
            measures,
            alpha,
            permutations,
            seed,
            repetitions,
            pooling_systems,
            eval_systems,
            out,
        } => {
            let overrides = ConfigFile {
                runs,
                qrels,
                out,
                depth,
                budgets: opt_vec(budgets),
                methods: opt_vec(methods),
                measures: opt_vec(measures),
                alpha,
                permutations,
                seed,
                repetitions,
                pooling_systems: opt_vec(pooling_systems),
                eval_systems: opt_vec(eval_systems),
                ..ConfigFile::default()
            };
            let file = match config {
                Some(path) => ConfigFile::load(&path)?,
                None => ConfigFile::default(),
            };
            cmd_evaluate(overrides.or(file))
        }
        Command::Report { results, out } => {
            let path = if results.is_dir() { results.join("results.json") } else { results };
            let result = load_results(&path)?;
            write_reports(&result, &out)?;
            println!("reports written to {}", out.display());
            Ok(())
        }
    }
}

fn opt_vec<T>(v: Vec<T>) -> Option<Vec<T>> {
    if v.is_empty() {
        None
    } else {
        Some(v)
    }
}

/// Expands `@file` entries and restricts `runs` to the listed systems;
/// an empty list keeps everything.
fn restrict(runs: RunSet, ids: &[String]) -> Result<RunSet> {
    if ids.is_empty() {
        Ok(runs)
    } else {
        runs.restrict_to_systems(&expand_ids(ids)?)
    }
}

fn load_gold(path: &Path) -> Result<Qrels> {
    let (qrels, warnings) = load_qrels(path)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(qrels)
}

fn non_empty_pools(runs: &RunSet, depth: usize) -> Result<Vec<TopicPool>> {
    let topics: Vec<String> = runs.all_topics().iter().map(|t| t.to_string()).collect();
    let (pools, missing) = build_pools(runs, depth, &topics)?;
    for topic in &missing {
        log::warn!("topic {topic} has an empty pool and is dropped");
    }
    Ok(pools.into_iter().filter(|p| p.size() > 0).collect())
}

fn cmd_pool(
    runs_path: &Path,
    qrels_path: Option<&Path>,
    depth: usize,
    pooling_systems: &[String],
    out: &Path,
) -> Result<()> {
    let runs = restrict(load_runs(runs_path, None)?, pooling_systems)?;
    let pools = non_empty_pools(&runs, depth)?;
    let stats = pool_stats(&pools);

    fs::create_dir_all(out)?;
    let mut csv = String::from("topic,doc\n");
    for pool in &pools {
        for doc in &pool.candidates {
            csv += &format!("{},{}\n", pool.topic, doc);
        }
    }
    fs::write(out.join("pools.csv"), csv)?;

    println!("topics: {}", stats.topics);
    println!(
        "pool documents: total {}, mean {:.1}, max {}, min {}",
        stats.total,
        stats.mean(),
        stats.max,
        stats.min
    );
    if let Some(path) = qrels_path {
        let gold = load_gold(path)?;
        let relevant: usize = pools
            .iter()
            .map(|p| {
                p.candidates
                    .iter()
                    .filter(|d| gold.grade(&p.topic, d).unwrap_or(0) >= 1)
                    .count()
            })
            .sum();
        println!("relevant documents in pool: {relevant}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_adjudicate(
    runs_path: &Path,
    qrels_path: &Path,
    depth: usize,
    budget: usize,
    method: &str,
    seed: u64,
    pooling_systems: &[String],
    out: &Path,
) -> Result<()> {
    let runs = restrict(load_runs(runs_path, None)?, pooling_systems)?;
    let gold = load_gold(qrels_path)?;
    let pools = non_empty_pools(&runs, depth)?;
    let mcfg = MethodConfig::new(method.parse()?).with_seed(seed);
    let budget = Budget::new(budget)?;
    let traces: Vec<_> = pools
        .iter()
        .map(|pool| adjudicate(&mcfg, pool, &gold, budget))
        .collect::<Result<_>>()?;
    let judged = trace_to_qrels(&traces)?;

    fs::create_dir_all(out)?;
    let label = mcfg.kind.label();
    let stem = format!("{label}-b{}", budget.per_topic);
    let mut trace_csv = Vec::new();
    write_traces_csv(&traces, &mut trace_csv)?;
    fs::write(out.join(format!("{stem}-trace.csv")), trace_csv)?;
    let mut qrels_out = Vec::new();
    write_qrels(&judged, &mut qrels_out)?;
    fs::write(out.join(format!("{stem}.qrels")), qrels_out)?;

    println!("judgments: {} ({} relevant)", judged.len(), judged.count_relevant(1));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_significance(
    runs_path: &Path,
    qrels_path: &Path,
    measure: &str,
    alpha: f64,
    permutations: u64,
    seed: u64,
    eval_systems: &[String],
    out: &Path,
) -> Result<()> {
    let runs = load_runs(runs_path, None)?;
    let qrels = load_gold(qrels_path)?;
    let measure: Measure = measure.parse()?;
    let systems: Vec<String> = if eval_systems.is_empty() {
        runs.systems().into_iter().map(String::from).collect()
    } else {
        expand_ids(eval_systems)?
    };
    let judged: Vec<&str> = qrels.topics();
    let topics: Vec<String> = runs
        .all_topics()
        .into_iter()
        .filter(|t| judged.contains(t))
        .map(String::from)
        .collect();
    if topics.is_empty() {
        return Err(Error::Validation("no topic appears in both runs and qrels".into()));
    }

    let x = score_matrix(&runs, &qrels, &measure, &systems, &topics)?;
    let cfg = SignificanceConfig { alpha, permutations, master_seed: seed };
    let p = tukey_hsd(&x, &cfg)?;
    let significant = significant_pairs(&p, alpha);

    fs::create_dir_all(out)?;
    let label = measure.label();
    let mut scores_csv = Vec::new();
    x.to_csv(&mut scores_csv)?;
    fs::write(out.join(format!("scores-{label}.csv")), scores_csv)?;
    let mut p_csv = Vec::new();
    p.to_csv(&mut p_csv)?;
    fs::write(out.join(format!("pvalues-{label}.csv")), p_csv)?;

    let n = systems.len();
    println!("systems: {n}");
    println!("comparisons: {}", n * (n - 1) / 2);
    println!("significant at alpha {alpha}: {}", significant.len());
    Ok(())
}

fn cmd_evaluate(config: ConfigFile) -> Result<()> {
    let cfg = config.resolve()?;
    if cfg.workers > 0 && rayon::current_num_threads() != cfg.workers {
        // Only effective when no global pool exists yet (i.e. --workers
        // was not passed); otherwise the flag already decided.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global();
    }
    let result = run_experiment(&cfg)?;
    print_summary(&result);
    println!("reports written to {}", cfg.output_dir.display());
    Ok(())
}

fn print_summary(result: &ExperimentResult) {
    println!("topics: {}", result.pool_stats.topics);
    println!(
        "pool documents: total {}, mean {:.1}, max {}, min {}",
        result.pool_stats.total,
        result.pool_stats.mean(),
        result.pool_stats.max,
        result.pool_stats.min
    );
    println!("relevant documents in pool: {}", result.pool_relevant);
    for gold in &result.gold {
        println!(
            "{}: {} of {} pairs significant under the full judgments",
            gold.measure, gold.n_significant, gold.n_pairs
        );
    }
}
