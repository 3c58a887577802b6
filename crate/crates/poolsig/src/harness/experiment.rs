//! The experiment pipeline: gold judgments over the full pool, budgeted
//! adjudication sweeps, significance on both sides, agreement scoring, and
//! repetition averaging.

use std::fs;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjudicate::{adjudicate, trace_to_qrels, JudgingTrace, MethodConfig};
use crate::agreement::{
    bias, bin_ma_values, build_triplets, classify, ma_pairs, ma_values, precision_recall,
    AgreementReport, MaBin, TripletSet,
};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::report::write_reports;
use crate::measures::score_matrix;
use crate::pool::{build_pools, pool_stats, Budget, PoolStats, TopicPool};
use crate::significance::{
    kendall_tau, rank_systems, significant_pairs, tukey_hsd, PairSet, SignificanceConfig,
};
use crate::trec::{load_qrels, load_runs, Qrels, RunSet};
use crate::util::{derive_seed, fnv1a64};

/// Mean and sample standard deviation over repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    pub fn from_values(values: &[f64]) -> Stat {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Stat { mean, sd }
    }
}

/// Gold-side significance summary for one measure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSummary {
    pub measure: String,
    pub n_pairs: u64,
    pub n_significant: u64,
}

/// Repetition-averaged agreement figures for one (method, budget, measure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureAggregate {
    pub measure: String,
    pub tau: Stat,
    pub precision: Stat,
    pub recall: Stat,
    pub bias: Stat,
    pub aa: Stat,
    pub ad: Stat,
    pub ma_g: Stat,
    pub ma_l: Stat,
    pub md_g: Stat,
    pub md_l: Stat,
    pub n_low_sig: Stat,
}

/// One (method, budget) cell averaged over its repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub method: String,
    pub budget: usize,
    /// Relevant documents the reduced judgments contain, over all topics.
    pub rels_found: Stat,
    pub measures: Vec<MeasureAggregate>,
}

/// One measure's raw agreement report inside a repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub measure: String,
    pub report: AgreementReport,
}

/// Raw values of one (method, budget, repetition) execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub method: String,
    pub budget: usize,
    pub repetition: usize,
    pub rels_found: u64,
    pub reports: Vec<MeasureReport>,
}

/// Mixed-agreement score-difference distribution of one
/// (measure, method, budget), pooled over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaTable {
    pub measure: String,
    pub method: String,
    pub budget: usize,
    pub bins: Vec<MaBin>,
}

/// Everything an experiment produces; `results.json` is this structure
/// verbatim, so reports can be re-rendered without recomputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub methods: Vec<String>,
    pub budgets: Vec<usize>,
    /// Budget as a fraction of the full pool, aligned with `budgets`.
    pub budget_fractions: Vec<f64>,
    pub measures: Vec<String>,
    pub alpha: f64,
    pub permutations: u64,
    pub seed: u64,
    pub direction_sensitive: bool,
    pub bin_size: usize,
    pub pool_stats: PoolStats,
    /// Relevant documents in the full pool.
    pub pool_relevant: u64,
    /// System pairs compared.
    pub n_pairs: u64,
    pub gold: Vec<GoldSummary>,
    /// Ordered by (method, budget) in config order.
    pub cells: Vec<CellAggregate>,
    /// Ordered by (method, budget, repetition).
    pub repetitions: Vec<RepetitionRecord>,
    /// Ordered by (measure, method, budget).
    pub ma: Vec<MaTable>,
}

/// Splits the systems of `runs` into those that built the pool and the
/// rest. Evaluating only the second group probes how reusable the
/// judgments are for systems that never contributed to them.
pub fn split_pooled_nonpooled(
    runs: &RunSet,
    pooling_systems: &[String],
) -> Result<(Vec<String>, Vec<String>)> {
    if pooling_systems.is_empty() {
        return Err(Error::Config("pooling system list must not be empty".into()));
    }
    for sys in pooling_systems {
        if !runs.contains_system(sys) {
            return Err(Error::Config(format!("unknown system id: {sys}")));
        }
    }
    let pooled: Vec<String> = pooling_systems.to_vec();
    let non_pooled = runs
        .systems()
        .into_iter()
        .filter(|s| !pooling_systems.iter().any(|p| p == s))
        .map(String::from)
        .collect();
    Ok((pooled, non_pooled))
}

/// The fraction of the full pool a per-topic budget buys, capped at 1.
pub fn budget_fraction(budget: usize, pools: &[TopicPool]) -> f64 {
    let total: usize = pools.iter().map(TopicPool::size).sum();
    if total == 0 {
        return 1.0;
    }
    ((budget * pools.len()) as f64 / total as f64).min(1.0)
}

/// Inputs shared by every cell: pools, the gold judgments in force, and the
/// per-measure gold matrices, rankings, and significant sets.
struct Prepared {
    runs: RunSet,
    pools: Vec<TopicPool>,
    topics: Vec<String>,
    stats: PoolStats,
    /// Every pooled document with its gold grade (0 when unjudged); the
    /// full-budget judgment set.
    gold_in_force: Qrels,
    eval_systems: Vec<String>,
    gold: Vec<GoldMeasure>,
}

struct GoldMeasure {
    ranking: Vec<String>,
    sig: PairSet,
    triplets: TripletSet,
    /// Permutation stream seed; reduced-judgment tests reuse it so that
    /// identical matrices get identical p-values.
    tukey_seed: u64,
}

fn prepare(cfg: &ExperimentConfig, runs: RunSet, raw_gold: &Qrels) -> Result<Prepared> {
    let pooling_runs = match &cfg.pooling_systems {
        Some(ids) => runs.restrict_to_systems(ids).map_err(|e| e.in_stage("build-pools"))?,
        None => runs.clone(),
    };
    let all_topics: Vec<String> = pooling_runs.all_topics().iter().map(|t| t.to_string()).collect();
    let (pools, missing) = build_pools(&pooling_runs, cfg.pool_depth, &all_topics)
        .map_err(|e| e.in_stage("build-pools"))?;
    for topic in &missing {
        log::warn!("topic {topic} has an empty pool and is dropped");
    }
    let pools: Vec<TopicPool> = pools.into_iter().filter(|p| p.size() > 0).collect();
    if pools.is_empty() {
        return Err(Error::Validation("no topic has a non-empty pool".into())
            .in_stage("build-pools"));
    }
    let topics: Vec<String> = pools.iter().map(|p| p.topic.clone()).collect();
    let stats = pool_stats(&pools);

    let mut gold_in_force = Qrels::new();
    for pool in &pools {
        for doc in &pool.candidates {
            let grade = raw_gold.grade(&pool.topic, doc).unwrap_or(0);
            gold_in_force.insert(&pool.topic, doc, grade)?;
        }
    }

    let eval_systems: Vec<String> = match &cfg.eval_systems {
        Some(ids) => ids.clone(),
        None => runs.systems().into_iter().map(String::from).collect(),
    };
    for sys in &eval_systems {
        if !runs.contains_system(sys) {
            return Err(Error::Config(format!("unknown system id: {sys}")));
        }
    }

    let mut gold = Vec::with_capacity(cfg.measures.len());
    for measure in &cfg.measures {
        let label = measure.label();
        let matrix = score_matrix(&runs, &gold_in_force, measure, &eval_systems, &topics)
            .map_err(|e| e.in_stage("gold-scores"))?;
        let tukey_seed = derive_seed(
            cfg.significance.master_seed,
            &[fnv1a64(b"significance"), fnv1a64(label.as_bytes())],
        );
        let sig_cfg = SignificanceConfig { master_seed: tukey_seed, ..cfg.significance };
        let p = tukey_hsd(&matrix, &sig_cfg).map_err(|e| e.in_stage("gold-significance"))?;
        let sig = significant_pairs(&p, cfg.significance.alpha);
        let ranking = rank_systems(&matrix);
        let triplets = build_triplets(&matrix, &sig);
        gold.push(GoldMeasure { ranking, sig, triplets, tukey_seed });
    }

    Ok(Prepared { runs, pools, topics, stats, gold_in_force, eval_systems, gold })
}

/// Raw output of one (method, budget, repetition) execution.
struct CellOut {
    rels_found: u64,
    reports: Vec<AgreementReport>,
    /// Per measure: mixed-agreement differences per gold-ranking position.
    ma_values: Vec<Vec<Vec<f64>>>,
}

fn run_cell(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    method: &MethodConfig,
    budget: Budget,
    rep: usize,
) -> Result<CellOut> {
    let label = method.kind.label();
    let seed = derive_seed(
        cfg.significance.master_seed,
        &[fnv1a64(b"adjudicate"), fnv1a64(label.as_bytes()), rep as u64],
    );
    let mcfg = method.with_seed(seed);
    let traces: Vec<JudgingTrace> = prep
        .pools
        .iter()
        .map(|pool| adjudicate(&mcfg, pool, &prep.gold_in_force, budget))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("adjudication"))?;
    let low = trace_to_qrels(&traces).map_err(|e| e.in_stage("adjudication"))?;
    let rels_found = low.count_relevant(1) as u64;

    let mut reports = Vec::with_capacity(cfg.measures.len());
    let mut ma_vals = Vec::with_capacity(cfg.measures.len());
    for (measure, gold) in cfg.measures.iter().zip(&prep.gold) {
        let low_x = score_matrix(&prep.runs, &low, measure, &prep.eval_systems, &prep.topics)
            .map_err(|e| e.in_stage("reduced-scores"))?;
        let sig_cfg = SignificanceConfig { master_seed: gold.tukey_seed, ..cfg.significance };
        let p = tukey_hsd(&low_x, &sig_cfg).map_err(|e| e.in_stage("reduced-significance"))?;
        let low_sig = significant_pairs(&p, cfg.significance.alpha);
        let low_t = build_triplets(&low_x, &low_sig);
        let (counts, pr, tau, ma) = (|| -> Result<_> {
            let counts = classify(&gold.triplets, &low_t)?;
            let pr = precision_recall(&gold.triplets, &low_t, cfg.direction_sensitive)?;
            let tau = kendall_tau(&gold.ranking, &rank_systems(&low_x))?;
            let ma = ma_values(&gold.ranking, &low_x, &ma_pairs(&gold.triplets, &low_t)?)?;
            Ok((counts, pr, tau, ma))
        })()
        .map_err(|e| e.in_stage("agreement"))?;
        reports.push(AgreementReport {
            counts,
            precision: pr.0,
            recall: pr.1,
            tau,
            bias: bias(&counts),
            n_gold_sig: counts.n_gold_sig(),
            n_low_sig: counts.n_low_sig(),
        });
        ma_vals.push(ma);
    }
    Ok(CellOut { rels_found, reports, ma_values: ma_vals })
}

/// Runs the full sweep and persists all reports into the output directory.
///
/// The gold side is computed once and shared across every cell. Cells run
/// in parallel but are aggregated in (method, budget, repetition) order, so
/// the output does not depend on worker count or scheduling. On failure any
/// files already written are removed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let runs =
        load_runs(&cfg.runs_path, None).map_err(|e| e.in_stage("load-runs"))?;
    let (raw_gold, warnings) =
        load_qrels(&cfg.gold_qrels_path).map_err(|e| e.in_stage("load-qrels"))?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let prep = prepare(cfg, runs, &raw_gold)?;

    // One entry per execution, in reporting order.
    let keys: Vec<(usize, usize, usize)> = cfg
        .methods
        .iter()
        .enumerate()
        .flat_map(|(mi, m)| {
            let reps = cfg.repetitions_for(m);
            (0..cfg.budgets.len()).flat_map(move |bi| (0..reps).map(move |r| (mi, bi, r)))
        })
        .collect();
    let budgets: Vec<Budget> =
        cfg.budgets.iter().map(|&b| Budget::new(b)).collect::<Result<_>>()?;
    let outs: Vec<CellOut> = keys
        .par_iter()
        .map(|&(mi, bi, rep)| run_cell(cfg, &prep, &cfg.methods[mi], budgets[bi], rep))
        .collect::<Result<_>>()?;

    let result = aggregate(cfg, &prep, &keys, outs)?;
    let written = write_reports(&result, &cfg.output_dir);
    if let Err(e) = written {
        return Err(e.in_stage("reports"));
    }
    Ok(result)
}

fn aggregate(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    keys: &[(usize, usize, usize)],
    outs: Vec<CellOut>,
) -> Result<ExperimentResult> {
    let n = prep.eval_systems.len() as u64;
    let measure_labels: Vec<String> = cfg.measures.iter().map(|m| m.label()).collect();
    let mut repetitions = Vec::with_capacity(keys.len());
    for (&(mi, bi, rep), out) in keys.iter().zip(&outs) {
        repetitions.push(RepetitionRecord {
            method: cfg.methods[mi].kind.label().to_string(),
            budget: cfg.budgets[bi],
            repetition: rep,
            rels_found: out.rels_found,
            reports: measure_labels
                .iter()
                .zip(&out.reports)
                .map(|(l, r)| MeasureReport { measure: l.clone(), report: *r })
                .collect(),
        });
    }

    let mut cells = Vec::new();
    let mut ma = vec![Vec::new(); cfg.measures.len()];
    for (mi, method) in cfg.methods.iter().enumerate() {
        for (bi, &budget) in cfg.budgets.iter().enumerate() {
            let cell_outs: Vec<&CellOut> = keys
                .iter()
                .zip(&outs)
                .filter(|(&(m, b, _), _)| m == mi && b == bi)
                .map(|(_, o)| o)
                .collect();
            let stat_of = |f: &dyn Fn(&CellOut) -> f64| {
                Stat::from_values(&cell_outs.iter().map(|o| f(o)).collect::<Vec<_>>())
            };
            let mut measures = Vec::with_capacity(cfg.measures.len());
            for (xi, label) in measure_labels.iter().enumerate() {
                let r = |f: &dyn Fn(&AgreementReport) -> f64| {
                    stat_of(&|o: &CellOut| f(&o.reports[xi]))
                };
                measures.push(MeasureAggregate {
                    measure: label.clone(),
                    tau: r(&|a| a.tau),
                    precision: r(&|a| a.precision),
                    recall: r(&|a| a.recall),
                    bias: r(&|a| a.bias),
                    aa: r(&|a| a.counts.aa as f64),
                    ad: r(&|a| a.counts.ad as f64),
                    ma_g: r(&|a| a.counts.ma_g as f64),
                    ma_l: r(&|a| a.counts.ma_l as f64),
                    md_g: r(&|a| a.counts.md_g as f64),
                    md_l: r(&|a| a.counts.md_l as f64),
                    n_low_sig: r(&|a| a.n_low_sig as f64),
                });
                // Pool the raw differences over repetitions, position-wise.
                let mut by_pos = vec![Vec::new(); prep.eval_systems.len()];
                for o in &cell_outs {
                    for (pos, vals) in o.ma_values[xi].iter().enumerate() {
                        by_pos[pos].extend_from_slice(vals);
                    }
                }
                ma[xi].push(MaTable {
                    measure: label.clone(),
                    method: method.kind.label().to_string(),
                    budget,
                    bins: bin_ma_values(&by_pos, cfg.bin_size)?,
                });
            }
            cells.push(CellAggregate {
                method: method.kind.label().to_string(),
                budget,
                rels_found: stat_of(&|o| o.rels_found as f64),
                measures,
            });
        }
    }

    Ok(ExperimentResult {
        methods: cfg.methods.iter().map(|m| m.kind.label().to_string()).collect(),
        budgets: cfg.budgets.clone(),
        budget_fractions: cfg.budgets.iter().map(|&b| budget_fraction(b, &prep.pools)).collect(),
        measures: measure_labels,
        alpha: cfg.significance.alpha,
        permutations: cfg.significance.permutations,
        seed: cfg.significance.master_seed,
        direction_sensitive: cfg.direction_sensitive,
        bin_size: cfg.bin_size,
        pool_stats: prep.stats,
        pool_relevant: prep.gold_in_force.count_relevant(1) as u64,
        n_pairs: n * (n - 1) / 2,
        gold: prep
            .gold
            .iter()
            .zip(&cfg.measures)
            .map(|(g, m)| GoldSummary {
                measure: m.label(),
                n_pairs: n * (n - 1) / 2,
                n_significant: g.sig.len() as u64,
            })
            .collect(),
        cells,
        repetitions,
        ma: ma.into_iter().flatten().collect(),
    })
}

/// Loads a stored `results.json`.
pub fn load_results(path: &std::path::Path) -> Result<ExperimentResult> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}
