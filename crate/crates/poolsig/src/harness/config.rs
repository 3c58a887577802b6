//! Experiment configuration: a flat declarative file plus command-line
//! overrides, resolved into a validated [`ExperimentConfig`].

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::adjudicate::{MethodConfig, MethodKind};
use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::significance::SignificanceConfig;

/// The raw key–value layer: every field optional so that a config file and
/// command-line overrides can be merged before defaults apply.
///
/// System lists (`pooling_systems`, `eval_systems`) may contain `@path`
/// entries; each expands to the non-empty lines of that file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Run file or directory of run files.
    pub runs: Option<PathBuf>,
    /// Gold judgments.
    pub qrels: Option<PathBuf>,
    /// Output directory for reports.
    pub out: Option<PathBuf>,
    /// Pool depth.
    pub depth: Option<usize>,
    /// Per-topic judgment budgets, strictly increasing.
    pub budgets: Option<Vec<usize>>,
    /// Adjudication method names; absent means all of them.
    pub methods: Option<Vec<String>>,
    /// Effectiveness measures; absent means map and ndcg.
    pub measures: Option<Vec<String>>,
    /// Significance level.
    pub alpha: Option<f64>,
    /// Permutation count B.
    pub permutations: Option<u64>,
    /// Master seed every random stream derives from.
    pub seed: Option<u64>,
    /// Executions per stochastic cell; absent means 50 for stochastic
    /// methods and 1 for deterministic ones.
    pub repetitions: Option<usize>,
    /// Systems whose runs build the pool; absent means all.
    pub pooling_systems: Option<Vec<String>>,
    /// Systems that get scored and compared; absent means all.
    pub eval_systems: Option<Vec<String>>,
    /// Evidence decay for the non-stationary bandits.
    pub decay: Option<f64>,
    /// Weight multiplier base for Hedge.
    pub hedge_beta: Option<f64>,
    /// Run-count depth for the NTCIR ordering; absent means the pool depth.
    pub ntcir_depth: Option<usize>,
    /// Whether precision/recall require matching directions.
    pub direction_sensitive: Option<bool>,
    /// Gold-rank positions per bin in the mixed-agreement distribution.
    pub bin_size: Option<usize>,
    /// Worker threads (0 = all cores).
    pub workers: Option<usize>,
}

impl ConfigFile {
    /// Parses a TOML-syntax config file; unknown keys are rejected.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Field-wise merge; `self` wins where both are set.
    pub fn or(self, fallback: ConfigFile) -> ConfigFile {
        ConfigFile {
            runs: self.runs.or(fallback.runs),
            qrels: self.qrels.or(fallback.qrels),
            out: self.out.or(fallback.out),
            depth: self.depth.or(fallback.depth),
            budgets: self.budgets.or(fallback.budgets),
            methods: self.methods.or(fallback.methods),
            measures: self.measures.or(fallback.measures),
            alpha: self.alpha.or(fallback.alpha),
            permutations: self.permutations.or(fallback.permutations),
            seed: self.seed.or(fallback.seed),
            repetitions: self.repetitions.or(fallback.repetitions),
            pooling_systems: self.pooling_systems.or(fallback.pooling_systems),
            eval_systems: self.eval_systems.or(fallback.eval_systems),
            decay: self.decay.or(fallback.decay),
            hedge_beta: self.hedge_beta.or(fallback.hedge_beta),
            ntcir_depth: self.ntcir_depth.or(fallback.ntcir_depth),
            direction_sensitive: self.direction_sensitive.or(fallback.direction_sensitive),
            bin_size: self.bin_size.or(fallback.bin_size),
            workers: self.workers.or(fallback.workers),
        }
    }

    /// Applies defaults and validates everything that can be checked
    /// without the run data.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let runs_path = self.runs.ok_or_else(|| Error::Config("missing runs path".into()))?;
        let gold_qrels_path =
            self.qrels.ok_or_else(|| Error::Config("missing qrels path".into()))?;
        let output_dir = self.out.ok_or_else(|| Error::Config("missing output dir".into()))?;
        let budgets =
            self.budgets.ok_or_else(|| Error::Config("missing budget list".into()))?;

        let mut methods = Vec::new();
        let names: Vec<String> = match self.methods {
            Some(names) => names,
            None => MethodKind::ALL.iter().map(|k| k.label().to_string()).collect(),
        };
        for name in names {
            let mut m = MethodConfig::new(name.parse()?);
            if let Some(d) = self.decay {
                m.decay = d;
            }
            if let Some(b) = self.hedge_beta {
                m.hedge_beta = b;
            }
            m.ntcir_depth = self.ntcir_depth;
            methods.push(m);
        }

        let measures: Vec<Measure> = match self.measures {
            Some(names) => names.iter().map(|s| s.parse()).collect::<Result<_>>()?,
            None => vec![Measure::map(), Measure::ndcg()],
        };

        let defaults = SignificanceConfig::default();
        let cfg = ExperimentConfig {
            runs_path,
            gold_qrels_path,
            output_dir,
            pool_depth: self.depth.unwrap_or(100),
            budgets,
            methods,
            measures,
            significance: SignificanceConfig {
                alpha: self.alpha.unwrap_or(defaults.alpha),
                permutations: self.permutations.unwrap_or(defaults.permutations),
                master_seed: self.seed.unwrap_or(defaults.master_seed),
            },
            repetitions: self.repetitions,
            pooling_systems: self.pooling_systems.map(|v| expand_ids(&v)).transpose()?,
            eval_systems: self.eval_systems.map(|v| expand_ids(&v)).transpose()?,
            direction_sensitive: self.direction_sensitive.unwrap_or(true),
            bin_size: self.bin_size.unwrap_or(3),
            workers: self.workers.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Expands `@path` entries to the non-empty lines of the referenced file
/// and rejects duplicates in the final list.
pub fn expand_ids(items: &[String]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for item in items {
        if let Some(path) = item.strip_prefix('@') {
            for line in fs::read_to_string(path)?.lines() {
                let id = line.trim();
                if !id.is_empty() {
                    out.push(id.to_string());
                }
            }
        } else {
            out.push(item.clone());
        }
    }
    let mut seen = BTreeSet::new();
    for id in &out {
        if !seen.insert(id.as_str()) {
            return Err(Error::Config(format!("duplicate system id: {id}")));
        }
    }
    Ok(out)
}

/// A fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub runs_path: PathBuf,
    pub gold_qrels_path: PathBuf,
    pub output_dir: PathBuf,
    pub pool_depth: usize,
    pub budgets: Vec<usize>,
    pub methods: Vec<MethodConfig>,
    pub measures: Vec<Measure>,
    pub significance: SignificanceConfig,
    /// Explicit repetition count; `None` means 50 per stochastic method,
    /// 1 per deterministic one.
    pub repetitions: Option<usize>,
    /// `None` means every system in the runs.
    pub pooling_systems: Option<Vec<String>>,
    /// `None` means every system in the runs.
    pub eval_systems: Option<Vec<String>>,
    pub direction_sensitive: bool,
    pub bin_size: usize,
    /// Worker threads (0 = all cores).
    pub workers: usize,
}

impl ExperimentConfig {
    /// Executions for one method: the explicit count if set, otherwise 50
    /// for stochastic methods and 1 for deterministic ones.
    pub fn repetitions_for(&self, method: &MethodConfig) -> usize {
        self.repetitions.unwrap_or(if method.kind.is_stochastic() { 50 } else { 1 })
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool_depth == 0 {
            return Err(Error::Config("pool depth must be at least 1".into()));
        }
        if self.budgets.is_empty() {
            return Err(Error::Config("budget list must not be empty".into()));
        }
        if !self.budgets.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("budgets must be strictly increasing".into()));
        }
        if self.budgets[0] == 0 {
            return Err(Error::Config("budgets must be positive".into()));
        }
        let mut labels = BTreeSet::new();
        for m in &self.methods {
            m.validate()?;
            if !labels.insert(m.kind.label()) {
                return Err(Error::Config(format!("duplicate method: {}", m.kind.label())));
            }
        }
        if self.measures.is_empty() {
            return Err(Error::Config("measure list must not be empty".into()));
        }
        let mut mlabels = BTreeSet::new();
        for m in &self.measures {
            m.validate()?;
            if !mlabels.insert(m.label()) {
                return Err(Error::Config(format!("duplicate measure: {}", m.label())));
            }
        }
        self.significance.validate()?;
        if self.repetitions == Some(0) {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.bin_size == 0 {
            return Err(Error::Config("bin size must be at least 1".into()));
        }
        if matches!(&self.pooling_systems, Some(v) if v.is_empty()) {
            return Err(Error::Config("pooling system list must not be empty".into()));
        }
        if matches!(&self.eval_systems, Some(v) if v.is_empty()) {
            return Err(Error::Config("evaluated system list must not be empty".into()));
        }
        Ok(())
    }
}
