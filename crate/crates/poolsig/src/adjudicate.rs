//! Budget-limited adjudication: which pooled document gets judged next.
//!
//! Each method consumes a [`TopicPool`] and an oracle (the gold qrels) and
//! produces a [`JudgingTrace`], the judged documents in judging order. The
//! methods fall into three families:
//!
//! * static orders decided upfront: top-k ([`MethodKind::TopK`]) and NTCIR
//!   rank-count prioritization ([`MethodKind::Ntcir`]);
//! * feedback-driven run schedulers: MoveToFront ([`MethodKind::Mtf`]) and
//!   the Beta-Bernoulli bandits ([`MethodKind::Mm`], [`MethodKind::MmNs`],
//!   [`MethodKind::Ts`], [`MethodKind::TsNs`]);
//! * expert weighting over runs: [`MethodKind::Hedge`].
//!
//! Method state never crosses topics: queues, posteriors, and weights all
//! start fresh per topic, and per-topic RNG streams are derived from the
//! configured seed and the topic id, so traces do not depend on the order
//! topics are processed in.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::pool::{Budget, TopicPool};
use crate::trec::Qrels;
use crate::util::{derive_seed, fnv1a64};

/// The eight adjudication methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MethodKind {
    /// Judge the union of per-run top-k′ sets in doc-id order, where k′ is
    /// the smallest depth whose union covers the budget.
    TopK,
    /// MoveToFront: keep drawing from a run while it yields relevant
    /// documents, demote it to the back of the queue when it does not.
    Mtf,
    /// MaxMean bandit: play the run-arm with the highest posterior mean.
    Mm,
    /// MaxMean with evidence decay on the played arm.
    MmNs,
    /// Thompson sampling: play the arm with the highest posterior draw.
    Ts,
    /// Thompson sampling with evidence decay on the played arm.
    TsNs,
    /// Multiplicative-weights expert algorithm over runs.
    Hedge,
    /// Static order by how many runs rank a document within depth.
    Ntcir,
}

impl MethodKind {
    pub const ALL: [MethodKind; 8] = [
        MethodKind::TopK,
        MethodKind::Mtf,
        MethodKind::Mm,
        MethodKind::MmNs,
        MethodKind::Ts,
        MethodKind::TsNs,
        MethodKind::Hedge,
        MethodKind::Ntcir,
    ];

    /// Label used in config files, CLI arguments, file names, and reports.
    pub fn label(&self) -> &'static str {
        match self {
            MethodKind::TopK => "topk",
            MethodKind::Mtf => "mtf",
            MethodKind::Mm => "mm",
            MethodKind::MmNs => "mm-ns",
            MethodKind::Ts => "ts",
            MethodKind::TsNs => "ts-ns",
            MethodKind::Hedge => "hedge",
            MethodKind::Ntcir => "ntcir",
        }
    }

    /// Whether traces vary with the RNG seed. The bandits hold RNG state;
    /// every other method is fully determined by its inputs.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, MethodKind::Mm | MethodKind::MmNs | MethodKind::Ts | MethodKind::TsNs)
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "topk" | "top-k" => Ok(MethodKind::TopK),
            "mtf" => Ok(MethodKind::Mtf),
            "mm" => Ok(MethodKind::Mm),
            "mm-ns" | "mmns" => Ok(MethodKind::MmNs),
            "ts" => Ok(MethodKind::Ts),
            "ts-ns" | "tsns" => Ok(MethodKind::TsNs),
            "hedge" => Ok(MethodKind::Hedge),
            "ntcir" => Ok(MethodKind::Ntcir),
            _ => Err(Error::Config(format!("unknown adjudication method {s:?}"))),
        }
    }
}

/// A method plus its tuning parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodConfig {
    pub kind: MethodKind,
    /// Base seed; the per-topic stream is derived from it and the topic id.
    pub rng_seed: u64,
    /// Evidence decay for the non-stationary bandits, in (0, 1].
    pub decay: f64,
    /// Weight multiplier base for Hedge, in (0, 1).
    pub hedge_beta: f64,
    /// Depth for the NTCIR run-count key; defaults to the pool depth.
    pub ntcir_depth: Option<usize>,
}

impl MethodConfig {
    pub fn new(kind: MethodKind) -> Self {
        MethodConfig { kind, rng_seed: 0, decay: 0.99, hedge_beta: 0.1, ntcir_depth: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!("decay must be in (0, 1], got {}", self.decay)));
        }
        if !(self.hedge_beta > 0.0 && self.hedge_beta < 1.0) {
            return Err(Error::Config(format!(
                "hedge beta must be in (0, 1), got {}",
                self.hedge_beta
            )));
        }
        if self.ntcir_depth == Some(0) {
            return Err(Error::Config("ntcir depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// The judged documents of one topic, in judging order, with the grades the
/// oracle revealed (0 for documents absent from the gold qrels).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgingTrace {
    pub topic: String,
    pub judgments: Vec<(String, u32)>,
}

/// Writes traces as CSV rows `topic,position,docid,grade` with a header.
pub fn write_traces_csv<W: Write>(traces: &[JudgingTrace], out: &mut W) -> Result<()> {
    writeln!(out, "topic,position,docid,grade")?;
    for trace in traces {
        for (pos, (doc, grade)) in trace.judgments.iter().enumerate() {
            writeln!(out, "{},{},{},{}", trace.topic, pos + 1, doc, grade)?;
        }
    }
    Ok(())
}

/// Collects traces into qrels; every judged document appears, explicit
/// grade-0 judgments included.
pub fn trace_to_qrels(traces: &[JudgingTrace]) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for trace in traces {
        for (doc, grade) in &trace.judgments {
            qrels.insert(&trace.topic, doc, *grade)?;
        }
    }
    Ok(qrels)
}

/// Runs one method over one pool, revealing gold grades as it goes.
///
/// The trace has exactly `min(budget, pool size)` entries. Grades come from
/// `gold`; a pooled document missing there is judged non-relevant (grade 0).
pub fn adjudicate(
    cfg: &MethodConfig,
    pool: &TopicPool,
    gold: &Qrels,
    budget: Budget,
) -> Result<JudgingTrace> {
    cfg.validate()?;
    if pool.candidates.is_empty() {
        return Err(Error::Validation(format!("empty pool for topic {}", pool.topic)));
    }
    let quota = budget.per_topic.min(pool.size());
    let seed = derive_seed(cfg.rng_seed, &[fnv1a64(pool.topic.as_bytes())]);
    let mut policy = Policy::new(cfg, pool, quota, seed);
    let topic_qrels = gold.topic_judgments(&pool.topic);

    let mut judged: BTreeSet<String> = BTreeSet::new();
    let mut judgments = Vec::with_capacity(quota);
    while judgments.len() < quota {
        let doc = policy.select(&judged).ok_or_else(|| {
            Error::Validation(format!(
                "method {} ran out of candidates after {} of {} judgments on topic {}",
                cfg.kind,
                judgments.len(),
                quota,
                pool.topic
            ))
        })?;
        let grade = topic_qrels.and_then(|m| m.get(&doc)).copied().unwrap_or(0);
        policy.feed(&doc, grade >= 1);
        judged.insert(doc.clone());
        judgments.push((doc, grade));
    }
    Ok(JudgingTrace { topic: pool.topic.clone(), judgments })
}

enum Policy<'a> {
    Static(StaticOrder),
    Mtf(MtfState<'a>),
    Bandit(BanditState<'a>),
    Hedge(HedgeState<'a>),
}

impl<'a> Policy<'a> {
    fn new(cfg: &MethodConfig, pool: &'a TopicPool, quota: usize, seed: u64) -> Self {
        match cfg.kind {
            MethodKind::TopK => Policy::Static(StaticOrder::new(topk_order(pool, quota))),
            MethodKind::Ntcir => Policy::Static(StaticOrder::new(ntcir_order(
                pool,
                cfg.ntcir_depth.unwrap_or(pool.depth),
            ))),
            MethodKind::Mtf => Policy::Mtf(MtfState::new(pool)),
            MethodKind::Mm | MethodKind::MmNs | MethodKind::Ts | MethodKind::TsNs => {
                let thompson = matches!(cfg.kind, MethodKind::Ts | MethodKind::TsNs);
                let decay = if matches!(cfg.kind, MethodKind::MmNs | MethodKind::TsNs) {
                    Some(cfg.decay)
                } else {
                    None
                };
                Policy::Bandit(BanditState::new(pool, thompson, decay, seed))
            }
            MethodKind::Hedge => Policy::Hedge(HedgeState::new(pool, cfg.hedge_beta)),
        }
    }

    fn select(&mut self, judged: &BTreeSet<String>) -> Option<String> {
        match self {
            Policy::Static(s) => s.select(judged),
            Policy::Mtf(s) => s.select(judged),
            Policy::Bandit(s) => s.select(judged),
            Policy::Hedge(s) => s.select(judged),
        }
    }

    fn feed(&mut self, doc: &str, relevant: bool) {
        match self {
            Policy::Static(_) => {}
            Policy::Mtf(s) => s.feed(relevant),
            Policy::Bandit(s) => s.feed(relevant),
            Policy::Hedge(s) => s.feed(doc, relevant),
        }
    }
}

/// A precomputed judging order.
struct StaticOrder {
    order: Vec<String>,
    pos: usize,
}

impl StaticOrder {
    fn new(order: Vec<String>) -> Self {
        StaticOrder { order, pos: 0 }
    }

    fn select(&mut self, judged: &BTreeSet<String>) -> Option<String> {
        while self.pos < self.order.len() {
            let doc = &self.order[self.pos];
            self.pos += 1;
            if !judged.contains(doc) {
                return Some(doc.clone());
            }
        }
        None
    }
}

/// Top-k order: the smallest depth k′ whose per-run top-k′ union reaches the
/// quota (the full pooling depth if none does), served in ascending doc-id
/// order.
fn topk_order(pool: &TopicPool, quota: usize) -> Vec<String> {
    let mut minrank: BTreeMap<&str, usize> = BTreeMap::new();
    for run in &pool.runs {
        for d in &run.docs {
            if d.rank <= pool.depth {
                minrank
                    .entry(d.doc.as_str())
                    .and_modify(|r| *r = (*r).min(d.rank))
                    .or_insert(d.rank);
            }
        }
    }
    let mut ranks: Vec<usize> = minrank.values().copied().collect();
    ranks.sort_unstable();
    let kprime = if quota > 0 && quota <= ranks.len() { ranks[quota - 1] } else { pool.depth };
    // BTreeMap iteration gives ascending doc-id order directly.
    minrank
        .iter()
        .filter(|(_, &r)| r <= kprime)
        .map(|(doc, _)| doc.to_string())
        .collect()
}

/// NTCIR order: by descending count of runs ranking the document within
/// `depth`, then ascending sum of its ranks over the runs that retrieved
/// it, then ascending doc-id.
fn ntcir_order(pool: &TopicPool, depth: usize) -> Vec<String> {
    let mut stats: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for run in &pool.runs {
        for d in &run.docs {
            let entry = stats.entry(d.doc.as_str()).or_insert((0, 0));
            if d.rank <= depth {
                entry.0 += 1;
            }
            entry.1 += d.rank;
        }
    }
    let mut order: Vec<(&str, usize, usize)> =
        stats.iter().map(|(doc, &(count, ranksum))| (*doc, count, ranksum)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)).then(a.0.cmp(b.0)));
    order.into_iter().map(|(doc, _, _)| doc.to_string()).collect()
}

/// MoveToFront queue over runs.
struct MtfState<'a> {
    pool: &'a TopicPool,
    /// Run indices still holding unjudged documents, front = next to serve.
    queue: VecDeque<usize>,
    /// Per-run cursor into its restricted doc list.
    cursors: Vec<usize>,
    /// Run that supplied the last judged document.
    last: Option<usize>,
}

impl<'a> MtfState<'a> {
    fn new(pool: &'a TopicPool) -> Self {
        MtfState {
            pool,
            queue: (0..pool.runs.len()).collect(),
            cursors: vec![0; pool.runs.len()],
            last: None,
        }
    }

    fn select(&mut self, judged: &BTreeSet<String>) -> Option<String> {
        while let Some(&run) = self.queue.front() {
            let docs = &self.pool.runs[run].docs;
            let cur = &mut self.cursors[run];
            while *cur < docs.len() && judged.contains(&docs[*cur].doc) {
                *cur += 1;
            }
            if *cur < docs.len() {
                self.last = Some(run);
                return Some(docs[*cur].doc.clone());
            }
            self.queue.pop_front();
        }
        None
    }

    fn feed(&mut self, relevant: bool) {
        if !relevant {
            if let Some(run) = self.last.take() {
                debug_assert_eq!(self.queue.front(), Some(&run));
                self.queue.pop_front();
                self.queue.push_back(run);
            }
        }
    }
}

/// One Beta-Bernoulli arm per run.
struct Arm {
    alpha: f64,
    beta: f64,
    cursor: usize,
}

impl Arm {
    fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

struct BanditState<'a> {
    pool: &'a TopicPool,
    arms: Vec<Arm>,
    thompson: bool,
    /// Evidence decay applied to the played arm before its update.
    decay: Option<f64>,
    rng: ChaCha8Rng,
    last: Option<usize>,
}

impl<'a> BanditState<'a> {
    fn new(pool: &'a TopicPool, thompson: bool, decay: Option<f64>, seed: u64) -> Self {
        BanditState {
            pool,
            arms: pool.runs.iter().map(|_| Arm { alpha: 1.0, beta: 1.0, cursor: 0 }).collect(),
            thompson,
            decay,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last: None,
        }
    }

    /// Advances `arm`'s cursor past judged documents; true if a document
    /// remains.
    fn has_unjudged(&mut self, arm: usize, judged: &BTreeSet<String>) -> bool {
        let docs = &self.pool.runs[arm].docs;
        let cur = &mut self.arms[arm].cursor;
        while *cur < docs.len() && judged.contains(&docs[*cur].doc) {
            *cur += 1;
        }
        *cur < docs.len()
    }

    fn select(&mut self, judged: &BTreeSet<String>) -> Option<String> {
        // Arms are visited in ascending tag order (the pool's run order), so
        // the strict > keeps the smallest tag on ties, and Thompson draws
        // consume the RNG in a reproducible order.
        let mut best: Option<(usize, f64)> = None;
        for arm in 0..self.arms.len() {
            if !self.has_unjudged(arm, judged) {
                continue;
            }
            let value = if self.thompson {
                let (alpha, beta) = (self.arms[arm].alpha, self.arms[arm].beta);
                Beta::new(alpha, beta).expect("posterior parameters are at least 1").sample(&mut self.rng)
            } else {
                self.arms[arm].mean()
            };
            if best.map_or(true, |(_, v)| value > v) {
                best = Some((arm, value));
            }
        }
        let (arm, _) = best?;
        self.last = Some(arm);
        let a = &self.arms[arm];
        Some(self.pool.runs[arm].docs[a.cursor].doc.clone())
    }

    fn feed(&mut self, relevant: bool) {
        let Some(arm) = self.last.take() else { return };
        let a = &mut self.arms[arm];
        if let Some(decay) = self.decay {
            a.alpha = 1.0 + decay * (a.alpha - 1.0);
            a.beta = 1.0 + decay * (a.beta - 1.0);
        }
        if relevant {
            a.alpha += 1.0;
        } else {
            a.beta += 1.0;
        }
    }
}

/// Multiplicative weights over runs.
struct HedgeState<'a> {
    pool: &'a TopicPool,
    beta: f64,
    weights: Vec<f64>,
    /// Per candidate: the (run index, confidence) pairs of the runs that
    /// ranked it within depth. Confidence is (depth − rank + 1)/depth.
    endorsements: BTreeMap<&'a str, Vec<(usize, f64)>>,
}

impl<'a> HedgeState<'a> {
    fn new(pool: &'a TopicPool, beta: f64) -> Self {
        let mut endorsements: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
        for doc in &pool.candidates {
            endorsements.insert(doc.as_str(), Vec::new());
        }
        let k = pool.depth as f64;
        for (run, pr) in pool.runs.iter().enumerate() {
            for d in &pr.docs {
                if d.rank <= pool.depth {
                    let confidence = (k - d.rank as f64 + 1.0) / k;
                    endorsements.get_mut(d.doc.as_str()).expect("candidate").push((run, confidence));
                }
            }
        }
        HedgeState { pool, beta, weights: vec![1.0; pool.runs.len()], endorsements }
    }

    fn confidence(&self, run: usize, doc: &str) -> f64 {
        self.endorsements[doc]
            .iter()
            .find(|(r, _)| *r == run)
            .map_or(0.0, |(_, c)| *c)
    }

    fn select(&mut self, judged: &BTreeSet<String>) -> Option<String> {
        // Iteration ascends doc-ids, so strict > implements the doc-id
        // tie-break for free.
        let mut best: Option<(&str, f64)> = None;
        for (doc, runs) in &self.endorsements {
            if judged.contains(*doc) {
                continue;
            }
            let score: f64 = runs.iter().map(|(r, c)| self.weights[*r] * c).sum();
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((doc, score));
            }
        }
        best.map(|(doc, _)| doc.to_string())
    }

    fn feed(&mut self, doc: &str, relevant: bool) {
        let rel = if relevant { 1.0 } else { 0.0 };
        for run in 0..self.weights.len() {
            let loss = (rel - self.confidence(run, doc)).abs();
            self.weights[run] *= self.beta.powf(loss);
        }
        let total: f64 = self.weights.iter().sum();
        let scale = self.pool.runs.len() as f64 / total;
        self.weights.iter_mut().for_each(|w| *w *= scale);
    }
}
