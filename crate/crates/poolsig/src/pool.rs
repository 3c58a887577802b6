//! Depth-limited judgment pools.
//!
//! A pool for a topic is the union of the top-`depth` documents of every
//! pooling run. The pool fixes the candidate universe for adjudication:
//! only pooled documents can ever be judged.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trec::RunSet;

/// One document of a run's pooled ranking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PooledDoc {
    pub doc: String,
    /// Rank within the original (unrestricted) run.
    pub rank: usize,
}

/// One run's ranking restricted to the pool candidates, in rank order.
///
/// The restriction keeps original ranks, so documents another run pooled
/// may appear here with rank > depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolRun {
    pub tag: String,
    pub docs: Vec<PooledDoc>,
}

/// The judgment pool of one topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicPool {
    pub topic: String,
    /// Pooling depth the candidates were drawn with.
    pub depth: usize,
    /// Contributing runs in ascending tag order.
    pub runs: Vec<PoolRun>,
    /// Union of per-run top-`depth` documents.
    pub candidates: BTreeSet<String>,
}

impl TopicPool {
    /// Number of pooled documents.
    pub fn size(&self) -> usize {
        self.candidates.len()
    }
}

/// Judgments allowed per topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub per_topic: usize,
}

impl Budget {
    pub fn new(per_topic: usize) -> Result<Self> {
        if per_topic == 0 {
            return Err(Error::Config("budget must be at least 1 judgment per topic".into()));
        }
        Ok(Budget { per_topic })
    }
}

/// Size statistics over a set of pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolStats {
    pub topics: usize,
    pub total: usize,
    pub max: usize,
    pub min: usize,
}

impl PoolStats {
    pub fn mean(&self) -> f64 {
        if self.topics == 0 {
            0.0
        } else {
            self.total as f64 / self.topics as f64
        }
    }
}

pub fn pool_stats(pools: &[TopicPool]) -> PoolStats {
    PoolStats {
        topics: pools.len(),
        total: pools.iter().map(TopicPool::size).sum(),
        max: pools.iter().map(TopicPool::size).max().unwrap_or(0),
        min: pools.iter().map(TopicPool::size).min().unwrap_or(0),
    }
}

/// Builds one pool per requested topic.
///
/// Returns the pools plus the list of topics no run retrieved anything for;
/// those pools are empty and cannot be adjudicated, but keeping them makes
/// the topic count explicit for the caller.
///
/// ```
/// use poolsig::pool::build_pools;
/// use poolsig::trec::parse_runs;
///
/// let runs = parse_runs(
///     ["1 Q0 d1 1 2.0 A", "1 Q0 d2 2 1.0 A", "1 Q0 d3 1 1.0 B"],
///     None,
/// ).unwrap();
/// let (pools, missing) = build_pools(&runs, 1, &["1".into()]).unwrap();
/// assert!(missing.is_empty());
/// assert_eq!(pools[0].size(), 2); // d1 from A, d3 from B
/// ```
pub fn build_pools(
    pooling_runs: &RunSet,
    depth: usize,
    topics: &[String],
) -> Result<(Vec<TopicPool>, Vec<String>)> {
    if depth == 0 {
        return Err(Error::Config("pool depth must be at least 1".into()));
    }
    let systems = pooling_runs.systems();
    let mut pools = Vec::with_capacity(topics.len());
    let mut missing = Vec::new();
    for topic in topics {
        let mut candidates = BTreeSet::new();
        for sys in &systems {
            if let Some(docs) = pooling_runs.ranking(sys, topic) {
                for d in docs.iter().take(depth) {
                    candidates.insert(d.doc.clone());
                }
            }
        }
        let mut runs = Vec::new();
        for sys in &systems {
            if let Some(docs) = pooling_runs.ranking(sys, topic) {
                let restricted: Vec<PooledDoc> = docs
                    .iter()
                    .filter(|d| candidates.contains(&d.doc))
                    .map(|d| PooledDoc { doc: d.doc.clone(), rank: d.rank })
                    .collect();
                if !restricted.is_empty() {
                    runs.push(PoolRun { tag: sys.to_string(), docs: restricted });
                }
            }
        }
        if candidates.is_empty() {
            missing.push(topic.clone());
        }
        pools.push(TopicPool { topic: topic.clone(), depth, runs, candidates });
    }
    Ok((pools, missing))
}
