//! Effectiveness measures and the topic-by-system score matrix.
//!
//! Two measures are supported: average precision (AP) and normalized
//! discounted cumulative gain (NDCG), both computed per topic against the
//! judgments in force. Unjudged documents count as non-relevant; there is no
//! condensed-list treatment.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::trec::{Qrels, RunSet};
use crate::util::format_score;

/// Which effectiveness measure to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    /// Average precision over binarized relevance.
    Ap,
    /// Normalized discounted cumulative gain with linear gain.
    Ndcg,
}

/// A fully parameterized measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Measure {
    pub kind: MeasureKind,
    /// Evaluation depth; `None` scores the full retrieved list.
    pub cutoff: Option<usize>,
    /// Grade at or above which a document counts as relevant when the
    /// measure binarizes (AP). Graded judgments with a different notion of
    /// "relevant" (e.g. grade ≥ 2) are handled by raising this.
    pub rel_threshold: u32,
}

impl Measure {
    /// Average precision over the full list, relevant = grade ≥ 1.
    pub fn map() -> Self {
        Measure { kind: MeasureKind::Ap, cutoff: None, rel_threshold: 1 }
    }

    /// NDCG over the full list.
    pub fn ndcg() -> Self {
        Measure { kind: MeasureKind::Ndcg, cutoff: None, rel_threshold: 1 }
    }

    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if self.cutoff == Some(0) {
            return Err(Error::Config("measure cutoff must be at least 1".into()));
        }
        if self.rel_threshold == 0 {
            return Err(Error::Config(
                "relevance threshold must be at least 1; explicit grade-0 judgments are non-relevant".into(),
            ));
        }
        Ok(())
    }

    /// Scores one ranked list against one topic's judgments.
    ///
    /// The clamp guards against values like 1 + 1e-16 from float rounding;
    /// both measures are bounded by 1 in exact arithmetic.
    pub fn score<'a, I>(&self, ranking: I, topic_qrels: &BTreeMap<String, u32>) -> f64
    where
        I: IntoIterator<Item = &'a str>,
    {
        let v = match self.kind {
            MeasureKind::Ap => match self.cutoff {
                None => average_precision(ranking, topic_qrels, self.rel_threshold),
                Some(k) => {
                    average_precision(ranking.into_iter().take(k), topic_qrels, self.rel_threshold)
                }
            },
            MeasureKind::Ndcg => ndcg(ranking, topic_qrels, self.cutoff),
        };
        v.clamp(0.0, 1.0)
    }

    /// Lowercase label used in config files, CLI arguments, and file names:
    /// `map`, `ndcg`, `ndcg@20`.
    pub fn label(&self) -> String {
        let base = match self.kind {
            MeasureKind::Ap => "map",
            MeasureKind::Ndcg => "ndcg",
        };
        match self.cutoff {
            None => base.to_string(),
            Some(k) => format!("{base}@{k}"),
        }
    }
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Measure {
    type Err = Error;

    /// Accepts `map`, `ap`, `ndcg`, each with an optional `@k` suffix.
    fn from_str(s: &str) -> Result<Self> {
        let (name, cutoff) = match s.split_once('@') {
            Some((n, k)) => {
                let k: usize = k.parse().map_err(|_| {
                    Error::Config(format!("bad measure cutoff in {s:?}"))
                })?;
                (n, Some(k))
            }
            None => (s, None),
        };
        let kind = match name.to_ascii_lowercase().as_str() {
            "map" | "ap" => MeasureKind::Ap,
            "ndcg" => MeasureKind::Ndcg,
            _ => return Err(Error::Config(format!("unknown measure {s:?}"))),
        };
        let m = Measure { kind, cutoff, rel_threshold: 1 };
        m.validate()?;
        Ok(m)
    }
}

/// Average precision of a ranked list.
///
/// `AP = (1/R) Σ_k precision@k` over the ranks k holding a relevant
/// document, where R is the number of relevant documents in `topic_qrels`
/// (grade ≥ `threshold`). Documents absent from `topic_qrels` are
/// non-relevant. Returns 0 when R = 0.
///
/// ```
/// use std::collections::BTreeMap;
/// use poolsig::measures::average_precision;
///
/// let qrels: BTreeMap<String, u32> =
///     [("d1".into(), 1), ("d3".into(), 1)].into_iter().collect();
/// let ap = average_precision(["d1", "d2", "d3"], &qrels, 1);
/// assert!((ap - 5.0 / 6.0).abs() < 1e-12);
/// ```
pub fn average_precision<'a, I>(ranking: I, topic_qrels: &BTreeMap<String, u32>, threshold: u32) -> f64
where
    I: IntoIterator<Item = &'a str>,
{
    let r = topic_qrels.values().filter(|&&g| g >= threshold).count();
    if r == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (idx, doc) in ranking.into_iter().enumerate() {
        if topic_qrels.get(doc).is_some_and(|&g| g >= threshold) {
            hits += 1;
            sum += hits as f64 / (idx + 1) as f64;
        }
    }
    sum / r as f64
}

/// NDCG of a ranked list with linear gain.
///
/// `DCG = Σ_{k ≤ cutoff} grade(doc_k)/log2(k+1)` with grade 0 for unjudged
/// documents; the ideal DCG uses the grades in `topic_qrels` sorted
/// descending, truncated at the cutoff. Returns 0 when the ideal DCG is 0.
///
/// ```
/// use std::collections::BTreeMap;
/// use poolsig::measures::ndcg;
///
/// let qrels: BTreeMap<String, u32> = [("d2".into(), 3)].into_iter().collect();
/// let v = ndcg(["d1", "d2"], &qrels, None);
/// assert!((v - 1.0 / 3.0_f64.log2()).abs() < 1e-12);
/// ```
pub fn ndcg<'a, I>(ranking: I, topic_qrels: &BTreeMap<String, u32>, cutoff: Option<usize>) -> f64
where
    I: IntoIterator<Item = &'a str>,
{
    let limit = cutoff.unwrap_or(usize::MAX);
    let mut gains: Vec<u32> = topic_qrels.values().copied().collect();
    gains.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = gains
        .iter()
        .take(limit)
        .enumerate()
        .map(|(i, &g)| f64::from(g) / ((i + 2) as f64).log2())
        .sum();
    if idcg == 0.0 {
        return 0.0;
    }
    let mut dcg = 0.0;
    for (i, doc) in ranking.into_iter().take(limit).enumerate() {
        if let Some(&g) = topic_qrels.get(doc) {
            dcg += f64::from(g) / ((i + 2) as f64).log2();
        }
    }
    dcg / idcg
}

/// A topic-by-system matrix of effectiveness scores.
///
/// Row t, column i holds the score of system i on topic t. Rows follow the
/// order of the topic list and columns the order of the system list given at
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    topics: Vec<String>,
    systems: Vec<String>,
    values: Vec<f64>,
}

impl ScoreMatrix {
    /// Builds a matrix from row-major values; validates the dimensions and
    /// that every cell lies in [0, 1].
    pub fn new(topics: Vec<String>, systems: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != topics.len() * systems.len() {
            return Err(Error::Validation(format!(
                "score matrix size mismatch: {} topics x {} systems != {} values",
                topics.len(),
                systems.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!("score {v} outside [0, 1]")));
        }
        Ok(ScoreMatrix { topics, systems, values })
    }

    pub fn n_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn n_systems(&self) -> usize {
        self.systems.len()
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    /// Score of system `i` on topic `t`.
    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.values[t * self.systems.len() + i]
    }

    /// One topic's scores across all systems.
    pub fn row(&self, t: usize) -> &[f64] {
        let n = self.systems.len();
        &self.values[t * n..(t + 1) * n]
    }

    /// Mean score per system over all topics, in column order.
    ///
    /// Sums run down each column in row order, so the result does not
    /// depend on how the matrix was produced.
    pub fn system_means(&self) -> Vec<f64> {
        let n = self.systems.len();
        let m = self.topics.len();
        let mut sums = vec![0.0; n];
        for row in self.values.chunks_exact(n) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums.iter_mut().for_each(|s| *s /= m as f64);
        sums
    }

    /// Writes the matrix as CSV: a header of system ids, then one row per
    /// topic with the topic id in the first column.
    pub fn to_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        write!(out, "topic")?;
        for sys in &self.systems {
            write!(out, ",{sys}")?;
        }
        writeln!(out)?;
        for (t, topic) in self.topics.iter().enumerate() {
            write!(out, "{topic}")?;
            for v in self.row(t) {
                write!(out, ",{}", format_score(*v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Scores every (topic, system) cell of `runs` under `qrels`.
///
/// A system with no ranking for a topic scores 0, as does a topic with no
/// judgments. Cells are independent; rows are computed in parallel with a
/// result identical to the sequential one.
pub fn score_matrix(
    runs: &RunSet,
    qrels: &Qrels,
    measure: &Measure,
    systems: &[String],
    topics: &[String],
) -> Result<ScoreMatrix> {
    measure.validate()?;
    if topics.is_empty() {
        return Err(Error::Config("empty topic list".into()));
    }
    for sys in systems {
        if !runs.contains_system(sys) {
            return Err(Error::Config(format!("unknown system id: {sys}")));
        }
    }
    let empty = BTreeMap::new();
    let n = systems.len();
    let mut values = vec![0.0; topics.len() * n];
    values
        .par_chunks_exact_mut(n.max(1))
        .zip(topics.par_iter())
        .for_each(|(row, topic)| {
            let topic_qrels = qrels.topic_judgments(topic).unwrap_or(&empty);
            for (cell, sys) in row.iter_mut().zip(systems) {
                if let Some(docs) = runs.ranking(sys, topic) {
                    *cell = measure.score(docs.iter().map(|d| d.doc.as_str()), topic_qrels);
                }
            }
        });
    ScoreMatrix::new(topics.to_vec(), systems.to_vec(), values)
}
