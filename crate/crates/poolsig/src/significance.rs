//! Randomized Tukey HSD and ranking comparison.
//!
//! The test decides which system pairs differ significantly on a
//! topic-by-system score matrix while controlling the family-wise error
//! rate: each permutation shuffles the scores within every topic row, and a
//! pair's p-value is the fraction of permutations whose max-minus-min range
//! of column means reaches that pair's observed mean difference. Using the
//! range as the reference statistic for every pair is what distinguishes
//! this from running one permutation test per pair.
//!
//! All comparisons run on column sums rather than means (same order, fewer
//! roundings), and every permutation derives its per-row RNG stream from
//! the master seed, the permutation index, and the topic id. Rows are also
//! accumulated in sorted-topic order. Together this makes p-values
//! bit-identical across worker counts and row orderings.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::ScoreMatrix;
use crate::util::{derive_seed, fnv1a64, format_score};

/// Unordered significant pairs as (i, j) indices into a system list, i < j.
pub type PairSet = BTreeSet<(usize, usize)>;

/// Parameters of the randomized test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignificanceConfig {
    /// Significance level for [`significant_pairs`].
    pub alpha: f64,
    /// Number of random permutations B.
    pub permutations: u64,
    /// Seed all permutation streams derive from.
    pub master_seed: u64,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        SignificanceConfig { alpha: 0.05, permutations: 1_000_000, master_seed: 0 }
    }
}

impl SignificanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.permutations == 0 {
            return Err(Error::Config("permutation count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Symmetric matrix of per-pair p-values.
///
/// Counts are kept as exact integers; a p-value is its count divided by the
/// permutation count, so every entry is an integer multiple of 1/B and the
/// diagonal is exactly 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwisePValues {
    systems: Vec<String>,
    counts: Vec<u64>,
    permutations: u64,
}

impl PairwisePValues {
    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn n_systems(&self) -> usize {
        self.systems.len()
    }

    pub fn permutations(&self) -> u64 {
        self.permutations
    }

    /// P-value of the pair (i, j); 1 on the diagonal.
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.count(i, j) as f64 / self.permutations as f64
    }

    /// Number of permutations at least as extreme as the observed (i, j)
    /// difference.
    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.systems.len() + j]
    }

    /// Writes the matrix as CSV with a system-id header row and column.
    pub fn to_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        write!(out, "system")?;
        for sys in &self.systems {
            write!(out, ",{sys}")?;
        }
        writeln!(out)?;
        for (i, sys) in self.systems.iter().enumerate() {
            write!(out, "{sys}")?;
            for j in 0..self.systems.len() {
                write!(out, ",{}", format_score(self.p(i, j)))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    fn from_pair_counts(systems: Vec<String>, pair: &[u64], permutations: u64) -> Self {
        let n = systems.len();
        let mut counts = vec![0u64; n * n];
        for i in 0..n {
            counts[i * n + i] = permutations;
        }
        let mut idx = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                counts[i * n + j] = pair[idx];
                counts[j * n + i] = pair[idx];
                idx += 1;
            }
        }
        PairwisePValues { systems, counts, permutations }
    }
}

/// Per-permutation scratch plus the integer histogram being accumulated.
struct FoldState {
    hist: Vec<u64>,
    colsums: Vec<f64>,
    row: Vec<f64>,
}

/// Shared row-shuffling setup for both permutation tests.
struct PermSetup {
    /// Row indices in sorted-topic order.
    order: Vec<usize>,
    /// FNV of each topic id, indexed like the matrix rows.
    topic_hash: Vec<u64>,
    /// Observed column sums, accumulated in `order`.
    obs: Vec<f64>,
}

fn perm_setup(x: &ScoreMatrix) -> Result<PermSetup> {
    let unique: BTreeSet<&str> = x.topics().iter().map(String::as_str).collect();
    if unique.len() != x.n_topics() {
        return Err(Error::Config("duplicate topic ids in score matrix".into()));
    }
    let mut order: Vec<usize> = (0..x.n_topics()).collect();
    order.sort_by(|&a, &b| x.topics()[a].cmp(&x.topics()[b]));
    let topic_hash: Vec<u64> = x.topics().iter().map(|t| fnv1a64(t.as_bytes())).collect();
    let mut obs = vec![0.0; x.n_systems()];
    for &t in &order {
        for (s, v) in obs.iter_mut().zip(x.row(t)) {
            *s += v;
        }
    }
    Ok(PermSetup { order, topic_hash, obs })
}

fn check_dims(x: &ScoreMatrix) -> Result<()> {
    if x.n_topics() < 2 {
        return Err(Error::Config(format!("need at least 2 topics, got {}", x.n_topics())));
    }
    if x.n_systems() < 2 {
        return Err(Error::Config(format!("need at least 2 systems, got {}", x.n_systems())));
    }
    Ok(())
}

/// Shuffles every row (seeded per permutation and topic) and accumulates
/// column sums in canonical row order.
fn permuted_colsums(x: &ScoreMatrix, setup: &PermSetup, seed: u64, k: u64, f: &mut FoldState) {
    f.colsums.iter_mut().for_each(|s| *s = 0.0);
    for &t in &setup.order {
        f.row.copy_from_slice(x.row(t));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[k, setup.topic_hash[t]]));
        f.row.shuffle(&mut rng);
        for (s, v) in f.colsums.iter_mut().zip(&f.row) {
            *s += v;
        }
    }
}

/// The randomized Tukey HSD test.
///
/// For each of B permutations, every topic row of `x` is shuffled
/// independently and the statistic d′ = max column sum − min column sum is
/// compared against every pair's observed |sum difference|; the pair's
/// count increments when d′ reaches it. P-values are counts divided by B
/// once at the end.
///
/// Counting at-least-as-extreme permutations (≥, not >) means a pair with
/// zero observed difference gets p = 1 rather than a spurious significance.
pub fn tukey_hsd(x: &ScoreMatrix, cfg: &SignificanceConfig) -> Result<PairwisePValues> {
    cfg.validate()?;
    check_dims(x)?;
    let setup = perm_setup(x)?;
    let n = x.n_systems();

    // Pair diffs sorted ascending; a permutation with statistic d′ covers
    // exactly the pairs with diff ≤ d′, so one histogram of
    // partition-point indices replaces per-pair counters.
    let mut diffs: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            diffs.push((setup.obs[i] - setup.obs[j]).abs());
        }
    }
    let mut sorted = diffs.clone();
    sorted.sort_by(f64::total_cmp);

    let nd = sorted.len();
    let hist = (0..cfg.permutations)
        .into_par_iter()
        .fold(
            || FoldState { hist: vec![0u64; nd + 1], colsums: vec![0.0; n], row: vec![0.0; n] },
            |mut f, k| {
                permuted_colsums(x, &setup, cfg.master_seed, k, &mut f);
                let mut max = f64::NEG_INFINITY;
                let mut min = f64::INFINITY;
                for &s in &f.colsums {
                    max = max.max(s);
                    min = min.min(s);
                }
                let dprime = max - min;
                let pp = sorted.partition_point(|&d| d <= dprime);
                f.hist[pp] += 1;
                f
            },
        )
        .map(|f| f.hist)
        .reduce(
            || vec![0u64; nd + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );

    // suffix[q] = permutations whose partition point exceeds q, i.e. whose
    // d′ reached the q-th smallest diff.
    let mut suffix = vec![0u64; nd + 2];
    for q in (0..=nd).rev() {
        suffix[q] = suffix[q + 1] + hist[q];
    }
    let pair: Vec<u64> = diffs
        .iter()
        .map(|&d| {
            let lb = sorted.partition_point(|&v| v < d);
            suffix[lb + 1]
        })
        .collect();
    Ok(PairwisePValues::from_pair_counts(x.systems().to_vec(), &pair, cfg.permutations))
}

/// Uncorrected per-pair permutation tests on the same permutation streams.
///
/// Each pair is compared against its own shuffled |sum difference| instead
/// of the global range, so nothing controls the family-wise error rate.
/// This exists as the contrast baseline and as the input to
/// [`bonferroni_pairs`].
pub fn pairwise_permutation(x: &ScoreMatrix, cfg: &SignificanceConfig) -> Result<PairwisePValues> {
    cfg.validate()?;
    check_dims(x)?;
    let setup = perm_setup(x)?;
    let n = x.n_systems();
    let npairs = n * (n - 1) / 2;

    let mut obs_diff = Vec::with_capacity(npairs);
    for i in 0..n {
        for j in (i + 1)..n {
            obs_diff.push((setup.obs[i] - setup.obs[j]).abs());
        }
    }

    let pair = (0..cfg.permutations)
        .into_par_iter()
        .fold(
            || FoldState { hist: vec![0u64; npairs], colsums: vec![0.0; n], row: vec![0.0; n] },
            |mut f, k| {
                permuted_colsums(x, &setup, cfg.master_seed, k, &mut f);
                let mut idx = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        if (f.colsums[i] - f.colsums[j]).abs() >= obs_diff[idx] {
                            f.hist[idx] += 1;
                        }
                        idx += 1;
                    }
                }
                f
            },
        )
        .map(|f| f.hist)
        .reduce(
            || vec![0u64; npairs],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    Ok(PairwisePValues::from_pair_counts(x.systems().to_vec(), &pair, cfg.permutations))
}

/// Pairs with p < alpha (strict: p = alpha exactly is not significant).
pub fn significant_pairs(p: &PairwisePValues, alpha: f64) -> PairSet {
    let n = p.n_systems();
    let mut pairs = PairSet::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if p.p(i, j) < alpha {
                pairs.insert((i, j));
            }
        }
    }
    pairs
}

/// Bonferroni cross-check: significant when p·(number of pairs) < alpha.
/// Feed it uncorrected per-pair p-values from [`pairwise_permutation`].
pub fn bonferroni_pairs(p: &PairwisePValues, alpha: f64) -> PairSet {
    let n = p.n_systems();
    let npairs = (n * (n - 1) / 2) as f64;
    let mut pairs = PairSet::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if p.p(i, j) * npairs < alpha {
                pairs.insert((i, j));
            }
        }
    }
    pairs
}

/// Kendall's tau-a between two total orders of the same items.
///
/// τ = (concordant − discordant) / (n(n−1)/2). The rankings must be
/// permutations of one another.
pub fn kendall_tau(gold_ranking: &[String], observed_ranking: &[String]) -> Result<f64> {
    let n = gold_ranking.len();
    if n < 2 {
        return Err(Error::Config("rankings need at least 2 items".into()));
    }
    if observed_ranking.len() != n
        || gold_ranking.iter().collect::<BTreeSet<_>>()
            != observed_ranking.iter().collect::<BTreeSet<_>>()
    {
        return Err(Error::Config("rankings are not over the same items".into()));
    }
    let pos: std::collections::BTreeMap<&str, usize> =
        observed_ranking.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            if pos[gold_ranking[i].as_str()] < pos[gold_ranking[j].as_str()] {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    Ok((concordant - discordant) as f64 / (n * (n - 1) / 2) as f64)
}

/// Systems ordered by descending mean-over-topics score, exact ties broken
/// by ascending system id.
pub fn rank_systems(x: &ScoreMatrix) -> Vec<String> {
    let means = x.system_means();
    let mut idx: Vec<usize> = (0..x.n_systems()).collect();
    idx.sort_by(|&a, &b| {
        means[b].total_cmp(&means[a]).then_with(|| x.systems()[a].cmp(&x.systems()[b]))
    });
    idx.into_iter().map(|i| x.systems()[i].clone()).collect()
}
