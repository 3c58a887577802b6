//! Agreement between the significance structures of two qrels.
//!
//! Every system pair gets a comparison outcome under the full judgments and
//! under the reduced ones; this module classifies the joint outcomes,
//! scores them (precision, recall, rank correlation, publication bias), and
//! summarizes the score differences of the pairs the two sides disagree on.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::ScoreMatrix;
use crate::significance::{kendall_tau, rank_systems, PairSet};
use crate::util::format_score;

/// Comparison outcome of an ordered pair (i, j): direction plus whether the
/// difference is statistically significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    /// i ranks above j, not significantly (>).
    Gt,
    /// i ranks above j significantly (≫).
    Gg,
    /// j ranks above i, not significantly (<).
    Lt,
    /// j ranks above i significantly (≪).
    Ll,
}

impl Outcome {
    fn new(i_better: bool, significant: bool) -> Self {
        match (i_better, significant) {
            (true, true) => Outcome::Gg,
            (true, false) => Outcome::Gt,
            (false, true) => Outcome::Ll,
            (false, false) => Outcome::Lt,
        }
    }

    pub fn significant(self) -> bool {
        matches!(self, Outcome::Gg | Outcome::Ll)
    }

    pub fn i_better(self) -> bool {
        matches!(self, Outcome::Gt | Outcome::Gg)
    }
}

/// One pair's outcome; i < j index into the owning set's system list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub i: usize,
    pub j: usize,
    pub c: Outcome,
}

/// Outcomes of all n(n−1)/2 pairs over one system list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletSet {
    systems: Vec<String>,
    triplets: Vec<Triplet>,
}

impl TripletSet {
    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    /// Triplets in ascending (i, j) order.
    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    /// The system ids of a triplet.
    pub fn pair_ids(&self, t: &Triplet) -> (&str, &str) {
        (&self.systems[t.i], &self.systems[t.j])
    }

    /// Pairs carrying significance, with their direction.
    pub fn significant(&self) -> Vec<Triplet> {
        self.triplets.iter().filter(|t| t.c.significant()).copied().collect()
    }
}

/// Derives each pair's outcome from the matrix ranking and a significant
/// pair set.
///
/// Direction comes from the position in [`rank_systems`] order, so exactly
/// tied means resolve by ascending system id and the direction is a pure
/// function of the ranking.
pub fn build_triplets(x: &ScoreMatrix, sig: &PairSet) -> TripletSet {
    let ranking = rank_systems(x);
    let index: BTreeMap<&str, usize> =
        x.systems().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut pos = vec![0usize; x.n_systems()];
    for (p, sys) in ranking.iter().enumerate() {
        pos[index[sys.as_str()]] = p;
    }
    let n = x.n_systems();
    let mut triplets = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let c = Outcome::new(pos[i] < pos[j], sig.contains(&(i, j)));
            triplets.push(Triplet { i, j, c });
        }
    }
    TripletSet { systems: x.systems().to_vec(), triplets }
}

/// Joint outcome counts over all pairs.
///
/// The six named categories cover every pair where at least one side claims
/// significance; `neither` counts the rest (same or opposite direction, no
/// significance anywhere) and is reported separately.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementCounts {
    /// Both significant, same direction.
    pub aa: u64,
    /// Both significant, opposite directions.
    pub ad: u64,
    /// Gold significant, reduced not; same direction.
    pub ma_g: u64,
    /// Reduced significant, gold not; same direction.
    pub ma_l: u64,
    /// Gold significant, reduced not; opposite directions.
    pub md_g: u64,
    /// Reduced significant, gold not; opposite directions.
    pub md_l: u64,
    /// No significance on either side.
    pub neither: u64,
}

impl AgreementCounts {
    /// Pairs significant under the gold qrels.
    pub fn n_gold_sig(&self) -> u64 {
        self.aa + self.ad + self.ma_g + self.md_g
    }

    /// Pairs significant under the reduced qrels.
    pub fn n_low_sig(&self) -> u64 {
        self.aa + self.ad + self.ma_l + self.md_l
    }

    /// All pairs, the six categories plus `neither`.
    pub fn total(&self) -> u64 {
        self.aa + self.ad + self.ma_g + self.ma_l + self.md_g + self.md_l + self.neither
    }
}

fn check_same_systems(gold: &TripletSet, low: &TripletSet) -> Result<()> {
    if gold.systems != low.systems {
        return Err(Error::Validation(
            "triplet sets cover different system lists".into(),
        ));
    }
    Ok(())
}

/// Classifies every pair's joint (gold, reduced) outcome.
pub fn classify(gold: &TripletSet, low: &TripletSet) -> Result<AgreementCounts> {
    check_same_systems(gold, low)?;
    let mut counts = AgreementCounts::default();
    for (g, l) in gold.triplets.iter().zip(&low.triplets) {
        debug_assert_eq!((g.i, g.j), (l.i, l.j));
        let same_dir = g.c.i_better() == l.c.i_better();
        match (g.c.significant(), l.c.significant(), same_dir) {
            (true, true, true) => counts.aa += 1,
            (true, true, false) => counts.ad += 1,
            (true, false, true) => counts.ma_g += 1,
            (true, false, false) => counts.md_g += 1,
            (false, true, true) => counts.ma_l += 1,
            (false, true, false) => counts.md_l += 1,
            (false, false, _) => counts.neither += 1,
        }
    }
    Ok(counts)
}

/// The mixed-agreement pairs (MA_G ∪ MA_L): one side significant, same
/// direction. These feed [`ma_distribution`].
pub fn ma_pairs(gold: &TripletSet, low: &TripletSet) -> Result<PairSet> {
    check_same_systems(gold, low)?;
    let mut pairs = PairSet::new();
    for (g, l) in gold.triplets.iter().zip(&low.triplets) {
        if g.c.significant() != l.c.significant() && g.c.i_better() == l.c.i_better() {
            pairs.insert((g.i, g.j));
        }
    }
    Ok(pairs)
}

/// Precision and recall of the reduced significant set against the gold one.
///
/// P = |T_G ∩ T_L| / |T_L| and R = |T_G ∩ T_L| / |T_G|, where T_* are the
/// significant triplets. With `direction_sensitive` the intersection
/// requires matching directions (a significant pair flipped the other way
/// counts as a miss); without it, shared significance alone counts. An
/// empty T_L yields P = 1 and an empty T_G yields R = 1.
pub fn precision_recall(
    gold: &TripletSet,
    low: &TripletSet,
    direction_sensitive: bool,
) -> Result<(f64, f64)> {
    check_same_systems(gold, low)?;
    let mut t_g = 0u64;
    let mut t_l = 0u64;
    let mut both = 0u64;
    for (g, l) in gold.triplets.iter().zip(&low.triplets) {
        if g.c.significant() {
            t_g += 1;
        }
        if l.c.significant() {
            t_l += 1;
        }
        if g.c.significant() && l.c.significant() && (!direction_sensitive || g.c == l.c) {
            both += 1;
        }
    }
    let p = if t_l == 0 { 1.0 } else { both as f64 / t_l as f64 };
    let r = if t_g == 0 { 1.0 } else { both as f64 / t_g as f64 };
    Ok((p, r))
}

/// Publication bias: the chance a significance claim under the reduced
/// qrels is not an agreed one. 1 − AA/(AA + AD + MA_L + MD_L); 0 when the
/// reduced side claims nothing.
pub fn bias(counts: &AgreementCounts) -> f64 {
    let denom = counts.n_low_sig();
    if denom == 0 {
        0.0
    } else {
        1.0 - counts.aa as f64 / denom as f64
    }
}

/// Everything the comparison produces for one (method, budget, measure)
/// cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub counts: AgreementCounts,
    pub precision: f64,
    pub recall: f64,
    pub tau: f64,
    pub bias: f64,
    pub n_gold_sig: u64,
    pub n_low_sig: u64,
}

/// Builds the full report for a gold/reduced matrix pair and their
/// significant sets.
pub fn agreement_report(
    gold_x: &ScoreMatrix,
    low_x: &ScoreMatrix,
    gold_sig: &PairSet,
    low_sig: &PairSet,
    direction_sensitive: bool,
) -> Result<AgreementReport> {
    let gold_t = build_triplets(gold_x, gold_sig);
    let low_t = build_triplets(low_x, low_sig);
    let counts = classify(&gold_t, &low_t)?;
    let (precision, recall) = precision_recall(&gold_t, &low_t, direction_sensitive)?;
    let tau = kendall_tau(&rank_systems(gold_x), &rank_systems(low_x))?;
    Ok(AgreementReport {
        counts,
        precision,
        recall,
        tau,
        bias: bias(&counts),
        n_gold_sig: counts.n_gold_sig(),
        n_low_sig: counts.n_low_sig(),
    })
}

/// Five-number summary of one rank bin's score differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaBinStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// One bin of consecutive gold-ranking positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaBin {
    /// First rank position the bin covers, 1-based.
    pub bin_start: usize,
    /// Number of recorded differences; 0 marks a break (no mixed agreement
    /// touched these positions).
    pub count: usize,
    pub stats: Option<MaBinStats>,
}

/// Linear-interpolation quantile of an ascending slice (the convention of
/// most plotting stacks).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// The raw signed score differences of the mixed agreement pairs, grouped
/// by gold-ranking position (index p holds the values of the system ranked
/// p+1 under the gold qrels).
///
/// Each MA pair records +Δ for its better system and −Δ for its worse one,
/// where Δ is the difference of the two systems' mean scores under the
/// reduced qrels.
pub fn ma_values(
    gold_ranking: &[String],
    low_x: &ScoreMatrix,
    ma: &PairSet,
) -> Result<Vec<Vec<f64>>> {
    let n = low_x.n_systems();
    {
        let a: std::collections::BTreeSet<&str> =
            gold_ranking.iter().map(String::as_str).collect();
        let b: std::collections::BTreeSet<&str> =
            low_x.systems().iter().map(String::as_str).collect();
        if a != b || gold_ranking.len() != n {
            return Err(Error::Validation(
                "gold ranking does not cover the matrix systems".into(),
            ));
        }
    }
    let index: BTreeMap<&str, usize> =
        low_x.systems().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut gold_pos = vec![0usize; n];
    for (p, sys) in gold_ranking.iter().enumerate() {
        gold_pos[index[sys.as_str()]] = p;
    }
    // Direction under the reduced qrels; MA pairs agree in direction, so
    // this matches the gold-side better/worse too.
    let low_ranking = rank_systems(low_x);
    let mut low_pos = vec![0usize; n];
    for (p, sys) in low_ranking.iter().enumerate() {
        low_pos[index[sys.as_str()]] = p;
    }
    let means = low_x.system_means();

    let mut by_pos: Vec<Vec<f64>> = vec![Vec::new(); n];
    for &(i, j) in ma {
        if j >= n || i >= j {
            return Err(Error::Validation(format!("pair ({i}, {j}) outside the system list")));
        }
        let (better, worse) = if low_pos[i] < low_pos[j] { (i, j) } else { (j, i) };
        let delta = means[better] - means[worse];
        by_pos[gold_pos[better]].push(delta);
        by_pos[gold_pos[worse]].push(-delta);
    }
    Ok(by_pos)
}

/// Groups per-position values (as produced by [`ma_values`], possibly
/// concatenated over repetitions) into bins of `bin_size` consecutive
/// positions with five-number summaries.
pub fn bin_ma_values(by_pos: &[Vec<f64>], bin_size: usize) -> Result<Vec<MaBin>> {
    if bin_size == 0 {
        return Err(Error::Config("bin size must be at least 1".into()));
    }
    let n = by_pos.len();
    let mut bins = Vec::with_capacity(n.div_ceil(bin_size));
    for start in (0..n).step_by(bin_size) {
        let end = (start + bin_size).min(n);
        let mut vals: Vec<f64> = by_pos[start..end].iter().flatten().copied().collect();
        vals.sort_by(f64::total_cmp);
        let stats = if vals.is_empty() {
            None
        } else {
            Some(MaBinStats {
                median: quantile(&vals, 0.5),
                q1: quantile(&vals, 0.25),
                q3: quantile(&vals, 0.75),
                min: vals[0],
                max: *vals.last().expect("non-empty"),
            })
        };
        bins.push(MaBin { bin_start: start + 1, count: vals.len(), stats });
    }
    Ok(bins)
}

/// Distribution of reduced-qrels score differences across the mixed
/// agreement pairs: [`ma_values`] binned by [`bin_ma_values`].
pub fn ma_distribution(
    gold_ranking: &[String],
    low_x: &ScoreMatrix,
    ma: &PairSet,
    bin_size: usize,
) -> Result<Vec<MaBin>> {
    bin_ma_values(&ma_values(gold_ranking, low_x, ma)?, bin_size)
}

/// Writes bins as CSV `bin_start,median,q1,q3,min,max,count`; empty bins
/// leave the statistic fields blank.
pub fn write_ma_csv<W: Write>(bins: &[MaBin], out: &mut W) -> Result<()> {
    writeln!(out, "bin_start,median,q1,q3,min,max,count")?;
    for bin in bins {
        match &bin.stats {
            Some(s) => writeln!(
                out,
                "{},{},{},{},{},{},{}",
                bin.bin_start,
                format_score(s.median),
                format_score(s.q1),
                format_score(s.q3),
                format_score(s.min),
                format_score(s.max),
                bin.count
            )?,
            None => writeln!(out, "{},,,,,,0", bin.bin_start)?,
        }
    }
    Ok(())
}
