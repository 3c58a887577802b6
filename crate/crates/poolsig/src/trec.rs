//! TREC exchange formats: run files and relevance judgments (qrels).
//!
//! Run lines are `topic Q0 docid rank score tag`; qrels lines are
//! `topic iter docid grade`. Both are whitespace-delimited UTF-8 text with
//! one record per line. Parsed structures are immutable and safe to share
//! across threads.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One retrieved document in a ranked list.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedDoc {
    /// Document identifier.
    pub doc: String,
    /// 1-based rank, recomputed on load from the sort order.
    pub rank: usize,
    /// Retrieval score as given in the run file.
    pub score: f64,
}

/// A set of retrieval runs: system → topic → ranked document list.
///
/// On load every list is re-sorted by descending score with ties broken by
/// descending doc id (the trec_eval convention), and ranks are rewritten
/// `1..=len` to match.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSet {
    entries: BTreeMap<String, BTreeMap<String, Vec<RankedDoc>>>,
}

impl RunSet {
    /// System ids present in the run set, in sorted order.
    pub fn systems(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    /// Number of systems.
    pub fn n_systems(&self) -> usize {
        self.entries.len()
    }

    /// Topic ids retrieved by `system`, in sorted order.
    pub fn topics_of(&self, system: &str) -> Option<Vec<&str>> {
        self.entries
            .get(system)
            .map(|m| m.keys().map(String::as_str).collect())
    }

    /// Sorted union of topic ids over all systems.
    pub fn all_topics(&self) -> Vec<&str> {
        let mut topics: Vec<&str> = self
            .entries
            .values()
            .flat_map(|m| m.keys().map(String::as_str))
            .collect();
        topics.sort_unstable();
        topics.dedup();
        topics
    }

    /// The ranked list of `system` on `topic`, if any.
    pub fn ranking(&self, system: &str, topic: &str) -> Option<&[RankedDoc]> {
        self.entries
            .get(system)
            .and_then(|m| m.get(topic))
            .map(Vec::as_slice)
    }

    /// True if `system` has at least one topic.
    pub fn contains_system(&self, system: &str) -> bool {
        self.entries.contains_key(system)
    }

    /// A new run set containing only the given systems.
    ///
    /// Errors if any requested system is absent.
    pub fn restrict_to_systems(&self, systems: &[String]) -> Result<RunSet> {
        let mut entries = BTreeMap::new();
        for sys in systems {
            let runs = self
                .entries
                .get(sys)
                .ok_or_else(|| Error::Validation(format!("unknown system id: {sys}")))?;
            entries.insert(sys.clone(), runs.clone());
        }
        Ok(RunSet { entries })
    }

    /// Merges another run set into this one.
    ///
    /// Errors if a (system, topic) list is present in both; runs are expected
    /// to be split across files by system, never duplicated.
    pub fn merge(&mut self, other: RunSet) -> Result<()> {
        for (sys, topics) in other.entries {
            let slot = self.entries.entry(sys.clone()).or_default();
            for (topic, docs) in topics {
                if slot.contains_key(&topic) {
                    return Err(Error::Validation(format!(
                        "duplicate run data for system {sys}, topic {topic}"
                    )));
                }
                slot.insert(topic, docs);
            }
        }
        Ok(())
    }
}

/// Relevance judgments: topic → document → grade.
///
/// A document absent from the map is unjudged; grade 0 is an explicit
/// non-relevant judgment. The distinction matters when reduced qrels are
/// compared against the gold ones they were drawn from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    /// Creates an empty qrels.
    pub fn new() -> Self {
        Self::default()
    }

    /// The grade of (topic, doc), or `None` if unjudged.
    pub fn grade(&self, topic: &str, doc: &str) -> Option<u32> {
        self.judgments.get(topic).and_then(|m| m.get(doc)).copied()
    }

    /// Judged documents for `topic`.
    pub fn topic_judgments(&self, topic: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(topic)
    }

    /// Topic ids with at least one judgment, in sorted order.
    pub fn topics(&self) -> Vec<&str> {
        self.judgments.keys().map(String::as_str).collect()
    }

    /// Total number of judgments.
    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    /// True if there are no judgments at all.
    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    /// Number of judgments with grade ≥ `threshold`.
    pub fn count_relevant(&self, threshold: u32) -> usize {
        self.judgments
            .values()
            .flat_map(|m| m.values())
            .filter(|&&g| g >= threshold)
            .count()
    }

    /// Inserts a judgment; errors on a duplicate (topic, doc) pair.
    pub fn insert(&mut self, topic: &str, doc: &str, grade: u32) -> Result<()> {
        let slot = self.judgments.entry(topic.to_string()).or_default();
        if slot.contains_key(doc) {
            return Err(Error::Validation(format!(
                "duplicate judgment for topic {topic}, doc {doc}"
            )));
        }
        slot.insert(doc.to_string(), grade);
        Ok(())
    }

    /// Keeps only judgments for which `keep` returns true.
    pub fn retain<F: FnMut(&str, &str, u32) -> bool>(&mut self, mut keep: F) {
        for (topic, docs) in self.judgments.iter_mut() {
            docs.retain(|doc, grade| keep(topic, doc, *grade));
        }
        self.judgments.retain(|_, docs| !docs.is_empty());
    }
}

/// A negative grade encountered while parsing qrels; the grade was clamped
/// to 0 as common practice dictates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrelsWarning {
    /// 1-based line number.
    pub line: usize,
    /// Topic id on that line.
    pub topic: String,
    /// Document id on that line.
    pub doc: String,
    /// The original (negative) grade.
    pub raw_grade: i64,
}

impl std::fmt::Display for QrelsWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "line {}: negative grade {} for topic {}, doc {} clamped to 0",
            self.line, self.raw_grade, self.topic, self.doc
        )
    }
}

/// Parses run data in the TREC format.
///
/// Each non-blank line must have six whitespace-separated fields:
/// `topic Q0 docid rank score tag` (the `Q0` literal is case-insensitive,
/// the rank field is ignored and recomputed). When `tag_override` is given
/// it replaces the tag field of every line.
///
/// ```
/// use poolsig::trec::parse_runs;
///
/// let runs = parse_runs("301 Q0 FBIS3-1 1 12.5 sysA".lines(), None).unwrap();
/// assert_eq!(runs.systems(), vec!["sysA"]);
/// assert_eq!(runs.ranking("sysA", "301").unwrap()[0].doc, "FBIS3-1");
/// ```
pub fn parse_runs<I, S>(lines: I, tag_override: Option<&str>) -> Result<RunSet>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut entries: BTreeMap<String, BTreeMap<String, Vec<RankedDoc>>> = BTreeMap::new();
    for (idx, line) in lines.into_iter().enumerate() {
        let line_no = idx + 1;
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        if !fields[1].eq_ignore_ascii_case("q0") {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected literal Q0 in field 2, got {}", fields[1]),
            });
        }
        let score: f64 = fields[4].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("non-numeric score: {}", fields[4]),
        })?;
        if !score.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("non-finite score: {}", fields[4]),
            });
        }
        let tag = tag_override.unwrap_or(fields[5]);
        entries
            .entry(tag.to_string())
            .or_default()
            .entry(fields[0].to_string())
            .or_default()
            .push(RankedDoc {
                doc: fields[2].to_string(),
                rank: 0,
                score,
            });
    }

    for (sys, topics) in entries.iter_mut() {
        for (topic, docs) in topics.iter_mut() {
            // Duplicates may have unequal scores and so end up non-adjacent
            // after the score sort; check on a doc-sorted copy instead.
            let mut seen: Vec<&str> = docs.iter().map(|d| d.doc.as_str()).collect();
            seen.sort_unstable();
            for w in seen.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::Validation(format!(
                        "duplicate document {} for system {sys}, topic {topic}",
                        w[0]
                    )));
                }
            }
            docs.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| b.doc.cmp(&a.doc)));
            for (i, d) in docs.iter_mut().enumerate() {
                d.rank = i + 1;
            }
        }
    }
    Ok(RunSet { entries })
}

/// Parses qrels in the TREC format: `topic iter docid grade` per line.
///
/// The iteration field is ignored. Negative grades are clamped to 0 and a
/// warning is returned for each. Duplicate (topic, doc) pairs are an error.
///
/// ```
/// use poolsig::trec::parse_qrels;
///
/// let (qrels, warnings) = parse_qrels("301 0 FBIS3-1 1".lines()).unwrap();
/// assert_eq!(qrels.grade("301", "FBIS3-1"), Some(1));
/// assert!(warnings.is_empty());
/// ```
pub fn parse_qrels<I, S>(lines: I) -> Result<(Qrels, Vec<QrelsWarning>)>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut qrels = Qrels::new();
    let mut warnings = Vec::new();
    for (idx, line) in lines.into_iter().enumerate() {
        let line_no = idx + 1;
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let grade: i64 = fields[3].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("non-integer grade: {}", fields[3]),
        })?;
        let clamped = if grade < 0 {
            warnings.push(QrelsWarning {
                line: line_no,
                topic: fields[0].to_string(),
                doc: fields[2].to_string(),
                raw_grade: grade,
            });
            0
        } else {
            u32::try_from(grade).map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("grade out of range: {grade}"),
            })?
        };
        qrels.insert(fields[0], fields[2], clamped)?;
    }
    Ok((qrels, warnings))
}

/// Writes qrels as `topic 0 doc grade` lines sorted by (topic, doc).
///
/// Round-trips with [`parse_qrels`].
pub fn write_qrels<W: Write>(qrels: &Qrels, out: &mut W) -> Result<()> {
    for (topic, docs) in &qrels.judgments {
        for (doc, grade) in docs {
            writeln!(out, "{topic} 0 {doc} {grade}")?;
        }
    }
    Ok(())
}

/// Loads runs from a file, or from every file in a directory (sorted by
/// file name). Line numbers in errors are per file; the file name is
/// prepended to the message.
pub fn load_runs(path: &Path, tag_override: Option<&str>) -> Result<RunSet> {
    let mut merged = RunSet::default();
    let meta = fs::metadata(path)?;
    let files: Vec<std::path::PathBuf> = if meta.is_dir() {
        let mut fs_entries: Vec<_> = fs::read_dir(path)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        fs_entries.sort();
        fs_entries
    } else {
        vec![path.to_path_buf()]
    };
    for file in files {
        let reader = BufReader::new(fs::File::open(&file)?);
        let lines = reader.lines().collect::<std::io::Result<Vec<String>>>()?;
        let runs = parse_runs(lines.iter(), tag_override).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse {
                line,
                msg: format!("{}: {msg}", file.display()),
            },
            other => other,
        })?;
        merged.merge(runs)?;
    }
    Ok(merged)
}

/// Loads qrels from a file; see [`parse_qrels`].
pub fn load_qrels(path: &Path) -> Result<(Qrels, Vec<QrelsWarning>)> {
    let reader = BufReader::new(fs::File::open(path)?);
    let lines = reader.lines().collect::<std::io::Result<Vec<String>>>()?;
    parse_qrels(lines.iter())
}
