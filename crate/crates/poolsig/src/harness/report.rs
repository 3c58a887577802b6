//! Report emission: machine-readable CSV plus human-readable markdown,
//! byte-deterministic for a given result.
//!
//! Count means are stored with one decimal in CSV; only the markdown
//! renderer rounds them to integers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::agreement::write_ma_csv;
use crate::error::Result;
use crate::harness::experiment::{CellAggregate, ExperimentResult, MeasureAggregate};
use crate::util::format_score;

/// Writes every report file for `result` into `out_dir`, creating it if
/// needed. On failure all files written by this call are removed.
pub fn write_reports(result: &ExperimentResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    match try_write(result, out_dir, &mut written) {
        Ok(()) => Ok(written),
        Err(e) => {
            for path in &written {
                let _ = fs::remove_file(path);
            }
            Err(e)
        }
    }
}

fn try_write(
    result: &ExperimentResult,
    out_dir: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    let mut emit = |name: String, content: String| -> Result<()> {
        let path = out_dir.join(name);
        written.push(path.clone());
        let mut f = fs::File::create(&path)?;
        f.write_all(content.as_bytes())?;
        Ok(())
    };

    emit("results.json".into(), serde_json::to_string_pretty(result).expect("serializable") + "\n")?;
    emit("per_repetition.csv".into(), per_repetition_csv(result))?;
    for measure in &result.measures {
        emit(format!("correlation-{measure}.csv"), correlation_csv(result, measure))?;
        emit(format!("correlation-{measure}.md"), correlation_md(result, measure))?;
        emit(format!("agreement-{measure}.csv"), agreement_csv(result, measure))?;
        emit(format!("agreement-{measure}.md"), agreement_md(result, measure))?;
    }
    for table in &result.ma {
        let mut buf = Vec::new();
        write_ma_csv(&table.bins, &mut buf)?;
        emit(
            format!("ma-{}-{}-b{}.csv", table.measure, table.method, table.budget),
            String::from_utf8(buf).expect("csv is utf-8"),
        )?;
    }
    Ok(())
}

fn cell<'a>(result: &'a ExperimentResult, method: &str, budget: usize) -> &'a CellAggregate {
    result
        .cells
        .iter()
        .find(|c| c.method == method && c.budget == budget)
        .expect("cell for every (method, budget)")
}

fn for_measure<'a>(cell: &'a CellAggregate, measure: &str) -> &'a MeasureAggregate {
    cell.measures.iter().find(|m| m.measure == measure).expect("aggregate for every measure")
}

fn gold_sig(result: &ExperimentResult, measure: &str) -> u64 {
    result
        .gold
        .iter()
        .find(|g| g.measure == measure)
        .map(|g| g.n_significant)
        .expect("gold summary for every measure")
}

fn pct(fraction: f64) -> String {
    format!("{:.0}%", fraction * 100.0)
}

fn per_repetition_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(
        "method,budget,repetition,rels_found,measure,tau,precision,recall,bias,\
         aa,ad,ma_g,ma_l,md_g,md_l,n_low_sig\n",
    );
    for rep in &result.repetitions {
        for mr in &rep.reports {
            let c = &mr.report.counts;
            out += &format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                rep.method,
                rep.budget,
                rep.repetition,
                rep.rels_found,
                mr.measure,
                format_score(mr.report.tau),
                format_score(mr.report.precision),
                format_score(mr.report.recall),
                format_score(mr.report.bias),
                c.aa,
                c.ad,
                c.ma_g,
                c.ma_l,
                c.md_g,
                c.md_l,
                mr.report.n_low_sig,
            );
        }
    }
    out
}

fn correlation_csv(result: &ExperimentResult, measure: &str) -> String {
    let mut out = String::from(
        "method,budget,budget_fraction,tau_mean,tau_sd,precision_mean,precision_sd,\
         recall_mean,recall_sd\n",
    );
    for method in &result.methods {
        for (bi, &budget) in result.budgets.iter().enumerate() {
            let a = for_measure(cell(result, method, budget), measure);
            out += &format!(
                "{},{},{},{},{},{},{},{},{}\n",
                method,
                budget,
                format_score(result.budget_fractions[bi]),
                format_score(a.tau.mean),
                format_score(a.tau.sd),
                format_score(a.precision.mean),
                format_score(a.precision.sd),
                format_score(a.recall.mean),
                format_score(a.recall.sd),
            );
        }
    }
    out
}

fn correlation_md(result: &ExperimentResult, measure: &str) -> String {
    let mut out = format!(
        "# {} — rank correlation and significance precision/recall\n\n\
         {} system pairs, {} significant under the full judgments.\n\n",
        measure.to_uppercase(),
        result.n_pairs,
        gold_sig(result, measure),
    );
    out += "| Method |";
    for (bi, budget) in result.budgets.iter().enumerate() {
        let p = pct(result.budget_fractions[bi]);
        out += &format!(" τ @{budget} ({p}) | P @{budget} ({p}) | R @{budget} ({p}) |");
    }
    out += "\n|---|";
    out += &"---:|".repeat(result.budgets.len() * 3);
    out += "\n";
    for method in &result.methods {
        out += &format!("| {method} |");
        for &budget in &result.budgets {
            let a = for_measure(cell(result, method, budget), measure);
            out += &format!(
                " {:.2} | {:.3} | {:.3} |",
                a.tau.mean, a.precision.mean, a.recall.mean
            );
        }
        out += "\n";
    }
    out
}

fn agreement_csv(result: &ExperimentResult, measure: &str) -> String {
    let mut out = String::from(
        "method,budget,rels_mean,rels_sd,aa_mean,aa_sd,ad_mean,ad_sd,\
         ma_g_mean,ma_g_sd,ma_l_mean,ma_l_sd,md_g_mean,md_g_sd,md_l_mean,md_l_sd,\
         n_low_sig_mean,n_low_sig_sd,bias_mean,bias_sd\n",
    );
    for method in &result.methods {
        for &budget in &result.budgets {
            let c = cell(result, method, budget);
            let a = for_measure(c, measure);
            out += &format!(
                "{},{},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},\
                 {:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{},{}\n",
                method,
                budget,
                c.rels_found.mean,
                c.rels_found.sd,
                a.aa.mean,
                a.aa.sd,
                a.ad.mean,
                a.ad.sd,
                a.ma_g.mean,
                a.ma_g.sd,
                a.ma_l.mean,
                a.ma_l.sd,
                a.md_g.mean,
                a.md_g.sd,
                a.md_l.mean,
                a.md_l.sd,
                a.n_low_sig.mean,
                a.n_low_sig.sd,
                format_score(a.bias.mean),
                format_score(a.bias.sd),
            );
        }
    }
    out
}

fn agreement_md(result: &ExperimentResult, measure: &str) -> String {
    let mut out = format!(
        "# {} — agreement with the full judgments\n\n\
         {} system pairs, {} significant under the full judgments. \
         The full pool holds {} relevant documents.\n",
        measure.to_uppercase(),
        result.n_pairs,
        gold_sig(result, measure),
        result.pool_relevant,
    );
    for (bi, &budget) in result.budgets.iter().enumerate() {
        out += &format!(
            "\n## Budget per topic: {budget} ({} of the pool)\n\n",
            pct(result.budget_fractions[bi])
        );
        out += "| |";
        for method in &result.methods {
            out += &format!(" {method} |");
        }
        out += "\n|---|";
        out += &"---:|".repeat(result.methods.len());
        out += "\n";
        let aggregates: Vec<&MeasureAggregate> = result
            .methods
            .iter()
            .map(|m| for_measure(cell(result, m, budget), measure))
            .collect();
        let rows: [(&str, Box<dyn Fn(&MeasureAggregate) -> String>); 10] = [
            ("# rels.", Box::new(|_| String::new())), // filled below
            ("AA", Box::new(|a| format!("{:.0}", a.aa.mean))),
            ("MA total", Box::new(|a| format!("{:.0}", a.ma_g.mean + a.ma_l.mean))),
            ("MA_G", Box::new(|a| format!("{:.0}", a.ma_g.mean))),
            ("MA_L", Box::new(|a| format!("{:.0}", a.ma_l.mean))),
            ("MD total", Box::new(|a| format!("{:.0}", a.md_g.mean + a.md_l.mean))),
            ("MD_G", Box::new(|a| format!("{:.0}", a.md_g.mean))),
            ("MD_L", Box::new(|a| format!("{:.0}", a.md_l.mean))),
            ("AD", Box::new(|a| format!("{:.0}", a.ad.mean))),
            ("Bias", Box::new(|a| format!("{:.0}%", a.bias.mean * 100.0))),
        ];
        for (label, render) in &rows {
            out += &format!("| {label} |");
            for (method, a) in result.methods.iter().zip(&aggregates) {
                let text = if *label == "# rels." {
                    format!("{:.0}", cell(result, method, budget).rels_found.mean)
                } else {
                    render(a)
                };
                out += &format!(" {text} |");
            }
            out += "\n";
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agreement::{AgreementCounts, AgreementReport};
    use crate::harness::experiment::{
        GoldSummary, MaTable, MeasureReport, RepetitionRecord, Stat,
    };
    use crate::pool::PoolStats;

    fn const_stat(v: f64) -> Stat {
        Stat { mean: v, sd: 0.0 }
    }

    fn toy_result(methods: Vec<&str>) -> ExperimentResult {
        let report = AgreementReport {
            counts: AgreementCounts { aa: 3, ma_l: 1, ..Default::default() },
            precision: 0.75,
            recall: 1.0,
            tau: 0.9,
            bias: 0.25,
            n_gold_sig: 3,
            n_low_sig: 4,
        };
        let cells = methods
            .iter()
            .map(|m| CellAggregate {
                method: m.to_string(),
                budget: 10,
                rels_found: const_stat(42.0),
                measures: vec![MeasureAggregate {
                    measure: "map".into(),
                    tau: const_stat(0.9),
                    precision: const_stat(0.75),
                    recall: const_stat(1.0),
                    bias: const_stat(0.25),
                    aa: const_stat(3.0),
                    ad: const_stat(0.0),
                    ma_g: const_stat(0.0),
                    ma_l: const_stat(1.0),
                    md_g: const_stat(0.0),
                    md_l: const_stat(0.0),
                    n_low_sig: const_stat(4.0),
                }],
            })
            .collect();
        let repetitions = methods
            .iter()
            .map(|m| RepetitionRecord {
                method: m.to_string(),
                budget: 10,
                repetition: 0,
                rels_found: 42,
                reports: vec![MeasureReport { measure: "map".into(), report }],
            })
            .collect();
        ExperimentResult {
            methods: methods.iter().map(|m| m.to_string()).collect(),
            budgets: vec![10],
            budget_fractions: vec![0.25],
            measures: vec!["map".into()],
            alpha: 0.05,
            permutations: 1000,
            seed: 7,
            direction_sensitive: true,
            bin_size: 3,
            pool_stats: PoolStats { topics: 2, total: 80, max: 50, min: 30 },
            pool_relevant: 12,
            n_pairs: 10,
            gold: vec![GoldSummary { measure: "map".into(), n_pairs: 10, n_significant: 3 }],
            cells,
            repetitions,
            ma: vec![MaTable {
                measure: "map".into(),
                method: methods.first().copied().unwrap_or("mtf").to_string(),
                budget: 10,
                bins: vec![],
            }],
        }
    }

    #[test]
    fn reports_are_byte_deterministic_and_complete() {
        let result = toy_result(vec!["mtf", "ts"]);
        let dir = tempfile::tempdir().unwrap();
        let a = write_reports(&result, &dir.path().join("one")).unwrap();
        let b = write_reports(&result, &dir.path().join("two")).unwrap();
        assert_eq!(a.len(), b.len());
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap(), "{}", pa.display());
        }
        let names: Vec<String> =
            a.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        for expected in [
            "results.json",
            "per_repetition.csv",
            "correlation-map.csv",
            "correlation-map.md",
            "agreement-map.csv",
            "agreement-map.md",
            "ma-map-mtf-b10.csv",
        ] {
            assert!(names.contains(&expected.to_string()), "missing {expected}");
        }
    }

    #[test]
    fn empty_method_list_yields_header_only_tables() {
        let mut result = toy_result(vec![]);
        result.ma.clear();
        let dir = tempfile::tempdir().unwrap();
        write_reports(&result, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("correlation-map.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("method,budget,"));
        let md = fs::read_to_string(dir.path().join("agreement-map.md")).unwrap();
        assert!(md.contains("## Budget per topic: 10 (25% of the pool)"));
    }

    #[test]
    fn markdown_rounds_counts_and_bias() {
        let result = toy_result(vec!["mtf"]);
        let dir = tempfile::tempdir().unwrap();
        write_reports(&result, dir.path()).unwrap();
        let md = fs::read_to_string(dir.path().join("agreement-map.md")).unwrap();
        assert!(md.contains("| Bias | 25% |"));
        assert!(md.contains("| # rels. | 42 |"));
        let csv = fs::read_to_string(dir.path().join("agreement-map.csv")).unwrap();
        assert!(csv.contains("mtf,10,42.0,0.0,3.0,"), "counts keep one decimal: {csv}");
        let corr = fs::read_to_string(dir.path().join("correlation-map.md")).unwrap();
        assert!(corr.contains("| 0.90 | 0.750 | 1.000 |"));
    }

    #[test]
    fn results_json_round_trips() {
        let result = toy_result(vec!["mtf"]);
        let dir = tempfile::tempdir().unwrap();
        write_reports(&result, dir.path()).unwrap();
        let back =
            crate::harness::experiment::load_results(&dir.path().join("results.json")).unwrap();
        assert_eq!(back, result);
    }
}
