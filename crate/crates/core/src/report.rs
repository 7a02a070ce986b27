//! Delimited report files. Everything written here is a pure function of the
//! evaluation results, so identical runs produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::{compare, Comparison, EvaluationReport, ModelKind, SensitivityTable};
use crate::metrics::{Metric, TopK};

pub const METRICS_FILE: &str = "metrics.tsv";
pub const SUMMARY_FILE: &str = "summary.tsv";
pub const TESTS_FILE: &str = "tests.tsv";
pub const SELECTION_FILE: &str = "selection.tsv";
pub const SENSITIVITY_FILE: &str = "sensitivity.tsv";

const METRICS_HEADER: &str = "model\tseed\thr@5\tndcg@5\tmrr@5\tp@5";

/// `0.4213 ± 0.0093`
pub fn mean_sd(mean: f64, sd: f64) -> String {
    format!("{mean:.4} ± {sd:.4}")
}

/// `0.6140 (-0.0087)`
pub fn value_delta(value: f64, delta: f64) -> String {
    format!("{value:.4} ({delta:+.4})")
}

pub fn metrics_tsv(report: &EvaluationReport) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for &m in &report.models {
        for seed in &report.per_seed {
            let r = seed.result(m).expect("model evaluated on every seed");
            let k = r.metrics;
            let _ = writeln!(s, "{m}\t{}\t{}\t{}\t{}\t{}", seed.seed, k.hr, k.ndcg, k.mrr, k.precision);
        }
    }
    s
}

pub fn summary_tsv(report: &EvaluationReport) -> String {
    let mut s = String::from("model\tlabel\thr@5\tndcg@5\tmrr@5\n");
    for sm in &report.summaries {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            sm.model,
            sm.model.label(),
            mean_sd(sm.mean.hr, sm.sd.hr),
            mean_sd(sm.mean.ndcg, sm.sd.ndcg),
            mean_sd(sm.mean.mrr, sm.sd.mrr)
        );
    }
    s
}

pub fn tests_tsv(comparisons: &[Comparison]) -> String {
    let mut s = String::from(
        "comparison\tmetric\tn\tdropped_zeros\tp_value\tp_display\tr_rb\td_z\tmean_difference\tzero_mass\n",
    );
    for c in comparisons {
        let r = &c.result;
        let dz = r.d_z.map_or_else(|| "undefined".to_string(), |d| d.to_string());
        let _ = writeln!(
            s,
            "{} vs {}\t{}\t{}\t{}\t{}\t{:.4}\t{}\t{}\t{}\t{}",
            c.a, c.b, c.metric, r.n, r.dropped_zeros, r.p_value, r.p_value, r.r_rb, dz, r.mean_difference, r.zero_mass
        );
    }
    s
}

/// One row per grid point of every fused model and seed.
pub fn selection_tsv(report: &EvaluationReport) -> String {
    let mut s = String::from("seed\tmodel\tstage\talpha\tlambda_cf\tlambda_rl\tlambda_t\tmetric\tchosen\n");
    for seed in &report.per_seed {
        for r in &seed.results {
            let Some(sel) = &r.selection else { continue };
            for (stage, trace) in [("alpha", &sel.alpha_trace), ("lambda", &sel.lambda_trace)] {
                for p in trace {
                    let chosen = match stage {
                        "alpha" => p.alpha == sel.chosen_alpha,
                        _ => p.weights == sel.chosen,
                    };
                    let _ = writeln!(
                        s,
                        "{}\t{}\t{stage}\t{}\t{}\t{}\t{}\t{}\t{}",
                        seed.seed,
                        r.model,
                        p.alpha,
                        p.weights.cf,
                        p.weights.rl,
                        p.weights.topsis,
                        p.metric,
                        u8::from(chosen)
                    );
                }
            }
        }
    }
    s
}

pub fn sensitivity_tsv(table: &SensitivityTable) -> String {
    let mut s = String::from("removed_proxy\tndcg@5\tdelta\tbaseline\tdisplay\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            r.removed.name(),
            r.ndcg,
            r.delta,
            table.baseline,
            value_delta(r.ndcg, r.delta)
        );
    }
    s
}

/// Fixed-width rendering of the summary for terminals.
pub fn render_summary(report: &EvaluationReport) -> String {
    let mut s = format!("{:<16}{:>18}{:>18}{:>18}\n", "Model", "HR@5", "NDCG@5", "MRR@5");
    for sm in &report.summaries {
        let _ = writeln!(
            s,
            "{:<16}{:>18}{:>18}{:>18}",
            sm.model.label(),
            mean_sd(sm.mean.hr, sm.sd.hr),
            mean_sd(sm.mean.ndcg, sm.sd.ndcg),
            mean_sd(sm.mean.mrr, sm.sd.mrr)
        );
    }
    for c in &report.comparisons {
        let r = &c.result;
        let dz = r.d_z.map_or_else(|| "undefined".to_string(), |d| format!("{d:.3}"));
        let _ = writeln!(
            s,
            "{} vs {}: p = {:.4}, r_rb = {:.4}, d_z = {dz}",
            c.a.label(),
            c.b.label(),
            r.p_value,
            r.r_rb
        );
    }
    s
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Writes metrics, summary, tests and selection files into `dir`.
pub fn write_evaluation(report: &EvaluationReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, METRICS_FILE, &metrics_tsv(report))?;
    write(dir, SUMMARY_FILE, &summary_tsv(report))?;
    write(dir, TESTS_FILE, &tests_tsv(&report.comparisons))?;
    write(dir, SELECTION_FILE, &selection_tsv(report))
}

pub fn write_sensitivity(table: &SensitivityTable, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, SENSITIVITY_FILE, &sensitivity_tsv(table))
}

/// Per-seed metrics by model, seeds in file order.
pub type MetricsTable = BTreeMap<ModelKind, Vec<(u64, TopK)>>;

pub fn parse_metrics_tsv(text: &str, source_name: &str) -> Result<MetricsTable> {
    let mut out = MetricsTable::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == METRICS_HEADER => {}
        _ => {
            return Err(Error::Parse {
                source_name: source_name.into(),
                line: 1,
                message: format!("expected header {METRICS_HEADER:?}"),
            })
        }
    }
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse {
            source_name: source_name.into(),
            line: k + 1,
            message: m,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", f.len())));
        }
        let model: ModelKind = f[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        let seed: u64 = f[1].parse().map_err(|_| bad(format!("bad seed {:?}", f[1])))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad value {s:?}")));
        let m = TopK {
            hr: num(f[2])?,
            ndcg: num(f[3])?,
            mrr: num(f[4])?,
            precision: num(f[5])?,
        };
        out.entry(model).or_default().push((seed, m));
    }
    Ok(out)
}

/// Re-runs paired comparisons from parsed per-seed metrics, pairing by seed.
pub fn comparisons_from_metrics(
    table: &MetricsTable,
    pairs: &[(ModelKind, ModelKind)],
    metric: Metric,
) -> Result<Vec<Comparison>> {
    pairs
        .iter()
        .map(|&(a, b)| {
            let get = |m: ModelKind| {
                table
                    .get(&m)
                    .map(|v| v.iter().map(|(s, k)| (*s, k.get(metric))).collect::<BTreeMap<_, _>>())
                    .ok_or_else(|| Error::UnknownModel(format!("{m} not present in metrics file")))
            };
            let (sa, sb) = (get(a)?, get(b)?);
            if sa.keys().ne(sb.keys()) {
                return Err(Error::Precondition(format!("{a} and {b} cover different seeds")));
            }
            compare(
                a,
                b,
                metric,
                &sa.values().copied().collect::<Vec<_>>(),
                &sb.values().copied().collect::<Vec<_>>(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_formats() {
        assert_eq!(mean_sd(0.42131, 0.00934), "0.4213 ± 0.0093");
        assert_eq!(value_delta(0.61404, -0.00871), "0.6140 (-0.0087)");
        assert_eq!(value_delta(0.5, 0.0), "0.5000 (+0.0000)");
    }

    #[test]
    fn parse_rejects_bad_rows() {
        let ok = format!("{METRICS_HEADER}\nfull\t100\t1\t0.5\t0.25\t0.2\n");
        let t = parse_metrics_tsv(&ok, "m").unwrap();
        assert_eq!(t[&ModelKind::Full][0].1.ndcg, 0.5);
        assert!(parse_metrics_tsv("x\n", "m").is_err());
        assert!(parse_metrics_tsv(&format!("{METRICS_HEADER}\nfull\t100\t1\n"), "m").is_err());
        assert!(parse_metrics_tsv(&format!("{METRICS_HEADER}\nlstm\t100\t1\t1\t1\t1\n"), "m").is_err());
    }
}
