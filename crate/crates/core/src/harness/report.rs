//! Report files for a comparison run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

use super::ComparisonReport;

pub const PER_SCENARIO_HEADER: &str = "scenario,seed,arm";
pub const AGGREGATE_HEADER: &str =
    "arm,runs,flow_rate,mean_delay,flow_improvement_pct,delay_improvement_pct";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub(super) fn per_scenario_csv(report: &ComparisonReport) -> String {
    let mut out = format!("{PER_SCENARIO_HEADER},{}\n", MetricsReport::CSV_HEADER);
    for r in &report.rows {
        for (arm, m) in [("baseline", &r.baseline), ("treatment", &r.treatment)] {
            let _ = writeln!(out, "{},{},{arm},{}", r.scenario, r.seed, m.csv_row());
        }
    }
    out
}

pub(super) fn aggregate_csv(report: &ComparisonReport) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    if report.rows.is_empty() {
        return out;
    }
    let a = &report.aggregate;
    let _ = writeln!(
        out,
        "baseline,{},{},{},,",
        a.runs,
        a.baseline_flow,
        opt(a.baseline_delay)
    );
    let _ = writeln!(
        out,
        "treatment,{},{},{},{},{}",
        a.runs,
        a.treatment_flow,
        opt(a.treatment_delay),
        opt(a.flow_improvement_pct),
        opt(a.delay_improvement_pct)
    );
    out
}

pub(super) fn summary_text(report: &ComparisonReport) -> String {
    let a = &report.aggregate;
    let delay =
        |d: Option<f64>| d.map_or_else(|| "undefined".to_string(), |d| format!("{d:.2} s/veh"));
    let pct = |p: Option<f64>| p.map_or_else(|| "n/a".to_string(), |p| format!("{p:+.1}%"));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "comparison: {} (baseline) vs {} (treatment)",
        report.baseline, report.treatment
    );
    let _ = writeln!(out, "runs: {}", a.runs);
    let _ = writeln!(
        out,
        "mean flow rate   baseline {:.3} veh/min, treatment {:.3} veh/min, change {}",
        a.baseline_flow,
        a.treatment_flow,
        pct(a.flow_improvement_pct)
    );
    let _ = writeln!(
        out,
        "mean delay       baseline {}, treatment {}, reduction {}",
        delay(a.baseline_delay),
        delay(a.treatment_delay),
        pct(a.delay_improvement_pct)
    );
    let _ = writeln!(
        out,
        "reference magnitudes: flow 15 -> 21 veh/min, delay 12 -> 5 s/veh"
    );
    for note in &report.notes {
        let _ = writeln!(out, "note: {note}");
    }
    out
}

/// Writes `per_scenario.csv`, `aggregate.csv` and `summary.txt` into `out_dir`,
/// creating it if needed. Output depends only on the report.
pub fn emit_report(report: &ComparisonReport, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(vec![
        write(dir.join("per_scenario.csv"), &per_scenario_csv(report))?,
        write(dir.join("aggregate.csv"), &aggregate_csv(report))?,
        write(dir.join("summary.txt"), &summary_text(report))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{generate_suite, run_comparison, ControllerKind, ExperimentConfig};

    fn report() -> ComparisonReport {
        let suite: Vec<_> = generate_suite(2, 8)
            .into_iter()
            .map(|mut s| {
                s.horizon = 3600;
                s
            })
            .collect();
        let mut config = ExperimentConfig {
            seeds: vec![1, 2],
            baseline: ControllerKind::Fixed,
            treatment: ControllerKind::Fixed,
            ..ExperimentConfig::default()
        };
        config.fixed.cycle = 60.0;
        let mut r = run_comparison(&config, &suite, None).unwrap();
        config.fixed.cycle = 100.0;
        let other = run_comparison(&config, &suite, None).unwrap();
        for (row, o) in r.rows.iter_mut().zip(other.rows) {
            row.treatment = o.baseline;
        }
        ComparisonReport::new(r.baseline, r.treatment, r.rows)
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = ComparisonReport::new(ControllerKind::Fixed, ControllerKind::Astm, vec![]);
        let dir = tempfile::tempdir().unwrap();
        emit_report(&r, dir.path()).unwrap();
        let per = std::fs::read_to_string(dir.path().join("per_scenario.csv")).unwrap();
        let agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
        assert_eq!(per.lines().count(), 1);
        assert_eq!(agg, format!("{AGGREGATE_HEADER}\n"));
    }

    #[test]
    fn rerun_is_byte_identical() {
        let r = report();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        emit_report(&r, a.path()).unwrap();
        emit_report(&report(), b.path()).unwrap();
        for f in ["per_scenario.csv", "aggregate.csv", "summary.txt"] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn aggregate_is_mean_of_rows() {
        let r = report();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&r, dir.path()).unwrap();
        let mut rdr = csv::Reader::from_path(dir.path().join("per_scenario.csv")).unwrap();
        let (mut flow, mut delay, mut n) = ([0.0; 2], [0.0; 2], [0usize; 2]);
        for rec in rdr.records() {
            let rec = rec.unwrap();
            let arm = usize::from(&rec[2] == "treatment");
            flow[arm] += rec[5].parse::<f64>().unwrap();
            delay[arm] += rec[6].parse::<f64>().unwrap();
            n[arm] += 1;
        }
        let mut agg = csv::Reader::from_path(dir.path().join("aggregate.csv")).unwrap();
        let rows: Vec<_> = agg.records().map(|r| r.unwrap()).collect();
        for arm in 0..2 {
            let f: f64 = rows[arm][2].parse().unwrap();
            let d: f64 = rows[arm][3].parse().unwrap();
            assert!((f - flow[arm] / n[arm] as f64).abs() < 1e-9);
            assert!((d - delay[arm] / n[arm] as f64).abs() < 1e-9);
        }
        let b: f64 = rows[0][3].parse().unwrap();
        let t: f64 = rows[1][3].parse().unwrap();
        let pct: f64 = rows[1][5].parse().unwrap();
        assert!((pct - 100.0 * (b - t) / b).abs() < 1e-9);
    }
}
