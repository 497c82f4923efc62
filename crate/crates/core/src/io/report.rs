//! Result rendering: scores CSV, evaluation report (text + CSV tables) and
//! KDE curve CSVs. All output is deterministic for identical inputs.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::patchcore::AnomalyResult;
use std::path::Path;

/// Per-point scores, one row per cloud point.
///
/// `min_dists` and `scores` must already cover every point (invalid-normal
/// points filled by the pipeline); the predicted columns apply the 0.3 and
/// 0.5 thresholds with strict inequality.
pub fn scores_csv(cloud: &PointCloud, min_dists: &[f64], scores: &[f64]) -> Result<String> {
    if min_dists.len() != cloud.len() || scores.len() != cloud.len() {
        return Err(Error::parameter(format!(
            "score rows ({}/{}) do not match cloud size {}",
            min_dists.len(),
            scores.len(),
            cloud.len()
        )));
    }
    let mut out = String::from("point_id,x,y,z,min_dist,score,label,predicted_03,predicted_05\n");
    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        let label = cloud
            .labels
            .as_ref()
            .map_or("", |l| l[i].name());
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            i,
            p[0],
            p[1],
            p[2],
            min_dists[i],
            scores[i],
            label,
            (scores[i] > 0.3) as u8,
            (scores[i] > 0.5) as u8,
        ));
    }
    Ok(out)
}

pub fn write_scores_csv(
    cloud: &PointCloud,
    min_dists: &[f64],
    scores: &[f64],
    path: &Path,
) -> Result<()> {
    let text = scores_csv(cloud, min_dists, scores)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Convenience for scoring output that is already per-point aligned.
pub fn write_result_csv(cloud: &PointCloud, result: &AnomalyResult, path: &Path) -> Result<()> {
    write_scores_csv(cloud, &result.min_dists, &result.scores, path)
}

/// Human-readable report: metrics per threshold, then group statistics.
pub fn report_text(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("anomaly evaluation report\n");
    out.push_str(&format!(
        "thresholds: {}\n",
        report
            .thresholds
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    ));
    out.push_str(&format!("bandwidth rule: {}\n\n", report.bandwidth_rule));

    out.push_str("metrics:\n");
    for m in &report.metrics {
        out.push_str(&format!(
            "  threshold {:.3}: tp={} fp={} fn={} tn={} precision={:.4} recall={:.4} f1={:.4}\n",
            m.threshold, m.tp, m.fp, m.fn_, m.tn, m.precision, m.recall, m.f1
        ));
    }

    out.push_str("\nlabel groups (min_dist statistics):\n");
    for g in &report.group_stats {
        out.push_str(&format!(
            "  {}: count={} mean={:.6} std={:.6}\n",
            g.group.name(),
            g.count,
            g.mean,
            g.std
        ));
    }
    out
}

/// One row per threshold.
pub fn metrics_csv(report: &EvalReport) -> String {
    let mut out = String::from("threshold,tp,fp,fn,tn,precision,recall,f1\n");
    for m in &report.metrics {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            m.threshold, m.tp, m.fp, m.fn_, m.tn, m.precision, m.recall, m.f1
        ));
    }
    out
}

/// One row per non-empty label group.
pub fn groups_csv(report: &EvalReport) -> String {
    let mut out = String::from("group,count,mean,std\n");
    for g in &report.group_stats {
        out.push_str(&format!("{},{},{},{}\n", g.group.name(), g.count, g.mean, g.std));
    }
    out
}

/// Two-column CSV per KDE curve, one file per group; returns
/// `(group_name, csv_text)` pairs.
pub fn kde_csvs(report: &EvalReport) -> Vec<(&'static str, String)> {
    report
        .group_kde
        .iter()
        .map(|(group, curve)| {
            let mut out = String::from("x,density\n");
            for (x, d) in curve.xs.iter().zip(&curve.densities) {
                out.push_str(&format!("{x},{d}\n"));
            }
            (group.name(), out)
        })
        .collect()
}

/// Write the full report family under `dir` with a common `stem`:
/// `<stem>_report.txt`, `<stem>_metrics.csv`, `<stem>_groups.csv`, and
/// `<stem>_kde_<group>.csv` per group.
pub fn write_report(report: &EvalReport, dir: &Path, stem: &str) -> Result<()> {
    let write = |name: String, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    write(format!("{stem}_report.txt"), report_text(report))?;
    write(format!("{stem}_metrics.csv"), metrics_csv(report))?;
    write(format!("{stem}_groups.csv"), groups_csv(report))?;
    for (group, text) in kde_csvs(report) {
        write(format!("{stem}_kde_{group}.csv"), text)?;
    }
    Ok(())
}
