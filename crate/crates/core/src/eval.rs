//! Classification metrics, per-label distribution statistics, and kernel
//! density estimates of the raw min-distances.

use crate::cloud::Label;
use crate::error::{Error, Result};
use crate::patchcore::AnomalyResult;

/// Default evaluation thresholds, expressed as fractions of the maximum
/// normalized score (which is 1 by construction).
pub const DEFAULT_THRESHOLDS: [f64; 2] = [0.3, 0.5];
pub const DEFAULT_KDE_GRID: usize = 512;

/// Label groups used for statistics; intrados and inner-crack points are
/// fused into one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelGroup {
    NonCrack,
    Intrados,
    Extrados,
    Water,
}

impl LabelGroup {
    pub const ALL: [LabelGroup; 4] = [
        LabelGroup::NonCrack,
        LabelGroup::Intrados,
        LabelGroup::Extrados,
        LabelGroup::Water,
    ];

    pub fn of(label: Label) -> Self {
        match label {
            Label::None => LabelGroup::NonCrack,
            Label::IntradosCrack | Label::InnerCrack => LabelGroup::Intrados,
            Label::ExtradosCrack => LabelGroup::Extrados,
            Label::WaterPatch => LabelGroup::Water,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LabelGroup::NonCrack => "non_crack",
            LabelGroup::Intrados => "intrados",
            LabelGroup::Extrados => "extrados",
            LabelGroup::Water => "water",
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GroupStats {
    pub group: LabelGroup,
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation (biased).
    pub std: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct KdeCurve {
    pub xs: Vec<f64>,
    pub densities: Vec<f64>,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub metrics: Vec<ThresholdMetrics>,
    pub group_stats: Vec<GroupStats>,
    pub group_kde: Vec<(LabelGroup, KdeCurve)>,
    pub thresholds: Vec<f64>,
    pub bandwidth_rule: String,
}

/// F1 at the given score thresholds. Positives are points with any
/// anomalous label; a point is predicted positive when its score strictly
/// exceeds the threshold.
pub fn f1_at(
    result: &AnomalyResult,
    labels: &[Label],
    thresholds: &[f64],
) -> Result<Vec<ThresholdMetrics>> {
    if labels.len() != result.scores.len() {
        return Err(Error::parameter(format!(
            "label count {} does not match result length {}",
            labels.len(),
            result.scores.len()
        )));
    }
    Ok(thresholds
        .iter()
        .map(|&t| {
            let mut tp = 0;
            let mut fp = 0;
            let mut fn_ = 0;
            let mut tn = 0;
            for (&s, &l) in result.scores.iter().zip(labels) {
                match (s > t, l.is_anomalous()) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => tn += 1,
                }
            }
            let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
            let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
            let f1 = if tp > 0 {
                2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
            } else {
                0.0
            };
            ThresholdMetrics {
                threshold: t,
                tp,
                fp,
                fn_,
                tn,
                precision,
                recall,
                f1,
            }
        })
        .collect())
}

/// Sample mean and population standard deviation of min_dists per label
/// group. Empty groups are omitted.
pub fn label_stats(result: &AnomalyResult, labels: &[Label]) -> Result<Vec<GroupStats>> {
    label_stats_opts(&result.min_dists, labels, false)
}

pub fn label_stats_opts(
    values: &[f64],
    labels: &[Label],
    sample_std: bool,
) -> Result<Vec<GroupStats>> {
    if labels.len() != values.len() {
        return Err(Error::parameter("label/value length mismatch"));
    }
    let mut out = Vec::new();
    for group in LabelGroup::ALL {
        let vals: Vec<f64> = values
            .iter()
            .zip(labels)
            .filter(|(_, &l)| LabelGroup::of(l) == group)
            .map(|(&v, _)| v)
            .collect();
        if vals.is_empty() {
            continue;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let denom = if sample_std && vals.len() > 1 { n - 1.0 } else { n };
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / denom;
        out.push(GroupStats {
            group,
            count: vals.len(),
            mean,
            std: var.sqrt(),
        });
    }
    Ok(out)
}

/// Gaussian-kernel density estimate on a uniform grid spanning
/// `[min - 3h, max + 3h]`, with Silverman's bandwidth
/// `h = 0.9 * min(sigma, IQR / 1.34) * n^(-1/5)`.
///
/// The curve is scaled so its trapezoid integral is exactly 1, which also
/// absorbs the kernel mass lost beyond the grid for very small samples.
pub fn kde(values: &[f64], grid_size: usize) -> Result<KdeCurve> {
    if values.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "kde needs at least 2 values, got {}",
            values.len()
        )));
    }
    if grid_size < 2 {
        return Err(Error::parameter("kde grid must have at least 2 points"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sigma = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let iqr = {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        quantile(&sorted, 0.75) - quantile(&sorted, 0.25)
    };
    let spread = if iqr > 0.0 { sigma.min(iqr / 1.34) } else { sigma };
    let h = 0.9 * spread * n.powf(-0.2);
    if !(h > 0.0) {
        return Err(Error::DegenerateInput("kde input has zero spread".into()));
    }

    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = min - 3.0 * h;
    let hi = max + 3.0 * h;
    let step = (hi - lo) / (grid_size - 1) as f64;
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let xs: Vec<f64> = (0..grid_size).map(|i| lo + i as f64 * step).collect();
    let mut densities: Vec<f64> = xs
        .iter()
        .map(|&x| {
            values
                .iter()
                .map(|&v| {
                    let z = (x - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();

    let integral = trapezoid(&xs, &densities);
    if integral > 0.0 {
        for d in &mut densities {
            *d /= integral;
        }
    }
    Ok(KdeCurve {
        xs,
        densities,
        bandwidth: h,
    })
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) * 0.5)
        .sum()
}

/// Full evaluation: confusion metrics at each threshold, per-group stats,
/// and a KDE curve for every group with enough spread.
pub fn evaluate(
    result: &AnomalyResult,
    labels: &[Label],
    thresholds: &[f64],
    kde_grid: usize,
) -> Result<EvalReport> {
    let metrics = f1_at(result, labels, thresholds)?;
    let group_stats = label_stats(result, labels)?;
    let mut group_kde = Vec::new();
    for group in LabelGroup::ALL {
        let vals: Vec<f64> = result
            .min_dists
            .iter()
            .zip(labels)
            .filter(|(_, &l)| LabelGroup::of(l) == group)
            .map(|(&v, _)| v)
            .collect();
        match kde(&vals, kde_grid) {
            Ok(curve) => group_kde.push((group, curve)),
            Err(Error::DegenerateInput(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(EvalReport {
        metrics,
        group_stats,
        group_kde,
        thresholds: thresholds.to_vec(),
        bandwidth_rule: "silverman".to_string(),
    })
}
