//! Anomaly heatmap rendering to a colored PLY.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use std::path::Path;

/// Blue-to-red ramp: scores at or above 0.5 are pure red; below, linear
/// interpolation in RGB from blue at 0 to red at 0.5, rounding half up.
pub fn score_color(score: f64) -> [u8; 3] {
    if score >= 0.5 {
        return [255, 0, 0];
    }
    let t = (score / 0.5).clamp(0.0, 1.0);
    let channel = |x: f64| (255.0 * x + 0.5).floor() as u8;
    [channel(t), 0, channel(1.0 - t)]
}

/// Write an ascii PLY with per-vertex color and the score as an extra
/// property. `scores` must already be filled per point (the pipeline copies
/// the nearest valid neighbor's score onto invalid-normal points).
pub fn write_heatmap(cloud: &PointCloud, scores: &[f64], path: &Path) -> Result<()> {
    if scores.len() != cloud.len() {
        return Err(Error::parameter(format!(
            "score count {} does not match cloud size {}",
            scores.len(),
            cloud.len()
        )));
    }
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    out.push_str("property float score\n");
    out.push_str("end_header\n");
    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        let [r, g, b] = score_color(scores[i]);
        out.push_str(&format!(
            "{} {} {} {r} {g} {b} {}\n",
            p[0], p[1], p[2], scores[i] as f32
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
