//! Point-cloud container and voxel downsampling.

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Per-point ground-truth category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    None,
    IntradosCrack,
    ExtradosCrack,
    InnerCrack,
    WaterPatch,
}

impl Label {
    pub fn is_anomalous(self) -> bool {
        self != Label::None
    }

    pub fn code(self) -> u8 {
        match self {
            Label::None => 0,
            Label::IntradosCrack => 1,
            Label::ExtradosCrack => 2,
            Label::InnerCrack => 3,
            Label::WaterPatch => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Label::None),
            1 => Some(Label::IntradosCrack),
            2 => Some(Label::ExtradosCrack),
            3 => Some(Label::InnerCrack),
            4 => Some(Label::WaterPatch),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::None => "none",
            Label::IntradosCrack => "intrados_crack",
            Label::ExtradosCrack => "extrados_crack",
            Label::InnerCrack => "inner_crack",
            Label::WaterPatch => "water_patch",
        }
    }
}

/// Positions, intensities and optional labels for one scan.
///
/// Intensities are kept twice: `raw` exactly as loaded (for lossless
/// round-trips) and `intensities` min-max normalized to `[0, 1]`, which is
/// what every feature consumes. Constructing a cloud in memory takes the
/// normalized values directly.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<[f64; 3]>,
    /// Normalized intensities in [0, 1].
    pub intensities: Vec<f64>,
    /// Raw intensities as loaded; equals `intensities` for generated clouds.
    pub raw_intensities: Vec<f32>,
    pub labels: Option<Vec<Label>>,
    pub frame_id: String,
}

impl PointCloud {
    /// Build a cloud from already-normalized intensities.
    pub fn new(positions: Vec<[f64; 3]>, intensities: Vec<f64>) -> Result<Self> {
        let raw = intensities.iter().map(|&i| i as f32).collect();
        Self::with_raw(positions, intensities, raw, None, String::new())
    }

    pub fn with_labels(
        positions: Vec<[f64; 3]>,
        intensities: Vec<f64>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        let raw = intensities.iter().map(|&i| i as f32).collect();
        Self::with_raw(positions, intensities, raw, Some(labels), String::new())
    }

    pub fn with_raw(
        positions: Vec<[f64; 3]>,
        intensities: Vec<f64>,
        raw_intensities: Vec<f32>,
        labels: Option<Vec<Label>>,
        frame_id: String,
    ) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::parameter("point cloud must contain at least one point"));
        }
        if intensities.len() != n || raw_intensities.len() != n {
            return Err(Error::parameter(format!(
                "intensity count {} does not match position count {n}",
                intensities.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::parameter(format!(
                    "label count {} does not match position count {n}",
                    l.len()
                )));
            }
        }
        for (i, p) in positions.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::parameter(format!("non-finite position at point {i}")));
            }
        }
        for (i, &v) in intensities.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::parameter(format!(
                    "normalized intensity {v} out of [0,1] at point {i}"
                )));
            }
        }
        Ok(Self {
            positions,
            intensities,
            raw_intensities,
            labels,
            frame_id,
        })
    }

    /// Build a cloud from raw intensities, min-max normalizing them to [0, 1].
    /// A constant raw signal maps to all zeros.
    pub fn from_raw_intensities(
        positions: Vec<[f64; 3]>,
        raw: Vec<f32>,
        labels: Option<Vec<Label>>,
        frame_id: String,
    ) -> Result<Self> {
        for (i, &v) in raw.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::parameter(format!("non-finite intensity at point {i}")));
            }
        }
        let min = raw.iter().cloned().fold(f32::INFINITY, f32::min) as f64;
        let max = raw.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
        let span = max - min;
        let normalized = raw
            .iter()
            .map(|&v| {
                if span > 0.0 {
                    ((v as f64 - min) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        Self::with_raw(positions, normalized, raw, labels, frame_id)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels.as_ref().map_or(Label::None, |l| l[i])
    }
}

/// Downsample to at most one point per occupied voxel.
///
/// Output position is the centroid of member points, intensity the mean of
/// member intensities, and the label the majority label with ties resolved
/// in favour of any anomalous label. The grid is anchored at
/// `floor(bbox_min / voxel_size)` so results do not depend on point order.
/// Output voxels are emitted in lexicographic grid order.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> Result<PointCloud> {
    if !(voxel_size > 0.0) {
        return Err(Error::parameter(format!(
            "voxel_size must be positive, got {voxel_size}"
        )));
    }
    let mut bbox_min = [f64::INFINITY; 3];
    for p in &cloud.positions {
        for a in 0..3 {
            bbox_min[a] = bbox_min[a].min(p[a]);
        }
    }
    let origin = [
        (bbox_min[0] / voxel_size).floor() * voxel_size,
        (bbox_min[1] / voxel_size).floor() * voxel_size,
        (bbox_min[2] / voxel_size).floor() * voxel_size,
    ];

    // Group member indices per voxel key, preserving input order.
    let mut voxels: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in cloud.positions.iter().enumerate() {
        let key = [
            ((p[0] - origin[0]) / voxel_size).floor() as i64,
            ((p[1] - origin[1]) / voxel_size).floor() as i64,
            ((p[2] - origin[2]) / voxel_size).floor() as i64,
        ];
        voxels.entry(key).or_default().push(i);
    }

    let mut keys: Vec<[i64; 3]> = voxels.keys().cloned().collect();
    keys.sort_unstable();

    let mut positions = Vec::with_capacity(keys.len());
    let mut intensities = Vec::with_capacity(keys.len());
    let mut raw = Vec::with_capacity(keys.len());
    let mut labels = cloud.labels.as_ref().map(|_| Vec::with_capacity(keys.len()));

    for key in &keys {
        let members = &voxels[key];
        let inv = 1.0 / members.len() as f64;
        let mut cp = [0.0f64; 3];
        let mut ci = 0.0f64;
        let mut cr = 0.0f64;
        for &i in members {
            let p = cloud.positions[i];
            cp[0] += p[0];
            cp[1] += p[1];
            cp[2] += p[2];
            ci += cloud.intensities[i];
            cr += cloud.raw_intensities[i] as f64;
        }
        positions.push([cp[0] * inv, cp[1] * inv, cp[2] * inv]);
        intensities.push((ci * inv).clamp(0.0, 1.0));
        raw.push((cr * inv) as f32);
        if let Some(out) = labels.as_mut() {
            out.push(majority_label(cloud.labels.as_ref().unwrap(), members));
        }
    }

    PointCloud::with_raw(positions, intensities, raw, labels, cloud.frame_id.clone())
}

/// Majority vote over member labels; ties go to an anomalous label so
/// downsampling never erases ground truth.
fn majority_label(labels: &[Label], members: &[usize]) -> Label {
    let mut counts: [usize; 5] = [0; 5];
    for &i in members {
        counts[labels[i].code() as usize] += 1;
    }
    let max = *counts.iter().max().unwrap();
    // Scan anomalous codes first; Label::None only wins outright.
    for code in 1..5u8 {
        if counts[code as usize] == max {
            return Label::from_code(code).unwrap();
        }
    }
    Label::None
}
