//! End-to-end orchestration: downsample, normals, descriptors, memory bank,
//! scoring and evaluation. Stages are internally parallel but their outputs
//! are deterministic for any worker count.

use crate::cloud::{voxel_downsample, Label, PointCloud};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport, DEFAULT_KDE_GRID};
use crate::features::{fpfh, fuse_multimodal, intensity_histogram, FeatureMatrix};
use crate::index::SpatialIndex;
use crate::io::config::{FeatureMode, RunConfig};
use crate::normals::{estimate_normals, NormalConvention, NormalField};
use crate::patchcore::{build_memory, score, AnomalyResult, CoresetInit, MemoryBank};

/// Everything the pipeline produces for one reference/test pair.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Downsampled test cloud the scores refer to.
    pub cloud: PointCloud,
    /// Raw scoring result; rows cover only points with a descriptor.
    pub result: AnomalyResult,
    /// Per-point min distance, invalid points filled from their nearest
    /// scored neighbor.
    pub min_dists: Vec<f64>,
    /// Per-point normalized score, filled the same way.
    pub scores: Vec<f64>,
    pub bank: MemoryBank,
    /// Present when the test cloud carries labels.
    pub report: Option<EvalReport>,
}

/// Downsample a cloud and estimate its normals per the config.
pub fn prepare(
    cloud: &PointCloud,
    config: &RunConfig,
) -> Result<(PointCloud, SpatialIndex, Option<NormalField>)> {
    let down = voxel_downsample(cloud, config.voxel_size)?;
    let index = SpatialIndex::build(&down);
    let normals = if config.feature_mode == FeatureMode::Intensity {
        None
    } else {
        let convention = match config.normal_viewpoint {
            Some(vp) => NormalConvention::Viewpoint(vp),
            None => NormalConvention::PlusZ,
        };
        Some(estimate_normals(&down, &index, config.normal_radius, convention)?)
    };
    Ok((down, index, normals))
}

/// Build the descriptor matrix selected by `feature_mode`.
pub fn extract_features(
    cloud: &PointCloud,
    index: &SpatialIndex,
    normals: Option<&NormalField>,
    config: &RunConfig,
) -> Result<FeatureMatrix> {
    match config.feature_mode {
        FeatureMode::Fpfh => {
            let normals = normals
                .ok_or_else(|| Error::parameter("geometric features require normals"))?;
            fpfh(cloud, normals, index, config.feature_radius, config.bins)
        }
        FeatureMode::Intensity => {
            intensity_histogram(cloud, index, config.intensity_radius, config.bins, None)
        }
        FeatureMode::Multi => {
            let normals = normals
                .ok_or_else(|| Error::parameter("geometric features require normals"))?;
            let geo = fpfh(cloud, normals, index, config.feature_radius, config.bins)?;
            let inten = intensity_histogram(
                cloud,
                index,
                config.intensity_radius,
                config.bins,
                Some(&normals.valid),
            )?;
            fuse_multimodal(&geo, &inten, config.intensity_weight)
        }
    }
}

/// Coreset the reference descriptors into a memory bank.
pub fn build_bank(
    features: &FeatureMatrix,
    config: &RunConfig,
    source_id: &str,
) -> Result<MemoryBank> {
    build_memory(
        features,
        config.bank_size,
        config.seed,
        CoresetInit::SeededRandom,
        source_id,
    )
}

/// Run the full chain on an in-memory pair.
pub fn run(reference: &PointCloud, test: &PointCloud, config: &RunConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let (ref_down, ref_index, ref_normals) = prepare(reference, config)?;
    let ref_features = extract_features(&ref_down, &ref_index, ref_normals.as_ref(), config)?;
    let source_id = if reference.frame_id.is_empty() {
        "reference"
    } else {
        &reference.frame_id
    };
    let bank = build_bank(&ref_features, config, source_id)?;
    detect(test, &bank, config)
}

/// Score a test cloud against an existing bank.
pub fn detect(test: &PointCloud, bank: &MemoryBank, config: &RunConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let (down, index, normals) = prepare(test, config)?;
    let features = extract_features(&down, &index, normals.as_ref(), config)?;
    let result = score(&features, bank)?;
    let (min_dists, scores) = fill_per_point(&down, &result)?;
    let report = match &down.labels {
        Some(labels) => {
            let row_labels: Vec<Label> = result
                .point_ids
                .iter()
                .map(|&id| labels[id as usize])
                .collect();
            Some(evaluate(&result, &row_labels, &config.thresholds, DEFAULT_KDE_GRID)?)
        }
        None => None,
    };
    Ok(PipelineOutput {
        cloud: down,
        result,
        min_dists,
        scores,
        bank: bank.clone(),
        report,
    })
}

/// Expand row-aligned results to per-point vectors; points without a
/// descriptor (invalid normals) take the values of their nearest scored
/// neighbor in Euclidean distance, ties broken by lowest point index.
fn fill_per_point(cloud: &PointCloud, result: &AnomalyResult) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = cloud.len();
    let mut row_of = vec![usize::MAX; n];
    for (row, &id) in result.point_ids.iter().enumerate() {
        row_of[id as usize] = row;
    }
    let mut min_dists = vec![0.0f64; n];
    let mut scores = vec![0.0f64; n];
    for i in 0..n {
        if row_of[i] != usize::MAX {
            min_dists[i] = result.min_dists[row_of[i]];
            scores[i] = result.scores[row_of[i]];
        }
    }
    if result.point_ids.len() == n {
        return Ok((min_dists, scores));
    }
    if result.point_ids.is_empty() {
        return Err(Error::DegenerateInput(
            "no point received a descriptor; cannot fill scores".to_string(),
        ));
    }
    for i in 0..n {
        if row_of[i] != usize::MAX {
            continue;
        }
        let p = cloud.positions[i];
        let mut best = f64::INFINITY;
        let mut best_id = usize::MAX;
        for &id in &result.point_ids {
            let q = cloud.positions[id as usize];
            let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
            if d2 < best || (d2 == best && (id as usize) < best_id) {
                best = d2;
                best_id = id as usize;
            }
        }
        min_dists[i] = min_dists[best_id];
        scores[i] = scores[best_id];
    }
    Ok((min_dists, scores))
}
