//! FPFH angle histograms, the local intensity-difference histogram, and
//! their fusion into one multimodal descriptor.
//!
//! Descriptor rows are stored per *valid* point (points whose normal
//! estimation succeeded); `point_ids` maps rows back to source points.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::normals::{NormalConvention, NormalField};
use crate::parallel;

/// Default bins per histogram block.
pub const DEFAULT_BINS: usize = 30;
/// Default ball-query radius (m) for the geometric descriptor; tunnel-class
/// scenes typically use 0.6 m instead.
pub const DEFAULT_FEATURE_RADIUS: f64 = 1.0;

/// Sin threshold below which the pair frame is considered degenerate
/// (connecting line parallel to the source normal).
const DEGENERATE_FRAME_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Alpha,
    Phi,
    Theta,
    Intensity,
}

/// Ordered block structure of a descriptor row plus the parameters that
/// produced it. Two matrices may only be compared when layouts are equal.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureLayout {
    /// (kind, bins) per block, in row order.
    pub blocks: Vec<(BlockKind, usize)>,
    pub geo_radius: Option<f64>,
    pub intensity_radius: Option<f64>,
    pub normal_convention: Option<NormalConvention>,
    /// Scale applied to the intensity block at fusion time.
    pub intensity_weight: Option<f64>,
}

impl FeatureLayout {
    pub fn width(&self) -> usize {
        self.blocks.iter().map(|(_, b)| b).sum()
    }

    pub fn geometric(bins: usize, radius: f64, convention: NormalConvention) -> Self {
        FeatureLayout {
            blocks: vec![
                (BlockKind::Alpha, bins),
                (BlockKind::Phi, bins),
                (BlockKind::Theta, bins),
            ],
            geo_radius: Some(radius),
            intensity_radius: None,
            normal_convention: Some(convention),
            intensity_weight: None,
        }
    }

    pub fn intensity(bins: usize, radius: f64) -> Self {
        FeatureLayout {
            blocks: vec![(BlockKind::Intensity, bins)],
            geo_radius: None,
            intensity_radius: Some(radius),
            normal_convention: None,
            intensity_weight: None,
        }
    }
}

/// Per-point descriptor rows with a declared block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub layout: FeatureLayout,
    pub width: usize,
    /// Row-major data, `rows * width` values.
    pub data: Vec<f32>,
    /// Source point index per row.
    pub point_ids: Vec<u32>,
    /// Bitmask per row; bit `b` set means block `b` had no contributing pairs.
    pub empty: Vec<u8>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.point_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn block_empty(&self, row: usize, block: usize) -> bool {
        self.empty[row] & (1 << block) != 0
    }
}

/// The three Darboux-frame pair angles plus the pair distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAngles {
    /// v . n_t, in [-1, 1].
    pub alpha: f64,
    /// u . unit(p_t - p_s), in [-1, 1].
    pub phi: f64,
    /// atan2(w . n_t, u . n_t), in [-pi, pi].
    pub theta: f64,
    /// Pair distance in meters, > 0.
    pub d: f64,
}

/// Compute the Darboux-frame angles for a point pair.
///
/// Source/target roles are assigned first: the point whose normal makes the
/// smaller angle with the connecting line becomes the source (ties keep the
/// argument order). Returns `Ok(None)` when the frame is degenerate, i.e.
/// the connecting line is parallel to the source normal; such pairs carry
/// no orientation information and are skipped in histograms.
pub fn darboux_angles(
    p_s: [f64; 3],
    n_s: [f64; 3],
    p_t: [f64; 3],
    n_t: [f64; 3],
) -> Result<Option<PairAngles>> {
    let diff = sub(p_t, p_s);
    let d = norm(diff);
    if !(d > 0.0) {
        return Err(Error::parameter("coincident points in angle computation"));
    }
    let line = scale(diff, 1.0 / d);

    // |cos| to the line measures the angle to the (unoriented) line.
    let cos_s = dot(n_s, line).abs();
    let cos_t = dot(n_t, line).abs();
    let (ps, ns, pt, nt) = if cos_t - cos_s > 1e-12 {
        (p_t, n_t, p_s, n_s)
    } else {
        (p_s, n_s, p_t, n_t)
    };

    let t_hat = scale(sub(pt, ps), 1.0 / d);
    let u = ns;
    let v_raw = cross(t_hat, u);
    let v_norm = norm(v_raw);
    if v_norm < DEGENERATE_FRAME_EPS {
        return Ok(None);
    }
    let v = scale(v_raw, 1.0 / v_norm);
    let w = cross(u, v);

    Ok(Some(PairAngles {
        alpha: dot(v, nt),
        phi: dot(u, t_hat),
        theta: f64::atan2(dot(w, nt), dot(u, nt)),
        d,
    }))
}

/// Half-open uniform binning over [lo, hi]; the final bin is closed so
/// boundary values at `hi` are kept.
#[inline]
fn bin_index(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = (value - lo) / (hi - lo);
    ((t * bins as f64) as usize).min(bins - 1)
}

/// Simplified per-point angle histograms: every (center, neighbor) pair's
/// Darboux angles are accumulated into three blocks of `bins` bins each
/// (alpha and phi over [-1, 1], theta over [-pi, pi]) and each block is
/// normalized to sum 1. Empty neighborhoods yield all-zero flagged blocks.
pub fn spfh(
    cloud: &PointCloud,
    normals: &NormalField,
    index: &SpatialIndex,
    r: f64,
    bins: usize,
) -> Result<FeatureMatrix> {
    let neighbors = valid_neighbor_lists(normals, index, r, bins)?;
    spfh_with_neighbors(cloud, normals, &neighbors, r, bins)
}

/// Valid point ids and their valid neighbors within `r`.
struct NeighborLists {
    point_ids: Vec<u32>,
    /// Per valid point, neighbor ids restricted to valid points, ascending.
    lists: Vec<Vec<u32>>,
    /// Row index per source point id, u32::MAX for invalid points.
    row_of_point: Vec<u32>,
}

fn valid_neighbor_lists(
    normals: &NormalField,
    index: &SpatialIndex,
    r: f64,
    bins: usize,
) -> Result<NeighborLists> {
    if !(r > 0.0) {
        return Err(Error::parameter(format!("feature radius must be > 0, got {r}")));
    }
    if bins < 2 {
        return Err(Error::parameter(format!("bin count must be >= 2, got {bins}")));
    }
    let n = normals.valid.len();
    let mut point_ids = Vec::new();
    let mut row_of_point = vec![u32::MAX; n];
    for i in 0..n {
        if normals.valid[i] {
            row_of_point[i] = point_ids.len() as u32;
            point_ids.push(i as u32);
        }
    }
    let lists = parallel::map_indexed(point_ids.len(), |row| {
        let i = point_ids[row] as usize;
        let mut ids = index.ball_query(i, r).expect("id in range");
        ids.retain(|&j| normals.valid[j as usize]);
        ids
    });
    Ok(NeighborLists {
        point_ids,
        lists,
        row_of_point,
    })
}

fn spfh_with_neighbors(
    cloud: &PointCloud,
    normals: &NormalField,
    neighbors: &NeighborLists,
    r: f64,
    bins: usize,
) -> Result<FeatureMatrix> {
    let width = 3 * bins;
    let rows: Vec<(Vec<f32>, u8)> = parallel::map_indexed(neighbors.point_ids.len(), |row| {
        let i = neighbors.point_ids[row] as usize;
        let mut hist = vec![0.0f64; width];
        let mut pairs = 0usize;
        for &j in &neighbors.lists[row] {
            let j = j as usize;
            let angles = darboux_angles(
                cloud.positions[i],
                normals.normals[i],
                cloud.positions[j],
                normals.normals[j],
            )
            .expect("ball query excludes the center point");
            if let Some(a) = angles {
                hist[bin_index(a.alpha, -1.0, 1.0, bins)] += 1.0;
                hist[bins + bin_index(a.phi, -1.0, 1.0, bins)] += 1.0;
                hist[2 * bins
                    + bin_index(a.theta, -std::f64::consts::PI, std::f64::consts::PI, bins)] +=
                    1.0;
                pairs += 1;
            }
        }
        if pairs == 0 {
            return (vec![0.0f32; width], 0b111);
        }
        let inv = 1.0 / pairs as f64;
        (hist.iter().map(|&v| (v * inv) as f32).collect(), 0)
    });

    let mut data = Vec::with_capacity(rows.len() * width);
    let mut empty = Vec::with_capacity(rows.len());
    for (row, flags) in rows {
        data.extend_from_slice(&row);
        empty.push(flags);
    }
    Ok(FeatureMatrix {
        layout: FeatureLayout::geometric(bins, r, normals.convention),
        width,
        data,
        point_ids: neighbors.point_ids.clone(),
        empty,
    })
}

/// FPFH: each point's simplified histogram plus the distance-weighted mean
/// of its neighbors' histograms, re-normalized per block:
/// `FPFH(p) = SPFH(p) + (1/k) * sum_i SPFH(p_i) / ||p - p_i||`.
pub fn fpfh(
    cloud: &PointCloud,
    normals: &NormalField,
    index: &SpatialIndex,
    r: f64,
    bins: usize,
) -> Result<FeatureMatrix> {
    let neighbors = valid_neighbor_lists(normals, index, r, bins)?;
    let simplified = spfh_with_neighbors(cloud, normals, &neighbors, r, bins)?;
    let width = simplified.width;

    let rows: Vec<(Vec<f32>, u8)> = parallel::map_indexed(neighbors.point_ids.len(), |row| {
        let i = neighbors.point_ids[row] as usize;
        let p = cloud.positions[i];
        let mut acc = vec![0.0f64; width];
        let own = simplified.row(row);
        for (a, &v) in acc.iter_mut().zip(own) {
            *a = v as f64;
        }
        let mut k = 0usize;
        let mut weighted = vec![0.0f64; width];
        for &j in &neighbors.lists[row] {
            let q = cloud.positions[j as usize];
            let omega = norm(sub(q, p));
            if omega < 1e-12 {
                continue;
            }
            let jrow = neighbors.row_of_point[j as usize] as usize;
            let srow = simplified.row(jrow);
            let w = 1.0 / omega;
            for (acc_v, &v) in weighted.iter_mut().zip(srow) {
                *acc_v += w * v as f64;
            }
            k += 1;
        }
        if k > 0 {
            let inv_k = 1.0 / k as f64;
            for (a, wv) in acc.iter_mut().zip(&weighted) {
                *a += wv * inv_k;
            }
        }
        // Re-normalize each block to sum 1; all-zero blocks stay empty.
        let bins = width / 3;
        let mut flags = 0u8;
        let mut out = vec![0.0f32; width];
        for b in 0..3 {
            let block = &acc[b * bins..(b + 1) * bins];
            let sum: f64 = block.iter().sum();
            if sum > 0.0 {
                for (o, &v) in out[b * bins..(b + 1) * bins].iter_mut().zip(block) {
                    *o = (v / sum) as f32;
                }
            } else {
                flags |= 1 << b;
            }
        }
        (out, flags)
    });

    let mut data = Vec::with_capacity(rows.len() * width);
    let mut empty = Vec::with_capacity(rows.len());
    for (row, flags) in rows {
        data.extend_from_slice(&row);
        empty.push(flags);
    }
    Ok(FeatureMatrix {
        layout: FeatureLayout::geometric(bins, r, normals.convention),
        width,
        data,
        point_ids: neighbors.point_ids,
        empty,
    })
}

/// Histogram of absolute intensity differences `|I_c - I_j|` between each
/// point and its ball-query neighbors, binned uniformly over [0, 1].
///
/// `valid` optionally restricts both rows and neighbors to the given mask so
/// the result stays row-aligned with a geometric matrix from the same cloud.
pub fn intensity_histogram(
    cloud: &PointCloud,
    index: &SpatialIndex,
    r: f64,
    bins: usize,
    valid: Option<&[bool]>,
) -> Result<FeatureMatrix> {
    if !(r > 0.0) {
        return Err(Error::parameter(format!("intensity radius must be > 0, got {r}")));
    }
    if bins < 2 {
        return Err(Error::parameter(format!("bin count must be >= 2, got {bins}")));
    }
    if let Some(mask) = valid {
        if mask.len() != cloud.len() {
            return Err(Error::parameter("validity mask length mismatch"));
        }
    }
    let is_valid = |i: usize| valid.map_or(true, |m| m[i]);
    let point_ids: Vec<u32> = (0..cloud.len() as u32)
        .filter(|&i| is_valid(i as usize))
        .collect();

    let rows: Vec<(Vec<f32>, u8)> = parallel::map_indexed(point_ids.len(), |row| {
        let i = point_ids[row] as usize;
        let mut ids = index.ball_query(i, r).expect("id in range");
        ids.retain(|&j| is_valid(j as usize));
        if ids.is_empty() {
            return (vec![0.0f32; bins], 1);
        }
        let mut hist = vec![0.0f64; bins];
        let ic = cloud.intensities[i];
        for &j in &ids {
            let diff = (ic - cloud.intensities[j as usize]).abs();
            hist[bin_index(diff, 0.0, 1.0, bins)] += 1.0;
        }
        let inv = 1.0 / ids.len() as f64;
        (hist.iter().map(|&v| (v * inv) as f32).collect(), 0)
    });

    let mut data = Vec::with_capacity(rows.len() * bins);
    let mut empty = Vec::with_capacity(rows.len());
    for (row, flags) in rows {
        data.extend_from_slice(&row);
        empty.push(flags);
    }
    Ok(FeatureMatrix {
        layout: FeatureLayout::intensity(bins, r),
        width: bins,
        data,
        point_ids,
        empty,
    })
}

/// Row-wise concatenation `[geometric blocks | weight * intensity block]`.
pub fn fuse_multimodal(
    geo: &FeatureMatrix,
    inten: &FeatureMatrix,
    weight: f64,
) -> Result<FeatureMatrix> {
    if geo.point_ids != inten.point_ids {
        return Err(Error::parameter(format!(
            "feature matrices cover different point sets ({} vs {} rows)",
            geo.rows(),
            inten.rows()
        )));
    }
    let geo_bins = geo.layout.blocks.first().map(|(_, b)| *b).unwrap_or(0);
    let int_bins = inten.layout.blocks.first().map(|(_, b)| *b).unwrap_or(0);
    if geo_bins != int_bins {
        return Err(Error::parameter(format!(
            "incompatible bin counts: {geo_bins} vs {int_bins}"
        )));
    }
    let width = geo.width + inten.width;
    let rows = geo.rows();
    let mut data = Vec::with_capacity(rows * width);
    let mut empty = Vec::with_capacity(rows);
    let geo_blocks = geo.layout.blocks.len() as u8;
    for i in 0..rows {
        data.extend_from_slice(geo.row(i));
        data.extend(inten.row(i).iter().map(|&v| (v as f64 * weight) as f32));
        empty.push(geo.empty[i] | (inten.empty[i] << geo_blocks));
    }
    let mut blocks = geo.layout.blocks.clone();
    blocks.extend(inten.layout.blocks.iter().cloned());
    Ok(FeatureMatrix {
        layout: FeatureLayout {
            blocks,
            geo_radius: geo.layout.geo_radius,
            intensity_radius: inten.layout.intensity_radius,
            normal_convention: geo.layout.normal_convention,
            intensity_weight: Some(weight),
        },
        width,
        data,
        point_ids: geo.point_ids.clone(),
        empty,
    })
}

#[inline]
fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normals::estimate_normals;

    fn plane_cloud(n: usize, spacing: f64) -> PointCloud {
        let mut positions = Vec::new();
        for i in 0..n {
            for j in 0..n {
                positions.push([i as f64 * spacing, j as f64 * spacing, 0.0]);
            }
        }
        let m = positions.len();
        PointCloud::new(positions, vec![0.5; m]).unwrap()
    }

    #[test]
    fn coplanar_pair_gives_zero_angles() {
        // Equal normals perpendicular to the connecting line.
        let a = darboux_angles([0.0; 3], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
            .unwrap()
            .unwrap();
        assert_eq!(a.alpha, 0.0);
        assert_eq!(a.phi, 0.0);
        assert_eq!(a.theta, 0.0);
        assert_eq!(a.d, 1.0);
    }

    #[test]
    fn role_swap_with_line_parallel_normal_is_degenerate() {
        // The target normal is aligned with the connecting line, so the swap
        // makes it the source, and a source normal parallel to the line
        // yields a degenerate frame by contract.
        let r = darboux_angles([0.0; 3], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
            .unwrap();
        assert_eq!(r, None);
    }

    #[test]
    fn near_parallel_target_normal_swaps_roles() {
        // Tilt the target normal slightly off the line so the frame survives;
        // phi must then be close to -1 because roles swapped.
        let eps = 1e-3;
        let nt = [(1.0f64 - eps * eps).sqrt(), 0.0, eps];
        let a = darboux_angles([0.0; 3], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], nt)
            .unwrap()
            .unwrap();
        assert!(a.phi < -0.999, "phi = {}", a.phi);
        assert!(a.alpha.abs() < 1e-2);
        assert!((a.theta.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-2);
    }

    #[test]
    fn coincident_points_rejected() {
        assert!(
            darboux_angles([1.0; 3], [0.0, 0.0, 1.0], [1.0; 3], [0.0, 0.0, 1.0]).is_err()
        );
    }

    #[test]
    fn pair_angles_rotation_invariant() {
        use nalgebra::{Rotation3, Vector3};
        let p_s = [0.1, 0.2, 0.3];
        let n_s = {
            let v = Vector3::new(0.2, -0.4, 0.89).normalize();
            [v.x, v.y, v.z]
        };
        let p_t = [0.8, -0.1, 0.5];
        let n_t = {
            let v = Vector3::new(-0.3, 0.5, 0.81).normalize();
            [v.x, v.y, v.z]
        };
        let base = darboux_angles(p_s, n_s, p_t, n_t).unwrap().unwrap();

        let rot = Rotation3::from_euler_angles(0.7, -1.1, 0.4);
        let tf = |v: [f64; 3]| {
            let r = rot * Vector3::new(v[0], v[1], v[2]);
            [r.x, r.y, r.z]
        };
        let rotated = darboux_angles(tf(p_s), tf(n_s), tf(p_t), tf(n_t))
            .unwrap()
            .unwrap();
        assert!((base.alpha - rotated.alpha).abs() < 1e-9);
        assert!((base.phi - rotated.phi).abs() < 1e-9);
        assert!((base.theta - rotated.theta).abs() < 1e-9);
        assert!((base.d - rotated.d).abs() < 1e-9);
    }

    #[test]
    fn spfh_plane_mass_concentrates_at_zero() {
        let cloud = plane_cloud(15, 0.05);
        let index = SpatialIndex::build(&cloud);
        let normals = estimate_normals(&cloud, &index, 0.12, NormalConvention::PlusZ).unwrap();
        let feats = spfh(&cloud, &normals, &index, 0.3, 30).unwrap();
        let zero_bin_sym = bin_index(0.0, -1.0, 1.0, 30);
        let zero_bin_theta = bin_index(0.0, -std::f64::consts::PI, std::f64::consts::PI, 30);
        for row in 0..feats.rows() {
            let r = feats.row(row);
            assert!(r[zero_bin_sym] as f64 >= 0.999);
            assert!(r[30 + zero_bin_sym] as f64 >= 0.999);
            assert!(r[60 + zero_bin_theta] as f64 >= 0.999);
        }
    }

    #[test]
    fn isolated_point_row_is_empty() {
        let mut cloud = plane_cloud(6, 0.05);
        cloud.positions.push([50.0, 50.0, 0.0]);
        cloud.intensities.push(0.5);
        cloud.raw_intensities.push(0.5);
        let index = SpatialIndex::build(&cloud);
        // Make all points "valid" so the isolated one gets a row.
        let normals = NormalField {
            normals: vec![[0.0, 0.0, 1.0]; cloud.len()],
            valid: vec![true; cloud.len()],
            convention: NormalConvention::PlusZ,
        };
        let feats = spfh(&cloud, &normals, &index, 0.3, 30).unwrap();
        let last = feats.rows() - 1;
        assert_eq!(feats.empty[last], 0b111);
        assert!(feats.row(last).iter().all(|&v| v == 0.0));
    }

    /// Brute-force SPFH over an explicit point list with its own angle math.
    fn brute_spfh(
        positions: &[[f64; 3]],
        normals: &[[f64; 3]],
        center: usize,
        r: f64,
        bins: usize,
    ) -> Vec<f64> {
        let mut hist = vec![0.0f64; 3 * bins];
        let mut count = 0usize;
        let p = positions[center];
        for (j, &q) in positions.iter().enumerate() {
            if j == center {
                continue;
            }
            let diff = sub(q, p);
            let d = norm(diff);
            if d > r {
                continue;
            }
            let line = scale(diff, 1.0 / d);
            let (ns, nt, ps2, pt2) =
                if dot(normals[j], line).abs() - dot(normals[center], line).abs() > 1e-12 {
                    (normals[j], normals[center], q, p)
                } else {
                    (normals[center], normals[j], p, q)
                };
            let t_hat = scale(sub(pt2, ps2), 1.0 / d);
            let v_raw = cross(t_hat, ns);
            let vn = norm(v_raw);
            if vn < 1e-8 {
                continue;
            }
            let v = scale(v_raw, 1.0 / vn);
            let w = cross(ns, v);
            let alpha = dot(v, nt);
            let phi = dot(ns, t_hat);
            let theta = f64::atan2(dot(w, nt), dot(ns, nt));
            hist[bin_index(alpha, -1.0, 1.0, bins)] += 1.0;
            hist[bins + bin_index(phi, -1.0, 1.0, bins)] += 1.0;
            hist[2 * bins + bin_index(theta, -std::f64::consts::PI, std::f64::consts::PI, bins)] +=
                1.0;
            count += 1;
        }
        if count > 0 {
            for v in &mut hist {
                *v /= count as f64;
            }
        }
        hist
    }

    #[test]
    fn spfh_matches_brute_force_on_fixed_configuration() {
        let positions = vec![
            [0.0, 0.0, 0.0],
            [0.1, 0.0, 0.02],
            [0.0, 0.12, -0.01],
            [-0.08, 0.05, 0.03],
            [0.05, -0.09, 0.0],
        ];
        let raw_normals = [
            [0.1, 0.2, 0.97],
            [-0.2, 0.1, 0.97],
            [0.0, -0.15, 0.99],
            [0.3, 0.0, 0.95],
            [-0.1, -0.1, 0.99],
        ];
        let normals_unit: Vec<[f64; 3]> = raw_normals
            .iter()
            .map(|n| {
                let l = norm(*n);
                scale(*n, 1.0 / l)
            })
            .collect();
        let cloud = PointCloud::new(positions.clone(), vec![0.5; 5]).unwrap();
        let index = SpatialIndex::build(&cloud);
        let field = NormalField {
            normals: normals_unit.clone(),
            valid: vec![true; 5],
            convention: NormalConvention::PlusZ,
        };
        let feats = spfh(&cloud, &field, &index, 0.5, 30).unwrap();
        for c in 0..5 {
            let expected = brute_spfh(&positions, &normals_unit, c, 0.5, 30);
            let got = feats.row(c);
            for (g, e) in got.iter().zip(&expected) {
                assert!((*g as f64 - e).abs() < 1e-9);
            }
        }
    }

    /// Brute-force FPFH without the spatial index, reusing brute_spfh.
    fn brute_fpfh(
        positions: &[[f64; 3]],
        normals: &[[f64; 3]],
        r: f64,
        bins: usize,
    ) -> Vec<Vec<f64>> {
        let n = positions.len();
        let spfhs: Vec<Vec<f64>> = (0..n)
            .map(|i| brute_spfh(positions, normals, i, r, bins))
            .collect();
        (0..n)
            .map(|i| {
                let mut acc = spfhs[i].clone();
                let mut weighted = vec![0.0f64; 3 * bins];
                let mut k = 0usize;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let d = norm(sub(positions[j], positions[i]));
                    if d > r || d < 1e-12 {
                        continue;
                    }
                    for (w, &v) in weighted.iter_mut().zip(&spfhs[j]) {
                        *w += v / d;
                    }
                    k += 1;
                }
                if k > 0 {
                    for (a, w) in acc.iter_mut().zip(&weighted) {
                        *a += w / k as f64;
                    }
                }
                for b in 0..3 {
                    let sum: f64 = acc[b * bins..(b + 1) * bins].iter().sum();
                    if sum > 0.0 {
                        for v in &mut acc[b * bins..(b + 1) * bins] {
                            *v /= sum;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn fpfh_matches_brute_force_on_small_cloud() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let positions: Vec<[f64; 3]> = (0..20)
            .map(|_| {
                [
                    rng.gen::<f64>() * 0.5,
                    rng.gen::<f64>() * 0.5,
                    rng.gen::<f64>() * 0.1,
                ]
            })
            .collect();
        let normals_unit: Vec<[f64; 3]> = (0..20)
            .map(|_| {
                let v = [
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() + 0.5,
                ];
                scale(v, 1.0 / norm(v))
            })
            .collect();
        let cloud = PointCloud::new(positions.clone(), vec![0.5; 20]).unwrap();
        let index = SpatialIndex::build(&cloud);
        let field = NormalField {
            normals: normals_unit.clone(),
            valid: vec![true; 20],
            convention: NormalConvention::PlusZ,
        };
        let feats = fpfh(&cloud, &field, &index, 0.4, 30).unwrap();
        let expected = brute_fpfh(&positions, &normals_unit, 0.4, 30);
        for i in 0..20 {
            for (g, e) in feats.row(i).iter().zip(&expected[i]) {
                assert!((*g as f64 - e).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn fpfh_plane_mass_concentrates_at_zero() {
        let cloud = plane_cloud(15, 0.05);
        let index = SpatialIndex::build(&cloud);
        let normals = estimate_normals(&cloud, &index, 0.12, NormalConvention::PlusZ).unwrap();
        let feats = fpfh(&cloud, &normals, &index, 0.3, 30).unwrap();
        let zero_sym = bin_index(0.0, -1.0, 1.0, 30);
        let zero_theta = bin_index(0.0, -std::f64::consts::PI, std::f64::consts::PI, 30);
        for row in 0..feats.rows() {
            let r = feats.row(row);
            assert!(r[zero_sym] as f64 >= 0.999);
            assert!(r[30 + zero_sym] as f64 >= 0.999);
            assert!(r[60 + zero_theta] as f64 >= 0.999);
        }
    }

    #[test]
    fn uniform_intensity_mass_in_bin_zero() {
        let cloud = plane_cloud(10, 0.05);
        let index = SpatialIndex::build(&cloud);
        let feats = intensity_histogram(&cloud, &index, 0.2, 30, None).unwrap();
        for row in 0..feats.rows() {
            assert_eq!(feats.row(row)[0], 1.0);
        }
    }

    #[test]
    fn intensity_differences_land_in_expected_bin() {
        // Center 0.5 with neighbors 0.1 and 0.9: both |diff| = 0.4 -> bin 12.
        let cloud = PointCloud::new(
            vec![[0.0; 3], [0.1, 0.0, 0.0], [0.0, 0.1, 0.0]],
            vec![0.5, 0.1, 0.9],
        )
        .unwrap();
        let index = SpatialIndex::build(&cloud);
        let feats = intensity_histogram(&cloud, &index, 0.5, 30, None).unwrap();
        let row = feats.row(0);
        assert_eq!(row[12], 1.0);
        assert_eq!(row.iter().map(|&v| v as f64).sum::<f64>(), 1.0);
    }

    #[test]
    fn boundary_intensity_difference_in_last_bin() {
        let cloud = PointCloud::new(vec![[0.0; 3], [0.1, 0.0, 0.0]], vec![0.0, 1.0]).unwrap();
        let index = SpatialIndex::build(&cloud);
        let feats = intensity_histogram(&cloud, &index, 0.5, 30, None).unwrap();
        assert_eq!(feats.row(0)[29], 1.0);
    }

    #[test]
    fn fuse_weight_zero_pads_with_zeros() {
        let cloud = plane_cloud(5, 0.05);
        let index = SpatialIndex::build(&cloud);
        let normals = estimate_normals(&cloud, &index, 0.12, NormalConvention::PlusZ).unwrap();
        let geo = fpfh(&cloud, &normals, &index, 0.2, 30).unwrap();
        let inten = intensity_histogram(&cloud, &index, 0.2, 30, Some(&normals.valid)).unwrap();
        let fused = fuse_multimodal(&geo, &inten, 0.0).unwrap();
        assert_eq!(fused.width, 120);
        for i in 0..fused.rows() {
            assert_eq!(&fused.row(i)[..90], geo.row(i));
            assert!(fused.row(i)[90..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn fused_distance_obeys_pythagoras() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let positions: Vec<[f64; 3]> = (0..10)
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>() * 0.2])
            .collect();
        let intens: Vec<f64> = (0..10).map(|_| rng.gen()).collect();
        let cloud = PointCloud::new(positions, intens).unwrap();
        let index = SpatialIndex::build(&cloud);
        let normals = estimate_normals(&cloud, &index, 0.8, NormalConvention::PlusZ).unwrap();
        let geo = fpfh(&cloud, &normals, &index, 0.8, 30).unwrap();
        let inten = intensity_histogram(&cloud, &index, 0.8, 30, Some(&normals.valid)).unwrap();
        let weight = 0.7;
        let fused = fuse_multimodal(&geo, &inten, weight).unwrap();
        let dist = |a: &[f32], b: &[f32]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        for i in 0..fused.rows() {
            for j in 0..fused.rows() {
                let d_geo = dist(geo.row(i), geo.row(j));
                let d_int = dist(inten.row(i), inten.row(j));
                let d_fused = dist(fused.row(i), fused.row(j));
                let expected = (d_geo * d_geo + weight * weight * d_int * d_int).sqrt();
                assert!((d_fused - expected).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn fuse_rejects_mismatched_rows() {
        let cloud = plane_cloud(5, 0.05);
        let index = SpatialIndex::build(&cloud);
        let normals = estimate_normals(&cloud, &index, 0.12, NormalConvention::PlusZ).unwrap();
        let geo = fpfh(&cloud, &normals, &index, 0.2, 30).unwrap();
        let small = plane_cloud(3, 0.05);
        let small_index = SpatialIndex::build(&small);
        let inten = intensity_histogram(&small, &small_index, 0.2, 30, None).unwrap();
        assert!(fuse_multimodal(&geo, &inten, 1.0).is_err());
    }

    #[test]
    fn histogram_blocks_sum_to_one_or_are_empty() {
        let cloud = plane_cloud(8, 0.05);
        let index = SpatialIndex::build(&cloud);
        let normals = estimate_normals(&cloud, &index, 0.12, NormalConvention::PlusZ).unwrap();
        let feats = fpfh(&cloud, &normals, &index, 0.2, 30).unwrap();
        for row in 0..feats.rows() {
            for b in 0..3 {
                let sum: f64 = feats.row(row)[b * 30..(b + 1) * 30]
                    .iter()
                    .map(|&v| v as f64)
                    .sum();
                if feats.block_empty(row, b) {
                    assert_eq!(sum, 0.0);
                } else {
                    assert!((sum - 1.0).abs() < 1e-6, "block sum {sum}");
                }
            }
        }
    }
}
