//! PCA surface-normal estimation.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::parallel;
use nalgebra::{Matrix3, Vector3};

/// Default neighborhood radius in meters for normal estimation.
pub const DEFAULT_NORMAL_RADIUS: f64 = 0.12;

/// Orientation convention for estimated normals.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum NormalConvention {
    /// Flip normals into the +z half-space.
    PlusZ,
    /// Flip normals toward an explicit viewpoint (scanner position).
    Viewpoint([f64; 3]),
}

impl Default for NormalConvention {
    fn default() -> Self {
        NormalConvention::PlusZ
    }
}

/// Per-point unit normals; points with degenerate neighborhoods are flagged
/// invalid and excluded from downstream feature extraction.
#[derive(Debug, Clone)]
pub struct NormalField {
    pub normals: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
    pub convention: NormalConvention,
}

impl NormalField {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Estimate normals from the covariance of each point's neighborhood.
///
/// The normal is the eigenvector of the neighborhood covariance with the
/// smallest eigenvalue, unit-normalized and flipped so that
/// `dot(normal, viewpoint - p) >= 0` (or toward +z under the default
/// convention). Points with fewer than 3 neighborhood members (including
/// themselves) are marked invalid rather than failing.
pub fn estimate_normals(
    cloud: &PointCloud,
    index: &SpatialIndex,
    r: f64,
    convention: NormalConvention,
) -> Result<NormalField> {
    if !(r > 0.0) {
        return Err(Error::parameter(format!("normal radius must be > 0, got {r}")));
    }
    let results = parallel::map_indexed(cloud.len(), |i| {
        let neighbors = index
            .ball_query(i, r)
            .expect("center id is in range by construction");
        // Neighborhood includes the point itself.
        if neighbors.len() + 1 < 3 {
            return ([0.0; 3], false);
        }
        let p = cloud.positions[i];
        let mut centroid = Vector3::new(p[0], p[1], p[2]);
        for &j in &neighbors {
            let q = cloud.positions[j as usize];
            centroid += Vector3::new(q[0], q[1], q[2]);
        }
        centroid /= (neighbors.len() + 1) as f64;

        let mut cov = Matrix3::zeros();
        let accumulate = |cov: &mut Matrix3<f64>, q: [f64; 3]| {
            let d = Vector3::new(q[0], q[1], q[2]) - centroid;
            *cov += d * d.transpose();
        };
        accumulate(&mut cov, p);
        for &j in &neighbors {
            accumulate(&mut cov, cloud.positions[j as usize]);
        }

        let eigen = cov.symmetric_eigen();
        let mut min_idx = 0;
        for k in 1..3 {
            if eigen.eigenvalues[k] < eigen.eigenvalues[min_idx] {
                min_idx = k;
            }
        }
        let mut n = eigen.eigenvectors.column(min_idx).into_owned();
        let norm = n.norm();
        if !(norm > 0.0) || !n.iter().all(|v| v.is_finite()) {
            return ([0.0; 3], false);
        }
        n /= norm;

        let toward = match convention {
            NormalConvention::PlusZ => Vector3::new(0.0, 0.0, 1.0),
            NormalConvention::Viewpoint(v) => {
                Vector3::new(v[0] - p[0], v[1] - p[1], v[2] - p[2])
            }
        };
        if n.dot(&toward) < 0.0 {
            n = -n;
        }
        ([n.x, n.y, n.z], true)
    });

    let mut normals = Vec::with_capacity(cloud.len());
    let mut valid = Vec::with_capacity(cloud.len());
    for (n, v) in results {
        normals.push(n);
        valid.push(v);
    }
    Ok(NormalField {
        normals,
        valid,
        convention,
    })
}
