//! File formats: PLY and xyz-CSV clouds, binary feature/bank containers,
//! heatmap rendering, report/CSV writers, and the run configuration.
//!
//! Every writer is deterministic: identical inputs produce byte-identical
//! files (no timestamps or environment data in any payload).

pub mod config;
pub mod container;
pub mod heatmap;
pub mod ply;
pub mod report;

use crate::cloud::{Label, PointCloud};
use crate::error::{Error, Result};
use std::path::Path;

pub use config::{FeatureMode, RunConfig};
pub use heatmap::{score_color, write_heatmap};

/// Supported point-cloud file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    PlyAscii,
    PlyBinaryLe,
    XyzCsv,
}

impl CloudFormat {
    /// Guess a format from the file extension (`.ply` reads either PLY
    /// flavor; the header decides).
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("ply") => Ok(CloudFormat::PlyBinaryLe),
            Some("csv") | Some("xyz") => Ok(CloudFormat::XyzCsv),
            _ => Err(Error::parameter(format!(
                "cannot infer cloud format from '{}'; pass --format",
                path.display()
            ))),
        }
    }
}

/// Options for cloud readers.
#[derive(Debug, Clone)]
pub struct ReadOptions {
    /// PLY property holding the intensity signal.
    pub intensity_property: String,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            intensity_property: "intensity".to_string(),
        }
    }
}

/// Read a cloud; intensities are min-max normalized on load.
///
/// Both PLY formats dispatch to the same parser, which honours the format
/// declared in the file header.
pub fn read_cloud(path: &Path, format: CloudFormat, options: &ReadOptions) -> Result<PointCloud> {
    match format {
        CloudFormat::PlyAscii | CloudFormat::PlyBinaryLe => ply::read_ply(path, options),
        CloudFormat::XyzCsv => read_xyz_csv(path),
    }
}

/// Write a cloud; raw intensities are stored so binary round-trips are
/// bitwise exact.
pub fn write_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    match format {
        CloudFormat::PlyAscii => ply::write_ply(cloud, path, false),
        CloudFormat::PlyBinaryLe => ply::write_ply(cloud, path, true),
        CloudFormat::XyzCsv => write_xyz_csv(cloud, path),
    }
}

/// Read `x,y,z,intensity[,label]` CSV with a mandatory header row.
pub fn read_xyz_csv(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(path, Some(1), "empty file"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| columns.iter().position(|&c| c == name);
    let (xi, yi, zi) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => {
            return Err(Error::format(
                path,
                Some(1),
                format!("header must contain x,y,z columns, got '{header}'"),
            ))
        }
    };
    let ii = col("intensity")
        .ok_or_else(|| Error::format(path, Some(1), "header missing 'intensity' column"))?;
    let li = col("label");

    let mut positions = Vec::new();
    let mut raw = Vec::new();
    let mut labels = li.map(|_| Vec::new());
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::format(
                path,
                Some(lineno + 1),
                format!("expected {} fields, got {}", columns.len(), fields.len()),
            ));
        }
        let num = |idx: usize| -> Result<f64> {
            fields[idx].parse().map_err(|_| {
                Error::format(
                    path,
                    Some(lineno + 1),
                    format!("'{}' is not a number", fields[idx]),
                )
            })
        };
        positions.push([num(xi)?, num(yi)?, num(zi)?]);
        raw.push(num(ii)? as f32);
        if let (Some(out), Some(idx)) = (labels.as_mut(), li) {
            let code: u8 = fields[idx].parse().map_err(|_| {
                Error::format(
                    path,
                    Some(lineno + 1),
                    format!("'{}' is not a label code", fields[idx]),
                )
            })?;
            out.push(Label::from_code(code).ok_or_else(|| {
                Error::format(path, Some(lineno + 1), format!("unknown label code {code}"))
            })?);
        }
    }
    if positions.is_empty() {
        return Err(Error::format(path, None, "no data rows"));
    }
    let frame_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("")
        .to_string();
    PointCloud::from_raw_intensities(positions, raw, labels, frame_id)
}

pub fn write_xyz_csv(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = String::new();
    let with_labels = cloud.labels.is_some();
    out.push_str(if with_labels {
        "x,y,z,intensity,label\n"
    } else {
        "x,y,z,intensity\n"
    });
    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        out.push_str(&format!(
            "{},{},{},{}",
            p[0], p[1], p[2], cloud.raw_intensities[i]
        ));
        if with_labels {
            out.push_str(&format!(",{}", cloud.label(i).code()));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyz_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let cloud = PointCloud::with_labels(
            vec![[0.5, -1.25, 3.0], [1.0, 2.0, 3.0]],
            vec![0.0, 1.0],
            vec![Label::None, Label::WaterPatch],
        )
        .unwrap();
        write_xyz_csv(&cloud, &path).unwrap();
        let back = read_xyz_csv(&path).unwrap();
        assert_eq!(back.positions, cloud.positions);
        assert_eq!(back.raw_intensities, cloud.raw_intensities);
        assert_eq!(back.labels, cloud.labels);
    }

    #[test]
    fn xyz_csv_bad_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,y,z,intensity\n1,2,3,0.5\n1,oops,3,0.5\n").unwrap();
        let err = read_xyz_csv(&path).unwrap_err();
        assert_eq!(err.category(), "format");
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn xyz_csv_missing_column_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,y,intensity\n1,2,0.5\n").unwrap();
        assert_eq!(read_xyz_csv(&path).unwrap_err().category(), "format");
    }

    #[test]
    fn format_inference() {
        assert_eq!(
            CloudFormat::from_path(Path::new("a.ply")).unwrap(),
            CloudFormat::PlyBinaryLe
        );
        assert_eq!(
            CloudFormat::from_path(Path::new("a.csv")).unwrap(),
            CloudFormat::XyzCsv
        );
        assert!(CloudFormat::from_path(Path::new("a.bin")).is_err());
    }
}
