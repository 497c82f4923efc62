//! Hand-rolled PLY reader/writer (ascii and binary little-endian).
//!
//! The reader accepts arbitrary vertex property layouts: it needs `x`, `y`,
//! `z`, plus either the configured intensity property or an RGB triple to
//! convert to greyscale, and optionally a `label` code. List properties are
//! only tolerated in elements that come after `vertex` (we never read past
//! it); the writer emits `x y z` as doubles, intensity as float and labels
//! as uchar.

use crate::cloud::{Label, PointCloud};
use crate::error::{Error, Result};
use crate::io::ReadOptions;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "char" | "int8" => Some(ScalarType::I8),
            "uchar" | "uint8" => Some(ScalarType::U8),
            "short" | "int16" => Some(ScalarType::I16),
            "ushort" | "uint16" => Some(ScalarType::U16),
            "int" | "int32" => Some(ScalarType::I32),
            "uint" | "uint32" => Some(ScalarType::U32),
            "float" | "float32" => Some(ScalarType::F32),
            "double" | "float64" => Some(ScalarType::F64),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    /// Maximum representable value for integer types, used to scale color
    /// and intensity channels into [0, 1].
    fn int_max(self) -> Option<f64> {
        match self {
            ScalarType::I8 => Some(i8::MAX as f64),
            ScalarType::U8 => Some(u8::MAX as f64),
            ScalarType::I16 => Some(i16::MAX as f64),
            ScalarType::U16 => Some(u16::MAX as f64),
            ScalarType::I32 => Some(i32::MAX as f64),
            ScalarType::U32 => Some(u32::MAX as f64),
            ScalarType::F32 | ScalarType::F64 => None,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => bytes[0] as i8 as f64,
            ScalarType::U8 => bytes[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
struct PropertyDef {
    name: String,
    ty: ScalarType,
    is_list: bool,
}

#[derive(Debug, Clone)]
struct ElementDef {
    name: String,
    count: usize,
    properties: Vec<PropertyDef>,
}

#[derive(Debug)]
struct Header {
    binary: bool,
    elements: Vec<ElementDef>,
    /// Number of text lines the header occupies (for ascii row diagnostics).
    lines: usize,
    /// Byte offset just past `end_header`.
    data_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let marker = b"end_header";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::format(path, None, "missing end_header"))?;
    let mut data_offset = end + marker.len();
    // Swallow the newline terminating end_header (\n or \r\n).
    if bytes.get(data_offset) == Some(&b'\r') {
        data_offset += 1;
    }
    if bytes.get(data_offset) == Some(&b'\n') {
        data_offset += 1;
    }
    let text = std::str::from_utf8(&bytes[..end])
        .map_err(|_| Error::format(path, None, "header is not valid utf-8"))?;

    let mut binary = None;
    let mut elements: Vec<ElementDef> = Vec::new();
    let mut lines = 1; // the end_header line itself
    for (idx, raw_line) in text.lines().enumerate() {
        lines += 1;
        let lineno = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else { continue };
        match keyword {
            "ply" => {
                if lineno != 1 {
                    return Err(Error::format(path, Some(lineno), "stray 'ply' keyword"));
                }
            }
            "format" => {
                let kind = tokens.next().unwrap_or("");
                binary = match kind {
                    "ascii" => Some(false),
                    "binary_little_endian" => Some(true),
                    other => {
                        return Err(Error::format(
                            path,
                            Some(lineno),
                            format!("unsupported format '{other}'"),
                        ))
                    }
                };
            }
            "comment" | "obj_info" => {}
            "element" => {
                let name = tokens
                    .next()
                    .ok_or_else(|| Error::format(path, Some(lineno), "element without a name"))?;
                let count: usize = tokens
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::format(path, Some(lineno), "element without a count"))?;
                elements.push(ElementDef {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let element = elements.last_mut().ok_or_else(|| {
                    Error::format(path, Some(lineno), "property before any element")
                })?;
                let first = tokens
                    .next()
                    .ok_or_else(|| Error::format(path, Some(lineno), "property without a type"))?;
                if first == "list" {
                    // Consume count type, value type, name; only the name
                    // matters since we refuse to read list data anyway.
                    let _count_ty = tokens.next();
                    let value_ty = tokens.next().unwrap_or("uchar");
                    let name = tokens.next().unwrap_or("").to_string();
                    element.properties.push(PropertyDef {
                        name,
                        ty: ScalarType::parse(value_ty).unwrap_or(ScalarType::U8),
                        is_list: true,
                    });
                } else {
                    let ty = ScalarType::parse(first).ok_or_else(|| {
                        Error::format(path, Some(lineno), format!("unknown property type '{first}'"))
                    })?;
                    let name = tokens
                        .next()
                        .ok_or_else(|| Error::format(path, Some(lineno), "property without a name"))?;
                    element.properties.push(PropertyDef {
                        name: name.to_string(),
                        ty,
                        is_list: false,
                    });
                }
            }
            other => {
                return Err(Error::format(
                    path,
                    Some(lineno),
                    format!("unknown header keyword '{other}'"),
                ));
            }
        }
    }
    if !text.starts_with("ply") {
        return Err(Error::format(path, Some(1), "file does not start with 'ply'"));
    }
    let binary =
        binary.ok_or_else(|| Error::format(path, None, "header missing a format line"))?;
    Ok(Header {
        binary,
        elements,
        lines,
        data_offset,
    })
}

/// Read a PLY cloud; the header's declared format (ascii or binary
/// little-endian) decides how the body is parsed.
pub fn read_ply(path: &Path, options: &ReadOptions) -> Result<PointCloud> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(path, &bytes)?;

    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::format(path, None, "no 'vertex' element"))?;
    let vertex = &header.elements[vertex_pos];
    if let Some(list) = vertex.properties.iter().find(|p| p.is_list) {
        return Err(Error::format(
            path,
            None,
            format!("list property '{}' in vertex element is not supported", list.name),
        ));
    }
    for earlier in &header.elements[..vertex_pos] {
        if earlier.properties.iter().any(|p| p.is_list) {
            return Err(Error::format(
                path,
                None,
                format!(
                    "cannot skip element '{}' with list properties before vertex",
                    earlier.name
                ),
            ));
        }
    }

    let prop = |name: &str| vertex.properties.iter().position(|p| p.name == name);
    let coords = match (prop("x"), prop("y"), prop("z")) {
        (Some(x), Some(y), Some(z)) => [x, y, z],
        _ => {
            return Err(Error::format(
                path,
                None,
                "vertex element is missing x/y/z coordinate properties",
            ))
        }
    };
    let intensity = prop(&options.intensity_property);
    let rgb = match (prop("red"), prop("green"), prop("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    if intensity.is_none() && rgb.is_none() {
        return Err(Error::format(
            path,
            None,
            format!(
                "vertex element has neither an '{}' property nor red/green/blue for greyscale fallback",
                options.intensity_property
            ),
        ));
    }
    let label = prop("label");

    // Pull raw rows for the vertex element.
    let rows = if header.binary {
        read_binary_rows(path, &bytes, &header, vertex_pos)?
    } else {
        read_ascii_rows(path, &bytes, &header, vertex_pos)?
    };

    // Integer-typed channels are scaled to [0, 1] so e.g. pure white uchar
    // RGB converts to exactly 1.0 before normalization.
    let scaled = |row: &[f64], idx: usize| -> f64 {
        match vertex.properties[idx].ty.int_max() {
            Some(max) => row[idx] / max,
            None => row[idx],
        }
    };

    let mut positions = Vec::with_capacity(vertex.count);
    let mut raw = Vec::with_capacity(vertex.count);
    let mut labels = label.map(|_| Vec::with_capacity(vertex.count));
    for (ri, row) in rows.iter().enumerate() {
        positions.push([row[coords[0]], row[coords[1]], row[coords[2]]]);
        let value = match (intensity, rgb) {
            (Some(i), _) => scaled(row, i),
            (None, Some([r, g, b])) => {
                0.299 * scaled(row, r) + 0.587 * scaled(row, g) + 0.114 * scaled(row, b)
            }
            (None, None) => unreachable!(),
        };
        raw.push(value as f32);
        if let (Some(out), Some(li)) = (labels.as_mut(), label) {
            let code = row[li];
            let parsed = (code >= 0.0 && code.fract() == 0.0)
                .then(|| Label::from_code(code as u8))
                .flatten()
                .ok_or_else(|| {
                    Error::format(
                        path,
                        Some(header.lines + ri + 1),
                        format!("unknown label code {code}"),
                    )
                })?;
            out.push(parsed);
        }
    }

    let frame_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("")
        .to_string();
    PointCloud::from_raw_intensities(positions, raw, labels, frame_id)
}

fn read_ascii_rows(
    path: &Path,
    bytes: &[u8],
    header: &Header,
    vertex_pos: usize,
) -> Result<Vec<Vec<f64>>> {
    let body = std::str::from_utf8(&bytes[header.data_offset..])
        .map_err(|_| Error::format(path, None, "ascii body is not valid utf-8"))?;
    let mut lines = body.lines();
    let mut lineno = header.lines;
    // Skip elements declared before vertex.
    for earlier in &header.elements[..vertex_pos] {
        for _ in 0..earlier.count {
            lineno += 1;
            lines
                .next()
                .ok_or_else(|| Error::format(path, Some(lineno), "unexpected end of file"))?;
        }
    }
    let vertex = &header.elements[vertex_pos];
    let mut rows = Vec::with_capacity(vertex.count);
    for _ in 0..vertex.count {
        lineno += 1;
        let line = lines
            .next()
            .ok_or_else(|| Error::format(path, Some(lineno), "unexpected end of file"))?;
        let mut row = Vec::with_capacity(vertex.properties.len());
        let mut fields = line.split_whitespace();
        for p in &vertex.properties {
            let field = fields.next().ok_or_else(|| {
                Error::format(
                    path,
                    Some(lineno),
                    format!("row has fewer than {} fields", vertex.properties.len()),
                )
            })?;
            let value: f64 = field.parse().map_err(|_| {
                Error::format(
                    path,
                    Some(lineno),
                    format!("'{}' is not a number for property '{}'", field, p.name),
                )
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn read_binary_rows(
    path: &Path,
    bytes: &[u8],
    header: &Header,
    vertex_pos: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut offset = header.data_offset;
    for earlier in &header.elements[..vertex_pos] {
        let stride: usize = earlier.properties.iter().map(|p| p.ty.size()).sum();
        offset += stride * earlier.count;
    }
    let vertex = &header.elements[vertex_pos];
    let stride: usize = vertex.properties.iter().map(|p| p.ty.size()).sum();
    let needed = stride * vertex.count;
    if bytes.len() < offset + needed {
        return Err(Error::format(
            path,
            None,
            format!(
                "truncated body: need {} bytes at offset {offset}, file has {}",
                needed,
                bytes.len()
            ),
        ));
    }
    let mut rows = Vec::with_capacity(vertex.count);
    for r in 0..vertex.count {
        let mut cursor = offset + r * stride;
        let mut row = Vec::with_capacity(vertex.properties.len());
        for p in &vertex.properties {
            row.push(p.ty.read_le(&bytes[cursor..]));
            cursor += p.ty.size();
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Write `x y z` as doubles, intensity (raw values) as float, and labels as
/// uchar when present.
pub fn write_ply(cloud: &PointCloud, path: &Path, binary: bool) -> Result<()> {
    let with_labels = cloud.labels.is_some();
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(b"ply\n");
    out.extend_from_slice(if binary {
        b"format binary_little_endian 1.0\n".as_slice()
    } else {
        b"format ascii 1.0\n".as_slice()
    });
    out.extend_from_slice(format!("element vertex {}\n", cloud.len()).as_bytes());
    out.extend_from_slice(b"property double x\nproperty double y\nproperty double z\n");
    out.extend_from_slice(b"property float intensity\n");
    if with_labels {
        out.extend_from_slice(b"property uchar label\n");
    }
    out.extend_from_slice(b"end_header\n");

    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        let intensity = cloud.raw_intensities[i];
        if binary {
            for c in p {
                out.extend_from_slice(&c.to_le_bytes());
            }
            out.extend_from_slice(&intensity.to_le_bytes());
            if with_labels {
                out.push(cloud.label(i).code());
            }
        } else {
            out.extend_from_slice(format!("{} {} {} {}", p[0], p[1], p[2], intensity).as_bytes());
            if with_labels {
                out.extend_from_slice(format!(" {}", cloud.label(i).code()).as_bytes());
            }
            out.push(b'\n');
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        (dir, path)
    }

    #[test]
    fn two_point_ascii_ply() {
        let (_d, path) = tmp("two.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 2\n\
             property float x\nproperty float y\nproperty float z\n\
             property float intensity\nend_header\n\
             0 0 0 10\n1 0 0 30\n",
        )
        .unwrap();
        let cloud = read_ply(&path, &ReadOptions::default()).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.positions[1], [1.0, 0.0, 0.0]);
        // Min-max normalized on load.
        assert_eq!(cloud.intensities, vec![0.0, 1.0]);
        assert_eq!(cloud.raw_intensities, vec![10.0, 30.0]);
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let (_d, path) = tmp("rt.ply");
        let cloud = PointCloud::with_labels(
            vec![[0.1, -0.2, 1e-17], [std::f64::consts::PI, 2.0, -3.5]],
            vec![0.25, 0.75],
            vec![Label::InnerCrack, Label::None],
        )
        .unwrap();
        write_ply(&cloud, &path, true).unwrap();
        let back = read_ply(&path, &ReadOptions::default()).unwrap();
        assert_eq!(back.positions, cloud.positions);
        assert_eq!(back.raw_intensities, cloud.raw_intensities);
        assert_eq!(back.labels, cloud.labels);
    }

    #[test]
    fn ascii_round_trip_is_bitwise() {
        let (_d, path) = tmp("rt.ply");
        let cloud = PointCloud::new(
            vec![[0.1, -0.2, 1e-17], [std::f64::consts::PI, 2.0, -3.5]],
            vec![0.25, 0.75],
        )
        .unwrap();
        write_ply(&cloud, &path, false).unwrap();
        let back = read_ply(&path, &ReadOptions::default()).unwrap();
        // Shortest round-trip float formatting makes even ascii exact.
        assert_eq!(back.positions, cloud.positions);
        assert_eq!(back.raw_intensities, cloud.raw_intensities);
    }

    #[test]
    fn rgb_fallback_greyscale() {
        let (_d, path) = tmp("rgb.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 2\n\
             property float x\nproperty float y\nproperty float z\n\
             property uchar red\nproperty uchar green\nproperty uchar blue\n\
             end_header\n\
             0 0 0 255 255 255\n1 0 0 0 0 0\n",
        )
        .unwrap();
        let cloud = read_ply(&path, &ReadOptions::default()).unwrap();
        // Pure white converts to exactly 1.0 before normalization.
        assert!((cloud.raw_intensities[0] - 1.0).abs() < 1e-7);
        assert_eq!(cloud.raw_intensities[1], 0.0);
    }

    #[test]
    fn malformed_row_reports_line() {
        let (_d, path) = tmp("bad.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 2\n\
             property float x\nproperty float y\nproperty float z\n\
             property float intensity\nend_header\n\
             0 0 0 1\n0 nope 0 1\n",
        )
        .unwrap();
        let err = read_ply(&path, &ReadOptions::default()).unwrap_err();
        assert_eq!(err.category(), "format");
        assert!(err.to_string().contains("line 10"), "{err}");
    }

    #[test]
    fn missing_coordinates_rejected() {
        let (_d, path) = tmp("nc.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 1\n\
             property float x\nproperty float intensity\nend_header\n0 1\n",
        )
        .unwrap();
        let err = read_ply(&path, &ReadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("x/y/z"), "{err}");
    }

    #[test]
    fn truncated_binary_rejected() {
        let (_d, path) = tmp("tr.ply");
        let cloud = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![0.0, 1.0]).unwrap();
        write_ply(&cloud, &path, true).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        std::fs::write(&path, bytes).unwrap();
        let err = read_ply(&path, &ReadOptions::default()).unwrap_err();
        assert_eq!(err.category(), "format");
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn custom_intensity_property_name() {
        let (_d, path) = tmp("sc.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 1\n\
             property float x\nproperty float y\nproperty float z\n\
             property float scalar_reflectance\nend_header\n0 0 0 0.5\n",
        )
        .unwrap();
        let options = ReadOptions {
            intensity_property: "scalar_reflectance".to_string(),
        };
        let cloud = read_ply(&path, &options).unwrap();
        assert_eq!(cloud.raw_intensities, vec![0.5]);
    }

    #[test]
    fn non_vertex_elements_after_vertex_are_ignored() {
        let (_d, path) = tmp("face.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 1\n\
             property float x\nproperty float y\nproperty float z\n\
             property float intensity\n\
             element face 1\nproperty list uchar int vertex_indices\n\
             end_header\n0 0 0 1\n3 0 0 0\n",
        )
        .unwrap();
        let cloud = read_ply(&path, &ReadOptions::default()).unwrap();
        assert_eq!(cloud.len(), 1);
    }
}
