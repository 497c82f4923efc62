//! Binary containers for feature matrices and memory banks.
//!
//! Layout: 4-byte magic, u32 LE version, u32 LE header length, JSON header
//! (layout + row metadata), then the fixed-size payload arrays with f32 LE
//! descriptor rows. JSON keys come from serde's stable field order, so a
//! given input always serializes to identical bytes.

use crate::error::{Error, Result};
use crate::features::{FeatureLayout, FeatureMatrix};
use crate::patchcore::MemoryBank;
use std::path::Path;

const FEATURES_MAGIC: &[u8; 4] = b"PCFM";
const BANK_MAGIC: &[u8; 4] = b"PCMB";
const VERSION: u32 = 1;

#[derive(serde::Serialize, serde::Deserialize)]
struct FeaturesHeader {
    layout: FeatureLayout,
    rows: usize,
    width: usize,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct BankHeader {
    layout: FeatureLayout,
    rows: usize,
    width: usize,
    seed: u64,
    source_id: String,
}

pub fn write_features(features: &FeatureMatrix, path: &Path) -> Result<()> {
    let header = FeaturesHeader {
        layout: features.layout.clone(),
        rows: features.rows(),
        width: features.width,
    };
    let mut out = frame(FEATURES_MAGIC, &header)?;
    for &id in &features.point_ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
    out.extend_from_slice(&features.empty);
    for &v in &features.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, mut cursor): (FeaturesHeader, usize) = unframe(path, &bytes, FEATURES_MAGIC)?;
    if header.layout.width() != header.width {
        return Err(Error::format(path, None, "header width does not match layout"));
    }
    let n = header.rows;
    let point_ids = take_u32s(path, &bytes, &mut cursor, n)?;
    let empty = take_bytes(path, &bytes, &mut cursor, n)?.to_vec();
    let data = take_f32s(path, &bytes, &mut cursor, n * header.width)?;
    expect_end(path, &bytes, cursor)?;
    Ok(FeatureMatrix {
        layout: header.layout,
        width: header.width,
        data,
        point_ids,
        empty,
    })
}

pub fn write_bank(bank: &MemoryBank, path: &Path) -> Result<()> {
    let header = BankHeader {
        layout: bank.layout.clone(),
        rows: bank.len(),
        width: bank.width,
        seed: bank.seed,
        source_id: bank.source_id.clone(),
    };
    let mut out = frame(BANK_MAGIC, &header)?;
    for &row in &bank.source_rows {
        out.extend_from_slice(&row.to_le_bytes());
    }
    for &v in &bank.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_bank(path: &Path) -> Result<MemoryBank> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, mut cursor): (BankHeader, usize) = unframe(path, &bytes, BANK_MAGIC)?;
    if header.layout.width() != header.width {
        return Err(Error::format(path, None, "header width does not match layout"));
    }
    let n = header.rows;
    let source_rows = take_u32s(path, &bytes, &mut cursor, n)?;
    let data = take_f32s(path, &bytes, &mut cursor, n * header.width)?;
    expect_end(path, &bytes, cursor)?;
    Ok(MemoryBank {
        layout: header.layout,
        width: header.width,
        data,
        source_rows,
        seed: header.seed,
        source_id: header.source_id,
    })
}

fn frame<H: serde::Serialize>(magic: &[u8; 4], header: &H) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)
        .map_err(|e| Error::parameter(format!("header serialization failed: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    Ok(out)
}

fn unframe<'de, H: serde::de::DeserializeOwned>(
    path: &Path,
    bytes: &'de [u8],
    magic: &[u8; 4],
) -> Result<(H, usize)> {
    if bytes.len() < 12 {
        return Err(Error::format(path, None, "file too short for container framing"));
    }
    if &bytes[..4] != magic {
        return Err(Error::format(
            path,
            None,
            format!(
                "bad magic {:?}, expected {:?}",
                &bytes[..4],
                std::str::from_utf8(magic).unwrap()
            ),
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(
            path,
            None,
            format!("unsupported container version {version}"),
        ));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let end = 12 + header_len;
    if bytes.len() < end {
        return Err(Error::format(path, None, "truncated container header"));
    }
    let header = serde_json::from_slice(&bytes[12..end])
        .map_err(|e| Error::format(path, None, format!("invalid container header: {e}")))?;
    Ok((header, end))
}

fn take_bytes<'a>(
    path: &Path,
    bytes: &'a [u8],
    cursor: &mut usize,
    n: usize,
) -> Result<&'a [u8]> {
    let end = *cursor + n;
    if bytes.len() < end {
        return Err(Error::format(
            path,
            None,
            format!("truncated payload at offset {cursor}: need {n} bytes"),
        ));
    }
    let slice = &bytes[*cursor..end];
    *cursor = end;
    Ok(slice)
}

fn take_u32s(path: &Path, bytes: &[u8], cursor: &mut usize, n: usize) -> Result<Vec<u32>> {
    let raw = take_bytes(path, bytes, cursor, n * 4)?;
    Ok(raw
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn take_f32s(path: &Path, bytes: &[u8], cursor: &mut usize, n: usize) -> Result<Vec<f32>> {
    let raw = take_bytes(path, bytes, cursor, n * 4)?;
    Ok(raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn expect_end(path: &Path, bytes: &[u8], cursor: usize) -> Result<()> {
    if cursor != bytes.len() {
        return Err(Error::format(
            path,
            None,
            format!("{} trailing bytes after payload", bytes.len() - cursor),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{BlockKind, FeatureLayout};

    fn sample_features() -> FeatureMatrix {
        let layout = FeatureLayout {
            blocks: vec![(BlockKind::Alpha, 2), (BlockKind::Intensity, 3)],
            geo_radius: Some(1.0),
            intensity_radius: Some(1.0),
            normal_convention: None,
            intensity_weight: Some(1.0),
        };
        FeatureMatrix {
            width: layout.width(),
            layout,
            data: vec![0.5, 0.5, 1.0, 0.0, 0.0, 0.25, 0.75, 0.0, 0.5, 0.5],
            point_ids: vec![3, 9],
            empty: vec![0, 2],
        }
    }

    #[test]
    fn features_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pcfm");
        let m = sample_features();
        write_features(&m, &path).unwrap();
        let back = read_features(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn bank_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.pcmb");
        let f = sample_features();
        let bank = MemoryBank {
            layout: f.layout.clone(),
            width: f.width,
            data: f.data.clone(),
            source_rows: vec![0, 1],
            seed: 42,
            source_id: "ref".to_string(),
        };
        write_bank(&bank, &path).unwrap();
        let back = read_bank(&path).unwrap();
        assert_eq!(back.layout, bank.layout);
        assert_eq!(back.data, bank.data);
        assert_eq!(back.source_rows, bank.source_rows);
        assert_eq!(back.seed, bank.seed);
        assert_eq!(back.source_id, bank.source_id);
    }

    #[test]
    fn writes_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        let m = sample_features();
        write_features(&m, &a).unwrap();
        write_features(&m, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f");
        let m = sample_features();
        write_features(&m, &path).unwrap();
        assert_eq!(read_bank(&path).unwrap_err().category(), "format");
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f");
        write_features(&sample_features(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, bytes).unwrap();
        let err = read_features(&path).unwrap_err();
        assert_eq!(err.category(), "format");
    }
}
