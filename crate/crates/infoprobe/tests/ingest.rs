//! Files laid out byte by byte the way an external extractor writes them,
//! then read back through the public loaders and the CLI.

use std::fs;
use std::path::Path;
use std::process::Command;

use infoprobe::dataio::{self, DataError};
use infoprobe_core::Matrix;
use tempfile::TempDir;

fn pfv_bytes(rows: &[Vec<f32>]) -> Vec<u8> {
    let cols = rows.first().map_or(0, Vec::len);
    let mut payload = Vec::new();
    for r in rows {
        for v in r {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut out = b"PFV1".to_vec();
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

fn plb_bytes(labels: &[u32], classes: u32) -> Vec<u8> {
    let payload: Vec<u8> = labels.iter().flat_map(|l| l.to_le_bytes()).collect();
    let mut out = b"PLB1".to_vec();
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(labels.len() as u64).to_le_bytes());
    out.extend_from_slice(&classes.to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

fn row_crc(row: &[f32]) -> u32 {
    let bytes: Vec<u8> = row.iter().flat_map(|v| v.to_le_bytes()).collect();
    crc32fast::hash(&bytes)
}

struct Segment {
    rows: Vec<Vec<f32>>,
    labels: Vec<u32>,
}

/// Ten utterance-like segments, 3 classes, 4-dim pooled features.
fn segments() -> Segment {
    let rows: Vec<Vec<f32>> = (0..10)
        .map(|i| (0..4).map(|j| (i * 4 + j) as f32 * 0.125 - 2.0).collect())
        .collect();
    let labels = vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0];
    Segment { rows, labels }
}

fn write_extraction(dir: &Path, seg: &Segment, checksums: Option<Vec<u32>>) {
    fs::write(dir.join("layer_0.pfv"), pfv_bytes(&seg.rows)).unwrap();
    fs::write(dir.join("labels.plb"), plb_bytes(&seg.labels, 3)).unwrap();
    let mut manifest = serde_json::json!({
        "format_version": 1,
        "model": "wav2vec2-base",
        "layer": 0,
        "task": "speaker",
        "class_names": ["a", "b", "c"],
        "features": "layer_0.pfv",
        "labels": "labels.plb",
        "rows": seg.rows.len(),
        "cols": 4,
        "splits": {"train": [0, 1, 2, 3, 4, 5], "valid": [6, 7], "test": [8, 9]},
        "pooling": "mean",
    });
    if let Some(c) = checksums {
        manifest["row_checksums"] = serde_json::json!(c);
    }
    fs::write(dir.join("layer_0.json"), serde_json::to_vec_pretty(&manifest).unwrap()).unwrap();
}

#[test]
fn extractor_layout_loads() {
    let tmp = TempDir::new().unwrap();
    let seg = segments();
    let sums = seg.rows.iter().map(|r| row_crc(r)).collect();
    write_extraction(tmp.path(), &seg, Some(sums));
    let ds = dataio::load_dataset(&tmp.path().join("layer_0.json")).unwrap();
    assert_eq!(ds.features.shape(), (10, 4));
    assert_eq!(ds.labels.counts(), vec![4, 3, 3]);
    for (i, r) in seg.rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            assert_eq!(ds.features.get(i, j), f64::from(v));
        }
    }
    assert_eq!(
        dataio::row_checksums(&ds.features),
        seg.rows.iter().map(|r| row_crc(r)).collect::<Vec<_>>()
    );
}

#[test]
fn shuffled_rows_fail_the_checksum_check() {
    let tmp = TempDir::new().unwrap();
    let mut seg = segments();
    let sums = seg.rows.iter().map(|r| row_crc(r)).collect();
    seg.rows.swap(3, 7);
    write_extraction(tmp.path(), &seg, Some(sums));
    let err = dataio::load_dataset(&tmp.path().join("layer_0.json")).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains('3'), "{msg}");
}

#[test]
fn cli_ingest_counts_match() {
    let tmp = TempDir::new().unwrap();
    let seg = segments();
    write_extraction(tmp.path(), &seg, None);
    let out = Command::new(env!("CARGO_BIN_EXE_infoprobe"))
        .args(["inspect", tmp.path().join("layer_0.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().find(|l| l.contains("wav2vec2-base")).unwrap();
    let cells: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(&cells[..6], ["0", "10", "4", "3", "3", "6/2/2"]);
}

#[test]
fn label_out_of_range_is_rejected() {
    let bytes = plb_bytes(&[0, 1, 3], 3);
    assert!(matches!(dataio::decode_labels(&bytes), Err(DataError::Invalid(_))));
}

#[test]
fn row_count_mismatch_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let seg = segments();
    write_extraction(tmp.path(), &seg, None);
    fs::write(tmp.path().join("labels.plb"), plb_bytes(&seg.labels[..9], 3)).unwrap();
    assert!(dataio::load_dataset(&tmp.path().join("layer_0.json")).is_err());
}

#[test]
fn encoder_matches_hand_layout() {
    let seg = segments();
    let m = Matrix::from_rows(
        &seg.rows
            .iter()
            .map(|r| r.iter().map(|&v| f64::from(v)).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    )
    .unwrap();
    assert_eq!(dataio::encode_features(&m).unwrap(), pfv_bytes(&seg.rows));
    let set = dataio::LabelSet::new(seg.labels.iter().map(|&l| l as usize).collect(), 3).unwrap();
    assert_eq!(dataio::encode_labels(&set).unwrap(), plb_bytes(&seg.labels, 3));
}

#[test]
fn every_truncation_is_detected() {
    let bytes = pfv_bytes(&segments().rows);
    for cut in 0..bytes.len() {
        assert!(dataio::decode_features(&bytes[..cut]).is_err(), "cut at {cut}");
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(
        dataio::decode_features(&extra),
        Err(DataError::TrailingBytes { .. })
    ));
}
