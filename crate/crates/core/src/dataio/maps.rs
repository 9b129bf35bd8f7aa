use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::tables::{write_label_csv, LabelEntry};
use crate::{Error, Result};

fn with_ext(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

/// Binary graymap (P5, maxval 255); pixel value `round(255·label / max_label)`.
fn write_pgm(path: &Path, height: usize, width: usize, labels: &[u32]) -> Result<()> {
    let max = labels.iter().copied().max().unwrap_or(0);
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = labels
        .iter()
        .map(|&l| if max == 0 { 0 } else { ((l as f64) * 255.0 / max as f64).round() as u8 })
        .collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Writes a dense `height × width` label map as `<path>.csv` (`row,col,label`)
/// and `<path>.pgm`.
pub fn write_cluster_map(labels: &[u32], height: usize, width: usize, path: impl AsRef<Path>) -> Result<()> {
    if labels.len() != height * width {
        return Err(Error::InvalidInput(format!(
            "{} labels for a {height}×{width} map",
            labels.len()
        )));
    }
    let path = path.as_ref();
    let entries: Vec<LabelEntry> = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| LabelEntry {
            row: i / width,
            col: i % width,
            label,
        })
        .collect();
    write_label_csv(with_ext(path, "csv"), &entries)?;
    write_pgm(&with_ext(path, "pgm"), height, width, labels)
}

/// Cluster map for a subset of pixels. The CSV lists only the clustered
/// pixels with their cluster id; the graymap (written when `geometry` is
/// known) shows unclustered pixels as 0 and cluster `c` as level `c + 1`.
pub fn write_sparse_cluster_map(
    pixel_index: &[(usize, usize)],
    clusters: &[usize],
    geometry: Option<(usize, usize)>,
    path: impl AsRef<Path>,
) -> Result<()> {
    if pixel_index.len() != clusters.len() {
        return Err(Error::InvalidInput("pixel index and cluster lengths differ".into()));
    }
    let path = path.as_ref();
    let entries: Vec<LabelEntry> = pixel_index
        .iter()
        .zip(clusters)
        .map(|(&(row, col), &c)| LabelEntry {
            row,
            col,
            label: c as u32,
        })
        .collect();
    write_label_csv(with_ext(path, "csv"), &entries)?;
    if let Some((h, w)) = geometry {
        let mut dense = vec![0u32; h * w];
        for e in &entries {
            if e.row >= h || e.col >= w {
                return Err(Error::InvalidInput(format!("pixel ({}, {}) outside {h}×{w}", e.row, e.col)));
            }
            dense[e.row * w + e.col] = e.label + 1;
        }
        write_pgm(&with_ext(path, "pgm"), h, w, &dense)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::read_label_csv;

    #[test]
    fn single_pixel_csv() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("map");
        write_cluster_map(&[0], 1, 1, &stem).unwrap();
        let text = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
        assert_eq!(text, "row,col,label\n0,0,0\n");
    }

    #[test]
    fn two_value_graymap_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("map");
        write_cluster_map(&[0, 1], 2, 1, &stem).unwrap();
        let bytes = std::fs::read(stem.with_extension("pgm")).unwrap();
        let header = b"P5\n1 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0, 255]);
    }

    #[test]
    fn csv_reads_back_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("map");
        let labels: Vec<u32> = (0..20).map(|i| (i * 7 % 5) as u32).collect();
        write_cluster_map(&labels, 4, 5, &stem).unwrap();
        let back = read_label_csv(stem.with_extension("csv")).unwrap();
        let got: Vec<u32> = back.iter().map(|e| e.label).collect();
        assert_eq!(got, labels);
        assert!(back.iter().enumerate().all(|(i, e)| e.row == i / 5 && e.col == i % 5));
    }

    #[test]
    fn length_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_cluster_map(&[0, 1, 2], 2, 2, dir.path().join("m")).is_err());
    }

    #[test]
    fn sparse_map_offsets_clusters_in_graymap() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("s");
        write_sparse_cluster_map(&[(0, 1), (1, 0)], &[0, 1], Some((2, 2)), &stem).unwrap();
        let bytes = std::fs::read(stem.with_extension("pgm")).unwrap();
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 128, 255, 0]);
    }
}
