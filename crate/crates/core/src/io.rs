//! Artifact formats: CSV series, binary snapshots and the digest manifest.

use crate::evolution::SpectralState;
use crate::spectral::{Field, Grid};
use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Shortest form that keeps 17 significant digits.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.16e}")
}

/// CSV text with a header row and `\n` line endings.
pub fn csv_text(header: &[&str], rows: &[Vec<f64>]) -> Result<String> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidArgument(format!("row of {} values under {} columns", row.len(), header.len())));
        }
        let cells: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    std::fs::write(path, csv_text(header, rows)?)?;
    Ok(())
}

/// Reads back a CSV written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| c.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad CSV cell {c}: {e}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

const MAGIC: &[u8; 4] = b"KGZ1";
const VERSION: u32 = 1;

/// `KGZ1`, version, N, L, t, then `n, n_t, E1, E2, E1_t, E2_t` row-major.
pub fn snapshot_bytes(grid: &Grid, s: &SpectralState) -> Vec<u8> {
    let fields = s.to_fields(grid);
    let planes: [&Field; 6] = [&fields.n, &fields.nt, &fields.e[0], &fields.e[1], &fields.et[0], &fields.et[1]];
    let mut out = Vec::with_capacity(28 + 48 * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&grid.half_width().to_le_bytes());
    out.extend_from_slice(&s.t.to_le_bytes());
    for p in planes {
        for v in &p.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Decoded snapshot file.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotFile {
    pub n: usize,
    pub half_width: f64,
    pub t: f64,
    pub planes: [Vec<f64>; 6],
}

pub fn parse_snapshot(bytes: &[u8]) -> Result<SnapshotFile> {
    let bad = |m: &str| Error::Snapshot(m.to_string());
    if bytes.len() < 28 || &bytes[..4] != MAGIC {
        return Err(bad("missing KGZ1 header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    if u32_at(4) != VERSION {
        return Err(bad("unsupported snapshot version"));
    }
    let n = u32_at(8) as usize;
    let len = n * n;
    if bytes.len() != 28 + 48 * len {
        return Err(bad("snapshot length does not match its grid size"));
    }
    let planes = std::array::from_fn(|k| (0..len).map(|i| f64_at(28 + 8 * (k * len + i))).collect());
    Ok(SnapshotFile { n, half_width: f64_at(12), t: f64_at(20), planes })
}

pub fn write_snapshot(path: &Path, grid: &Grid, s: &SpectralState) -> Result<()> {
    std::fs::write(path, snapshot_bytes(grid, s))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotFile> {
    parse_snapshot(&std::fs::read(path)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").expect("string write");
    }
    s
}

/// Writes `MANIFEST.sha256` listing every other regular file of `dir`,
/// sorted by name, as `digest  name`.
pub fn write_manifest(dir: &Path) -> Result<PathBuf> {
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != MANIFEST)
        .collect();
    names.sort();
    let mut text = String::new();
    for name in names {
        let digest = sha256_hex(&std::fs::read(dir.join(&name))?);
        writeln!(text, "{digest}  {name}").expect("string write");
    }
    let path = dir.join(MANIFEST);
    std::fs::write(&path, text)?;
    Ok(path)
}

pub const MANIFEST: &str = "MANIFEST.sha256";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{make_initial_data, InitialDataParams};

    #[test]
    fn csv_round_trips_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let rows = vec![vec![1.0, 0.1 + 0.2, -1e-300], vec![std::f64::consts::PI, 0.0, 12345.678]];
        write_csv(&path, &["t", "x", "y"], &rows).unwrap();
        let (h, back) = read_csv(&path).unwrap();
        assert_eq!(h, vec!["t", "x", "y"]);
        assert_eq!(back, rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with('\n') && !text.contains('\r'));
        assert!(csv_text(&["a"], &[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::new(16, 8.0, 2.0 / 3.0).unwrap();
        let s = make_initial_data(&g, &InitialDataParams { radius_e: 1.0, radius_n: 1.0, n0_amplitude: 0.1, ..Default::default() }).unwrap();
        let bytes = snapshot_bytes(&g, &s);
        assert_eq!(&bytes[..4], b"KGZ1");
        let back = parse_snapshot(&bytes).unwrap();
        assert_eq!((back.n, back.half_width, back.t), (16, 8.0, 1.0));
        let f = s.to_fields(&g);
        assert_eq!(back.planes[0], f.n.0);
        assert_eq!(back.planes[5], f.et[1].0);
        assert!(parse_snapshot(&bytes[..100]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(parse_snapshot(&wrong).is_err());
    }

    #[test]
    fn manifest_lists_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.csv"), "x\n").unwrap();
        std::fs::write(dir.path().join("a.csv"), "").unwrap();
        let m = std::fs::read_to_string(write_manifest(dir.path()).unwrap()).unwrap();
        let lines: Vec<&str> = m.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].ends_with("  a.csv"));
        assert!(lines[0].starts_with("e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"));
        assert!(lines[1].ends_with("  b.csv"));
    }
}
