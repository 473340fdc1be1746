//! On-disk formats: series CSV, raw snapshots with descriptors, the manifest.

use crate::estimates::DiagnosticsRecord;
use crate::torus::ScalarField;
use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "MANIFEST";
pub const PARTIAL: &str = ".partial";

fn artifact(msg: impl Into<String>) -> Error {
    Error::Artifact(msg.into())
}

/// Appends `.partial` to a path.
pub fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(PARTIAL);
    PathBuf::from(s)
}

/// Collects the files written by one command. Files go to disk with a
/// `.partial` suffix and only get their final names in [`ArtifactSet::commit`].
#[derive(Debug)]
pub struct ArtifactSet {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl ArtifactSet {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(ArtifactSet {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` to `rel.partial` under the root.
    pub fn write(&mut self, rel: &Path, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::File::create(partial_path(&path))?;
        f.write_all(bytes)?;
        self.files.push(rel.to_path_buf());
        Ok(())
    }

    pub fn write_series(&mut self, rel: &Path, rows: &[DiagnosticsRecord]) -> Result<()> {
        self.write(rel, series_to_string(rows).as_bytes())
    }

    pub fn write_snapshot(&mut self, rel: &Path, desc: &SnapshotDesc, field: &ScalarField) -> Result<()> {
        if field.len() != desc.shape.0 * desc.shape.1 {
            return Err(Error::ShapeMismatch {
                expected: desc.shape.0 * desc.shape.1,
                got: field.len(),
            });
        }
        self.write(rel, &snapshot_bytes(field))?;
        self.write(&descriptor_path(rel), desc.to_text().as_bytes())
    }

    /// Leaves everything under `dir` with its `.partial` name and out of the manifest.
    pub fn hold(&mut self, dir: &Path) {
        self.files.retain(|f| !f.starts_with(dir));
    }

    /// Renames every file to its final name and writes the manifest last.
    pub fn commit(self) -> Result<PathBuf> {
        for rel in &self.files {
            let path = self.root.join(rel);
            fs::rename(partial_path(&path), &path)?;
        }
        let manifest = build_manifest(&self.root, &self.files)?;
        let path = self.root.join(MANIFEST);
        fs::write(&path, manifest)?;
        Ok(path)
    }
}

/// Header plus one row per record; shortest round-trip decimal, LF endings.
pub fn series_to_string(rows: &[DiagnosticsRecord]) -> String {
    let mut out = DiagnosticsRecord::COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let vals: Vec<String> = r.values().iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&vals.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_series(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.split('\n');
    let header = lines.next().ok_or_else(|| artifact("empty series"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols != DiagnosticsRecord::COLUMNS {
        return Err(artifact(format!("unexpected series header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| artifact(format!("series row {}: {e}", i + 1)))?;
        rows.push(DiagnosticsRecord::from_values(&vals)?);
    }
    Ok(rows)
}

pub fn read_series(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    parse_series(&fs::read_to_string(path)?)
}

/// Sidecar descriptor of a raw snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotDesc {
    pub field: String,
    /// `(rows, cols)`: row index `i` along the first lattice vector.
    pub shape: (usize, usize),
    pub t: f64,
    pub eps: f64,
    pub tau: [f64; 2],
    pub n: usize,
}

impl SnapshotDesc {
    pub fn to_text(&self) -> String {
        format!(
            "field: {}\nshape: {},{}\nt: {:?}\neps: {:?}\ntau: {:?},{:?}\nN: {}\ndtype: f64le\norder: row-major\n",
            self.field, self.shape.0, self.shape.1, self.t, self.eps, self.tau[0], self.tau[1], self.n
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| artifact(format!("descriptor line {line:?}")))?;
            kv.insert(k.trim(), v.trim());
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| artifact(format!("descriptor lacks {k}")));
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse().map_err(|_| artifact(format!("descriptor {k} is not a number")))
        };
        let pair = |k: &str| -> Result<(String, String)> {
            let (a, b) = get(k)?
                .split_once(',')
                .ok_or_else(|| artifact(format!("descriptor {k} needs two entries")))?;
            Ok((a.trim().to_string(), b.trim().to_string()))
        };
        if get("dtype")? != "f64le" || get("order")? != "row-major" {
            return Err(artifact("unsupported snapshot encoding"));
        }
        let bad_int = |k: &str| artifact(format!("descriptor {k} is not an integer"));
        let (r, c) = pair("shape")?;
        let (tr, ti) = pair("tau")?;
        Ok(SnapshotDesc {
            field: get("field")?.to_string(),
            shape: (
                r.parse().map_err(|_| bad_int("shape"))?,
                c.parse().map_err(|_| bad_int("shape"))?,
            ),
            t: num("t")?,
            eps: num("eps")?,
            tau: [
                tr.parse().map_err(|_| artifact("descriptor tau"))?,
                ti.parse().map_err(|_| artifact("descriptor tau"))?,
            ],
            n: get("N")?.parse().map_err(|_| bad_int("N"))?,
        })
    }
}

/// `phi_0003.f64` → `phi_0003.desc`.
pub fn descriptor_path(data: &Path) -> PathBuf {
    data.with_extension("desc")
}

pub fn snapshot_bytes(field: &ScalarField) -> Vec<u8> {
    field.values().iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotDesc, ScalarField)> {
    let desc = SnapshotDesc::parse(&fs::read_to_string(descriptor_path(path))?)?;
    let bytes = fs::read(path)?;
    let expected = desc.shape.0 * desc.shape.1;
    if desc.shape.0 != desc.shape.1 || bytes.len() != 8 * expected {
        return Err(Error::ShapeMismatch {
            expected,
            got: bytes.len() / 8,
        });
    }
    let vals = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((desc.clone(), ScalarField::from_vec(desc.shape.0, vals)))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `sha256  relative/path` per line, sorted by path.
pub fn build_manifest(root: &Path, files: &[PathBuf]) -> Result<String> {
    let mut entries: Vec<(String, String)> = Vec::with_capacity(files.len());
    for rel in files {
        let bytes = fs::read(root.join(rel))?;
        entries.push((rel_string(rel), sha256_hex(&bytes)));
    }
    entries.sort();
    Ok(entries
        .into_iter()
        .map(|(p, h)| format!("{h}  {p}\n"))
        .collect())
}

fn rel_string(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Re-hashes every listed file and returns the paths whose digest differs.
pub fn verify_manifest(root: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(root.join(MANIFEST))?;
    let mut bad = Vec::new();
    for line in text.lines() {
        let (hash, rel) = line
            .split_once("  ")
            .ok_or_else(|| artifact(format!("manifest line {line:?}")))?;
        match fs::read(root.join(rel)) {
            Ok(bytes) if sha256_hex(&bytes) == hash => {}
            _ => bad.push(rel.to_string()),
        }
    }
    Ok(bad)
}
