// SPDX-License-Identifier: Apache-2.0

//! Binary field files, CSV tables, and run manifests. Every file is written
//! through a temporary file in the target directory and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, RealField};

pub const FIELD_MAGIC: &[u8; 16] = b"FRACBUMP-FLD\0\0\0\0";
const HEADER_LEN: usize = 16 + 4 + 4 + 8 + 8;

/// Header: magic, `u32` dimension, `u32` points per axis, `f64` half-width,
/// `f64` order `s`, then the samples as little-endian `f64` in row-major
/// order.
pub fn encode_field(f: &RealField, s: f64) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * f.samples().len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(g.dimension() as u32).to_le_bytes());
    out.extend_from_slice(&(g.points_per_axis() as u32).to_le_bytes());
    out.extend_from_slice(&g.half_width().to_le_bytes());
    out.extend_from_slice(&s.to_le_bytes());
    for v in f.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// The field and the order `s` stored with it.
pub fn decode_field(bytes: &[u8]) -> Result<(RealField, f64)> {
    if bytes.len() < HEADER_LEN || &bytes[..16] != FIELD_MAGIC {
        return Err(Error::Format("not a fracbump field file".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let dimension = u32_at(16) as usize;
    let points = u32_at(20) as usize;
    let half_width = f64_at(24);
    let s = f64_at(32);
    if dimension == 0 || dimension > 3 {
        return Err(Error::Format(format!("bad header: dimension {dimension}")));
    }
    let grid = GridSpec::new(dimension, half_width, points).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * grid.len() {
        return Err(Error::Format(format!(
            "field body has {} bytes, header implies {}",
            body.len(),
            8 * grid.len()
        )));
    }
    let samples = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let field = RealField::new(grid, samples).map_err(|e| Error::Format(e.to_string()))?;
    Ok((field, s))
}

pub fn read_field(path: &Path) -> Result<(RealField, f64)> {
    decode_field(&fs::read(path)?)
}

/// Temporary file next to `path`, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// CSV with a leading `# <name> v<version>` line naming the frozen column set.
pub fn csv_table<R: Serialize>(name: &str, version: u32, rows: &[R]) -> Result<Vec<u8>> {
    let mut out = format!("# {name} v{version}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in rows {
            w.serialize(r).map_err(|e| Error::Format(format!("csv: {e}")))?;
        }
        w.flush()?;
    }
    Ok(out)
}

/// Rows back from [`csv_table`] output, checking the version line.
pub fn read_csv_table<R: for<'de> Deserialize<'de>>(bytes: &[u8], name: &str, version: u32) -> Result<Vec<R>> {
    let expect = format!("# {name} v{version}\n");
    let body = bytes
        .strip_prefix(expect.as_bytes())
        .ok_or_else(|| Error::Format(format!("missing `{}` header", expect.trim_end())))?;
    csv::Reader::from_reader(body)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Format(format!("csv: {e}"))))
        .collect()
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Flat `key = value` text for a record whose fields are all scalars.
pub fn key_value_text<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let serde_json::Value::Object(map) = serde_json::to_value(value)? else {
        return Err(Error::Format("key-value records must be objects".into()));
    };
    let mut out = String::new();
    for (k, v) in map {
        if v.is_object() || v.is_array() {
            return Err(Error::Format(format!("key-value field `{k}` is not a scalar")));
        }
        out.push_str(&format!("{k} = {v}\n"));
    }
    Ok(out.into_bytes())
}

pub fn parse_key_value_text<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
    let map = crate::config::parse_key_values(text).map_err(|e| Error::Format(e.to_string()))?;
    serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub stages: Vec<StageTime>,
    pub files: Vec<FileRecord>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let bytes = fs::read(dir.join(MANIFEST_NAME))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Files whose current checksum differs from the record, or that are gone.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| match fs::read(dir.join(&f.path)) {
                Ok(b) => sha256_hex(&b) != f.sha256 || b.len() as u64 != f.bytes,
                Err(_) => true,
            })
            .map(|f| f.path.clone())
            .collect()
    }
}

/// Output directory of one command; records every file and stage time.
#[derive(Debug)]
pub struct RunOutputs {
    dir: PathBuf,
    files: Vec<FileRecord>,
    stages: Vec<StageTime>,
}

impl RunOutputs {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            files: Vec::new(),
            stages: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileRecord {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        self.write(name, &json_bytes(value)?)
    }

    pub fn write_field(&mut self, name: &str, f: &RealField, s: f64) -> Result<PathBuf> {
        self.write(name, &encode_field(f, s))
    }

    pub fn write_csv<R: Serialize>(&mut self, name: &str, table: &str, version: u32, rows: &[R]) -> Result<PathBuf> {
        self.write(name, &csv_table(table, version, rows)?)
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self)?;
        self.stages.push(StageTime {
            stage: name.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    /// Writes `manifest.json` listing everything written so far.
    pub fn finish(self, command: &str, config: serde_json::Value) -> Result<RunManifest> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            stages: self.stages,
            files: self.files,
        };
        write_atomic(&self.dir.join(MANIFEST_NAME), &json_bytes(&manifest)?)?;
        Ok(manifest)
    }
}
