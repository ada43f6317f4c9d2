//! On-disk formats: JSONL datasets with manifest sidecars, embedding sets,
//! and the JSON helpers every other module writes through.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use biasforge_core::{Dataset, EmbeddingSet, Manifest, Record};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// `data.jsonl` → `data.jsonl.manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::json(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("in-memory values serialize");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, &to_json_bytes(value))
}

/// One compact JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("in-memory values serialize");
        out.push(b'\n');
    }
    write_bytes(path, &out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line)
            .map_err(|e| Error::Line { path: path.to_path_buf(), line: i + 1, message: e.to_string() })?;
        out.push(item);
    }
    Ok(out)
}

/// Reads a JSONL dataset. Counts are recomputed from the records; seed,
/// creator, inputs and params come from the sidecar when one exists.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = read_text(path)?;
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Line { path: path.to_path_buf(), line: lineno, message };
        let r: Record = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        r.validate().map_err(|e| bad(e.to_string()))?;
        if let Some(&first) = seen.get(&r.id) {
            return Err(Error::DuplicateLine { path: path.to_path_buf(), id: r.id, first, second: lineno });
        }
        seen.insert(r.id.clone(), lineno);
        records.push(r);
    }
    let sidecar = manifest_path(path);
    let manifest = if sidecar.exists() {
        read_json::<Manifest>(&sidecar)?
    } else {
        Manifest::new("load_dataset").with_inputs([path.display().to_string()])
    };
    Ok(Dataset::new(records, manifest)?)
}

/// Writes records as JSONL plus the manifest sidecar.
pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    write_jsonl(path, d.records())?;
    write_json(&manifest_path(path), d.manifest())
}

pub fn save_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    write_json(path, set)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet> {
    read_json(path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}
