//! Run-directory persistence: JSON lines, checkpoints, manifest and digests.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{
    Checkpoint, FileEntry, RealizationRecord, ResultsManifest, CHECKPOINT_FILE, MANIFEST_FILE, RECORDS_FILE,
};
use crate::{Error, Result};

pub(super) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("output_dir {} is not writable: {e}", dir.display())))
}

/// Writes through a temporary file so readers never see a partial file.
pub(super) fn write_text(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(super) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Clears the state of an earlier run in `dir`.
pub(super) fn start_fresh(dir: &Path) -> Result<()> {
    for name in [CHECKPOINT_FILE, MANIFEST_FILE] {
        let p = dir.join(name);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    let p = dir.join(RECORDS_FILE);
    File::create(&p).map_err(|e| Error::io(&p, e))?;
    Ok(())
}

/// Records covered by the checkpoint in `dir`. Lines written after the
/// last checkpoint are dropped.
pub(super) fn resume_records(dir: &Path, digest: &str) -> Result<Vec<RealizationRecord>> {
    let cp_path = dir.join(CHECKPOINT_FILE);
    if !cp_path.exists() {
        if dir.join(MANIFEST_FILE).exists() {
            // a finished run: its records are the checkpoint
            let m = load_manifest(dir)?;
            if m.config_digest != digest {
                return Err(Error::Config(
                    "cannot resume: the run in output_dir used a different configuration".into(),
                ));
            }
            let records = read_records(dir, Some(m.completed))?;
            return keep_prefix(dir, records, m.completed);
        }
        start_fresh(dir)?;
        return Ok(Vec::new());
    }
    let cp: Checkpoint = read_json(&cp_path)?;
    if cp.config_digest != digest {
        return Err(Error::Config(
            "cannot resume: the checkpoint belongs to a different configuration".into(),
        ));
    }
    let records = read_records(dir, Some(cp.completed))?;
    keep_prefix(dir, records, cp.completed)
}

fn keep_prefix(
    dir: &Path,
    mut records: Vec<RealizationRecord>,
    completed: usize,
) -> Result<Vec<RealizationRecord>> {
    if records.len() < completed {
        return Err(Error::Missing(format!(
            "{RECORDS_FILE} holds {} records but the checkpoint lists {completed}; rerun without --resume",
            records.len()
        )));
    }
    records.truncate(completed);
    if records.iter().enumerate().any(|(i, r)| r.index != i) {
        return Err(Error::Missing(format!(
            "{RECORDS_FILE} is out of order; rerun without --resume"
        )));
    }
    let p = dir.join(RECORDS_FILE);
    File::create(&p).map_err(|e| Error::io(&p, e))?;
    append_records(dir, &records)?;
    Ok(records)
}

pub(super) fn append_records(dir: &Path, records: &[RealizationRecord]) -> Result<()> {
    let p = dir.join(RECORDS_FILE);
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    let mut f = OpenOptions::new()
        .append(true)
        .create(true)
        .open(&p)
        .map_err(|e| Error::io(&p, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(&p, e))?;
    f.sync_data().map_err(|e| Error::io(&p, e))
}

pub(super) fn remove_checkpoint(dir: &Path) -> Result<()> {
    let p = dir.join(CHECKPOINT_FILE);
    if p.exists() {
        fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

pub(super) fn write_checkpoint(dir: &Path, cp: &Checkpoint) -> Result<()> {
    write_json(&dir.join(CHECKPOINT_FILE), cp)
}

/// All records of the run in `dir`, in index order.
pub fn load_records(dir: &Path) -> Result<Vec<RealizationRecord>> {
    read_records(dir, None)
}

/// The first `limit` records, ignoring anything after them.
fn read_records(dir: &Path, limit: Option<usize>) -> Result<Vec<RealizationRecord>> {
    let p = dir.join(RECORDS_FILE);
    let f = File::open(&p).map_err(|_| {
        Error::Missing(format!(
            "{} not found: run the ensemble first (`run`)",
            p.display()
        ))
    })?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        if limit.is_some_and(|k| out.len() >= k) {
            break;
        }
        let line = line.map_err(|e| Error::io(&p, e))?;
        if !line.is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn load_manifest(dir: &Path) -> Result<ResultsManifest> {
    let p = dir.join(MANIFEST_FILE);
    if !p.exists() {
        return Err(Error::Missing(format!(
            "{} not found: run the ensemble first (`run`)",
            p.display()
        )));
    }
    read_json(&p)
}

/// The manifest of a finished run, or an error naming `step`'s prerequisite.
pub(super) fn require_complete(dir: &Path, step: &str) -> Result<ResultsManifest> {
    let m = load_manifest(dir)?;
    if !m.is_complete() {
        return Err(Error::Missing(format!(
            "{step} needs a finished run but only {} of {} realizations are done: finish it with `run --resume`",
            m.completed, m.n_realizations
        )));
    }
    Ok(m)
}

pub(super) fn write_manifest(dir: &Path, m: &ResultsManifest) -> Result<()> {
    write_json(&dir.join(MANIFEST_FILE), m)
}

pub(super) fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Adds or refreshes the digests of `names`, keeping the index sorted.
pub(super) fn index_files(dir: &Path, m: &mut ResultsManifest, names: &[&str]) -> Result<()> {
    for &name in names {
        let sha256 = file_digest(&dir.join(name))?;
        match m.files.iter_mut().find(|f| f.name == name) {
            Some(f) => f.sha256 = sha256,
            None => m.files.push(FileEntry {
                name: name.to_string(),
                sha256,
            }),
        }
    }
    m.files.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(())
}

/// Checks that every file the manifest in `dir` lists exists and matches
/// its digest.
pub fn verify_manifest(dir: &Path) -> Result<()> {
    let m = load_manifest(dir)?;
    for f in &m.files {
        let p = dir.join(&f.name);
        if !p.exists() {
            return Err(Error::Missing(format!(
                "manifest lists {} which does not exist",
                f.name
            )));
        }
        let actual = file_digest(&p)?;
        if actual != f.sha256 {
            return Err(Error::Missing(format!(
                "digest mismatch for {}: manifest {}, file {actual}",
                f.name, f.sha256
            )));
        }
    }
    Ok(())
}
