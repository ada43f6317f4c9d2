//! Files and process contract shared with the external fine-tuning bridge.
//!
//! An export directory holds `train.jsonl` (+ manifest sidecar),
//! `hparams.json` and, for loss-based mitigation, `alignment.json`. The
//! bridge is invoked as
//!
//! ```text
//! <command...> finetune --dataset <dir>/train.jsonl --hparams <dir>/hparams.json
//!     [--align <dir>/alignment.json] --checkpoint-id <id> --registry <path>
//! <command...> extract-embeddings --checkpoint-id <id> --texts <texts.jsonl> --out <set.json>
//! ```
//!
//! `finetune` writes a [`RegistryEntry`] to the registry path; the served
//! checkpoint must speak the chat/embeddings wire contract of
//! [`crate::client`]. `extract-embeddings` reads `{"id", "text"}` lines and
//! writes an [`EmbeddingSet`] file.

use std::path::{Path, PathBuf};
use std::process::Command;

use biasforge_core::mitigation::{AlignmentConfig, AlignmentSpec};
use biasforge_core::{Axis, Culture, Dataset, EmbeddingSet};
use serde::{Deserialize, Serialize};

use crate::client::HandleConfig;
use crate::error::{Error, Result};
use crate::io::{load_dataset, load_embeddings, read_json, save_dataset, write_json, write_jsonl};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const HPARAMS_FILE: &str = "hparams.json";
pub const ALIGN_FILE: &str = "alignment.json";
pub const LOSS_LOG_COLUMNS: [&str; 5] = ["step", "task_loss", "align_loss", "lambda", "total_loss"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adapter {
    pub method: String,
    pub rank: u32,
}

impl Default for Adapter {
    fn default() -> Self {
        Adapter { method: "lora".into(), rank: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HParams {
    pub axis: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub culture: Option<Culture>,
    pub learning_rate: f64,
    pub epochs: u32,
    pub adapter: Adapter,
    pub seed: u64,
}

impl HParams {
    /// Gender: 1e-5 for 3 epochs. Culture: 1e-6 for 3 epochs, 5 for Arabic.
    pub fn defaults(axis: Axis, culture: Option<Culture>, seed: u64) -> Self {
        let (learning_rate, epochs) = match (axis, culture) {
            (Axis::Gender, _) => (1e-5, 3),
            (Axis::Culture, Some(Culture::Arabic)) => (1e-6, 5),
            (Axis::Culture, _) => (1e-6, 3),
        };
        HParams { axis, culture, learning_rate, epochs, adapter: Adapter::default(), seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainExport {
    pub dir: PathBuf,
    pub dataset: PathBuf,
    pub hparams: PathBuf,
    pub alignment: Option<PathBuf>,
}

/// Writes the training set, hyperparameters and optional alignment config.
/// The alignment config refers to the dataset by its file name so the
/// directory can move.
pub fn export_train(d: &Dataset, dir: &Path, hp: &HParams, align: Option<&AlignmentConfig>) -> Result<TrainExport> {
    crate::io::create_dir(dir)?;
    let dataset = dir.join(TRAIN_FILE);
    save_dataset(d, &dataset)?;
    let hparams = dir.join(HPARAMS_FILE);
    write_json(&hparams, hp)?;
    let alignment = match align {
        Some(cfg) => {
            let spec = AlignmentSpec::new(cfg, TRAIN_FILE, d.records())?;
            let p = dir.join(ALIGN_FILE);
            write_json(&p, &spec)?;
            Some(p)
        }
        None => None,
    };
    Ok(TrainExport { dir: dir.to_path_buf(), dataset, hparams, alignment })
}

/// Validates the dataset at `dataset_path` and writes its alignment config to `out`.
pub fn emit_alignment_config(cfg: &AlignmentConfig, dataset_path: &Path, out: &Path) -> Result<AlignmentSpec> {
    let d = load_dataset(dataset_path)?;
    let spec = AlignmentSpec::new(cfg, &dataset_path.display().to_string(), d.records())?;
    write_json(out, &spec)?;
    Ok(spec)
}

pub fn read_alignment_config(path: &Path) -> Result<AlignmentSpec> {
    read_json(path)
}

/// Written by the bridge after `finetune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub checkpoint_id: String,
    pub base_url: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_log: Option<PathBuf>,
}

impl RegistryEntry {
    /// `template` with the endpoint and model replaced by the registered ones.
    pub fn handle(&self, template: &HandleConfig) -> HandleConfig {
        HandleConfig { base_url: self.base_url.clone(), model: self.model.clone(), ..template.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeConfig {
    /// Program and leading arguments, e.g. `["python", "-m", "train_bridge"]`.
    pub command: Vec<String>,
}

impl BridgeConfig {
    fn run(&self, args: &[String]) -> Result<()> {
        let (prog, lead) = self.command.split_first().ok_or_else(|| Error::Bridge("empty bridge command".into()))?;
        log::info!("bridge: {prog} {} {}", lead.join(" "), args.join(" "));
        let out = Command::new(prog)
            .args(lead)
            .args(args)
            .output()
            .map_err(|e| Error::Bridge(format!("cannot start {prog:?}: {e}")))?;
        if !out.status.success() {
            let err = String::from_utf8_lossy(&out.stderr);
            let tail: String = err.chars().rev().take(2000).collect::<Vec<_>>().into_iter().rev().collect();
            return Err(Error::Bridge(format!("{} exited with {}: {}", args[0], out.status, tail.trim())));
        }
        Ok(())
    }

    pub fn finetune(&self, export: &TrainExport, checkpoint_id: &str, registry: &Path) -> Result<RegistryEntry> {
        let mut args: Vec<String> = vec![
            "finetune".into(),
            "--dataset".into(),
            export.dataset.display().to_string(),
            "--hparams".into(),
            export.hparams.display().to_string(),
        ];
        if let Some(a) = &export.alignment {
            args.extend(["--align".into(), a.display().to_string()]);
        }
        args.extend([
            "--checkpoint-id".into(),
            checkpoint_id.into(),
            "--registry".into(),
            registry.display().to_string(),
        ]);
        self.run(&args)?;
        let entry: RegistryEntry = read_json(registry)?;
        if entry.checkpoint_id != checkpoint_id {
            return Err(Error::Bridge(format!(
                "registry names checkpoint {:?}, expected {checkpoint_id:?}",
                entry.checkpoint_id
            )));
        }
        Ok(entry)
    }

    /// Hidden-state embeddings of `texts` from a registered checkpoint.
    pub fn extract_embeddings(&self, checkpoint_id: &str, ids: &[String], texts: &[String], work: &Path, stem: &str) -> Result<EmbeddingSet> {
        #[derive(Serialize)]
        struct Line<'a> {
            id: &'a str,
            text: &'a str,
        }
        let lines: Vec<Line> = ids.iter().zip(texts).map(|(id, text)| Line { id, text }).collect();
        let texts_path = work.join(format!("{stem}.texts.jsonl"));
        let out = work.join(format!("{stem}.json"));
        write_jsonl(&texts_path, &lines)?;
        self.run(&[
            "extract-embeddings".into(),
            "--checkpoint-id".into(),
            checkpoint_id.into(),
            "--texts".into(),
            texts_path.display().to_string(),
            "--out".into(),
            out.display().to_string(),
        ])?;
        let set = load_embeddings(&out)?;
        if set.ids() != ids {
            return Err(Error::Bridge(format!("{}: ids do not match the requested texts", out.display())));
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub step: u64,
    pub task_loss: f64,
    /// Empty when the step had no records of one provenance class.
    pub align_loss: Option<f64>,
    pub lambda: f64,
    pub total_loss: f64,
}

pub fn read_loss_log(path: &Path) -> Result<Vec<LossRow>> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != LOSS_LOG_COLUMNS {
        return Err(Error::Bridge(format!("{}: expected columns {}", path.display(), LOSS_LOG_COLUMNS.join(","))));
    }
    rdr.deserialize().map(|r| r.map_err(csv_err)).collect()
}

pub fn write_loss_log(path: &Path, rows: &[LossRow]) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Checks `total = task + λ·align` on every step to within `rel_tol`.
pub fn verify_loss_log(path: &Path, rel_tol: f64) -> Result<Vec<LossRow>> {
    let rows = read_loss_log(path)?;
    for r in &rows {
        let align = r.align_loss.unwrap_or(0.0);
        let expected = r.task_loss + r.lambda * align;
        let scale = expected.abs().max(r.total_loss.abs()).max(f64::MIN_POSITIVE);
        let finite = [r.task_loss, align, r.lambda, r.total_loss].iter().all(|x| x.is_finite());
        if !finite || (r.total_loss - expected).abs() > rel_tol * scale {
            return Err(Error::LossIdentity {
                path: path.to_path_buf(),
                step: r.step,
                task: r.task_loss,
                align,
                lambda: r.lambda,
                total: r.total_loss,
            });
        }
    }
    Ok(rows)
}
