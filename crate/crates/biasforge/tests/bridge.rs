//! The training-bridge contract against a stand-in bridge script.

use std::path::{Path, PathBuf};

use biasforge::bridge::{
    export_train, read_alignment_config, read_loss_log, verify_loss_log, write_loss_log, BridgeConfig, HParams, LossRow,
    ALIGN_FILE, HPARAMS_FILE, TRAIN_FILE,
};
use biasforge::io::{load_dataset, load_embeddings, read_json};
use biasforge::orchestrator::{run_experiment, verify_manifest, CellStatus, ExperimentConfig, Mitigation, Strategy};
use biasforge::tasks::Task;
use biasforge_core::mitigation::{AlignmentConfig, EmbeddingSource};
use biasforge_core::{Axis, BiasSpec, Dataset, Manifest, Provenance, Record};
use serde_json::Value;

/// Writes registry and loss log on `finetune`; three-dim embeddings on
/// `extract-embeddings`. Fails `finetune` for checkpoint ids containing `$FAIL_ON`.
const FAKE_BRIDGE: &str = r#"
import json, os, sys
args = sys.argv[2:]
fail_on = sys.argv[1]
if args and args[0] == "finetune":
    args = args[1:]
    opt = {args[i][2:]: args[i + 1] for i in range(0, len(args), 2)}
    ckpt = opt["checkpoint-id"]
    if fail_on and fail_on in ckpt:
        sys.stderr.write("simulated failure\n")
        sys.exit(3)
    rows = [json.loads(l) for l in open(opt["dataset"]) if l.strip()]
    hp = json.load(open(opt["hparams"]))
    lam = json.load(open(opt["align"]))["lambda"] if "align" in opt else 0.0
    log = os.path.join(os.path.dirname(opt["registry"]), "loss.csv")
    with open(log, "w") as f:
        f.write("step,task_loss,align_loss,lambda,total_loss\n")
        for step in range(3):
            task, align = 2.0 / (step + 1), 0.25 * step
            f.write(f"{step},{task},{align},{lam},{task + lam * align}\n")
    json.dump({"checkpoint_id": ckpt, "base_url": "mock", "model": "ft-" + hp["axis"] + "-" + str(len(rows)), "loss_log": "loss.csv"},
              open(opt["registry"], "w"))
elif args and args[0] == "extract-embeddings":
    args = args[1:]
    opt = {args[i][2:]: args[i + 1] for i in range(0, len(args), 2)}
    lines = [json.loads(l) for l in open(opt["texts"]) if l.strip()]
    source = "augmented" if "augmented" in opt["out"].rsplit("/", 1)[-1] else "original"
    vecs = [[float(len(x["text"])), float(sum(map(ord, x["text"])) % 97), 1.0 if source == "augmented" else 0.0] for x in lines]
    json.dump({"vectors": vecs, "dim": 3, "source": source, "ids": [x["id"] for x in lines]}, open(opt["out"], "w"))
else:
    sys.exit(2)
"#;

fn fake_bridge(dir: &Path, fail_on: &str) -> BridgeConfig {
    let script = dir.join("fake_bridge.py");
    std::fs::write(&script, FAKE_BRIDGE).unwrap();
    BridgeConfig { command: vec!["python3".into(), script.display().to_string(), fail_on.into()] }
}

fn small_dataset() -> Dataset {
    let mut records = vec![Record::original("o1", "bio one", "bio").with_completion("nurse")];
    let mut a = Record::original("a1", "bio two", "bio").with_completion("surgeon");
    a.provenance = Provenance::Augmented;
    a.bias = Some(BiasSpec::gender(2).unwrap());
    records.push(a);
    Dataset::new(records, Manifest::new("test")).unwrap()
}

#[test]
fn export_layout_and_alignment_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = AlignmentConfig { lambda: 0.3, ..AlignmentConfig::default() };
    let hp = HParams::defaults(Axis::Gender, None, 5);
    let e = export_train(&small_dataset(), &dir.path().join("x"), &hp, Some(&cfg)).unwrap();
    assert_eq!(e.dataset, dir.path().join("x").join(TRAIN_FILE));
    assert_eq!(read_json::<HParams>(&dir.path().join("x").join(HPARAMS_FILE)).unwrap(), hp);
    let hp_json: Value = read_json(&e.hparams).unwrap();
    assert_eq!(hp_json["learning_rate"], 1e-5);
    assert_eq!(hp_json["epochs"], 3);
    let spec = read_alignment_config(&dir.path().join("x").join(ALIGN_FILE)).unwrap();
    assert_eq!(spec.lambda, 0.3);
    assert_eq!(spec.dataset, TRAIN_FILE);
    assert_eq!(spec.partition_counts.values().sum::<u64>(), 2);
    assert_eq!(load_dataset(&e.dataset).unwrap().records(), small_dataset().records());
}

#[test]
fn loss_log_identity() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("loss.csv");
    let rows = vec![
        LossRow { step: 0, task_loss: 1.5, align_loss: Some(2.0), lambda: 0.1, total_loss: 1.7 },
        LossRow { step: 1, task_loss: 1.2, align_loss: None, lambda: 0.1, total_loss: 1.2 },
    ];
    write_loss_log(&p, &rows).unwrap();
    assert_eq!(read_loss_log(&p).unwrap(), rows);
    assert_eq!(verify_loss_log(&p, 1e-6).unwrap().len(), 2);
    let head = std::fs::read_to_string(&p).unwrap();
    assert!(head.starts_with("step,task_loss,align_loss,lambda,total_loss\n"), "{head}");

    write_loss_log(&p, &[LossRow { step: 7, task_loss: 1.0, align_loss: Some(1.0), lambda: 0.5, total_loss: 1.6 }]).unwrap();
    let err = verify_loss_log(&p, 1e-6).unwrap_err().to_string();
    assert!(err.contains('7'), "{err}");
}

#[test]
fn finetune_and_extract_through_the_bridge() {
    let dir = tempfile::tempdir().unwrap();
    let bridge = fake_bridge(dir.path(), "");
    let hp = HParams::defaults(Axis::Gender, None, 1);
    let e = export_train(&small_dataset(), &dir.path().join("exp"), &hp, Some(&AlignmentConfig::default())).unwrap();
    let reg = dir.path().join("exp").join("registry.json");
    let entry = bridge.finetune(&e, "ckpt-1", &reg).unwrap();
    assert_eq!(entry.checkpoint_id, "ckpt-1");
    assert_eq!(entry.model, "ft-gender-2");
    assert_eq!(verify_loss_log(&dir.path().join("exp").join(entry.loss_log.unwrap()), 1e-6).unwrap().len(), 3);

    let ids = vec!["a".to_string(), "b".to_string()];
    let texts = vec!["first".to_string(), "second".to_string()];
    let set = bridge.extract_embeddings("ckpt-1", &ids, &texts, dir.path(), "augmented").unwrap();
    assert_eq!((set.dim(), set.len(), set.source()), (3, 2, Provenance::Augmented));
    assert_eq!(load_embeddings(&dir.path().join("augmented.json")).unwrap(), set);
}

#[test]
fn bridge_failures_surface_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let bridge = fake_bridge(dir.path(), "bad");
    let e = export_train(&small_dataset(), &dir.path().join("exp"), &HParams::defaults(Axis::Gender, None, 1), None).unwrap();
    let err = bridge.finetune(&e, "bad-1", &dir.path().join("reg.json")).unwrap_err().to_string();
    assert!(err.contains("simulated failure"), "{err}");
}

fn run_cfg(bridge: BridgeConfig) -> ExperimentConfig {
    ExperimentConfig {
        bias_types: Some(vec![0, 3]),
        gammas: Some(vec!["0.2".parse().unwrap()]),
        total: Some(60),
        seed: 21,
        mitigation: Mitigation { strategy: Strategy::Loss, lambda: 0.5, ..Default::default() },
        tasks: Some(vec![Task::Classification, Task::Embedding]),
        embedding_source: EmbeddingSource::Bridge,
        bridge: Some(bridge),
        ..Default::default()
    }
}

#[test]
fn full_run_through_the_bridge() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let m = run_experiment(&run_cfg(fake_bridge(dir.path(), "")), &out).unwrap();
    assert_eq!(m.cells.len(), 2);
    for c in &m.cells {
        assert_eq!(c.status, CellStatus::Ok, "{:?}", c.error);
        assert_eq!(c.checkpoint.as_deref().map(|s| s.starts_with(&c.cell)), Some(true));
        assert!(c.embedding_source.as_deref().unwrap().starts_with("bridge:"));
        let exp: PathBuf = out.join("train_exports").join(&c.cell);
        assert!(exp.join(ALIGN_FILE).is_file() && exp.join("registry.json").is_file());
        let set = load_embeddings(&out.join("embeddings").join(&c.cell).join("augmented.json")).unwrap();
        assert_eq!(set.dim(), 3);
    }
    assert!(verify_manifest(&out).unwrap().is_empty());
}

#[test]
fn a_failing_cell_does_not_stop_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let m = run_experiment(&run_cfg(fake_bridge(dir.path(), "t3_")), &out).unwrap();
    let by_type: Vec<(u8, CellStatus)> = m.cells.iter().map(|c| (c.bias_type, c.status)).collect();
    assert_eq!(by_type, vec![(0, CellStatus::Ok), (3, CellStatus::Failed)]);
    let failed = &m.cells[1];
    assert_eq!(failed.error.as_ref().unwrap().stage, "finetune");
    assert!(out.join("metrics").join(&m.cells[0].cell).join("classification.json").is_file());
    let report: Value = read_json(&out.join("report.json")).unwrap();
    assert_eq!((report["completed"].as_u64(), report["failed"].as_u64()), (Some(1), Some(1)));
}

#[test]
fn non_dry_runs_need_a_bridge() {
    let cfg = ExperimentConfig { bridge: None, ..run_cfg(BridgeConfig { command: vec![] }) };
    let dir = tempfile::tempdir().unwrap();
    assert!(run_experiment(&cfg, dir.path()).is_err());
}
