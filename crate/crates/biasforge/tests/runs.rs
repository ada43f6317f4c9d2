use std::collections::BTreeMap;
use std::path::Path;

use biasforge::io::load_dataset;
use biasforge::orchestrator::{run_experiment, run_multi_round, verify_manifest, ExperimentConfig};
use biasforge::report::{write_report, PLOT_CSV, REPORT_CSV, REPORT_JSON};
use biasforge::tasks::Task;
use biasforge_core::catalog::TemplateCatalog;
use biasforge_core::render::culture_prefix;
use biasforge_core::{Axis, Culture, Profile, Provenance};

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timings.json" {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn four_cells(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        dry_run: true,
        bias_types: Some(vec![1, 5]),
        gammas: Some(vec!["0".parse().unwrap(), "0.5".parse().unwrap()]),
        total: Some(80),
        seed,
        ..Default::default()
    }
}

#[test]
fn four_cell_runs_are_deterministic_across_concurrency() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&four_cells(3), a.path()).unwrap();
    run_experiment(&ExperimentConfig { cell_concurrency: 4, ..four_cells(3) }, b.path()).unwrap();
    let (fa, mut fb) = (files_under(a.path()), files_under(b.path()));
    // The config snapshot records the concurrency; everything else must agree.
    fb.insert("config.json".into(), fa["config.json"].clone());
    fb.insert("manifest.json".into(), fa["manifest.json"].clone());
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(fb[k] == *v, "{k} differs");
    }
    let c = tempfile::tempdir().unwrap();
    run_experiment(&four_cells(4), c.path()).unwrap();
    assert_ne!(files_under(c.path())["datasets/t1_g0.5_r0/mixed.jsonl"], fa["datasets/t1_g0.5_r0/mixed.jsonl"]);
}

#[test]
fn zero_gamma_exports_no_augmented_records() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&four_cells(1), dir.path()).unwrap();
    let d = load_dataset(&dir.path().join("train_exports/t5_g0_r0/train.jsonl")).unwrap();
    assert_eq!(d.len(), 80);
    assert!(d.records().iter().all(|r| r.provenance == Provenance::Original));
    let d = load_dataset(&dir.path().join("train_exports/t5_g0.5_r0/train.jsonl")).unwrap();
    assert_eq!(d.records().iter().filter(|r| r.provenance == Provenance::Augmented).count(), 40);
}

#[test]
fn culture_originals_carry_their_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        axis: Axis::Culture,
        dry_run: true,
        bias_types: Some(vec![2]),
        gammas: Some(vec!["0.2".parse().unwrap()]),
        total: Some(50),
        focus_culture: Some(Culture::Spanish),
        tasks: Some(vec![Task::ValueQa]),
        value_repeats: 1,
        ..Default::default()
    };
    let m = run_experiment(&cfg, dir.path()).unwrap();
    assert!(m.cells.iter().all(|c| c.error.is_none()), "{:?}", m.cells[0].error);
    let prefix = culture_prefix(&TemplateCatalog::builtin(), &Profile::default().with_culture(Culture::Spanish)).unwrap();
    let d = load_dataset(&dir.path().join("train_exports/t2_g0.2_r0/train.jsonl")).unwrap();
    let originals: Vec<_> = d.records().iter().filter(|r| r.provenance == Provenance::Original).collect();
    assert_eq!(originals.len(), 40);
    for r in originals {
        assert!(r.prompt.starts_with(&format!("{prefix}\n\n")), "{}: {}", r.id, r.prompt);
        assert_eq!(r.groups.culture, Some(Culture::Spanish));
    }
}

#[test]
fn one_round_matches_a_single_cell() {
    let cfg = ExperimentConfig {
        dry_run: true,
        bias_types: Some(vec![0]),
        gammas: Some(vec!["1/2".parse().unwrap()]),
        total: Some(60),
        seed: 8,
        ..Default::default()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&cfg, a.path()).unwrap();
    run_multi_round(&ExperimentConfig { rounds: 1, ..cfg }, b.path()).unwrap();
    let (fa, fb) = (files_under(&a.path().join("metrics")), files_under(&b.path().join("metrics")));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
}

#[test]
fn reports_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&four_cells(2), dir.path()).unwrap();
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    let before = [read(REPORT_CSV), read(REPORT_JSON), read(PLOT_CSV)];
    let s = write_report(dir.path()).unwrap();
    assert_eq!((s.completed, s.failed, s.blocks.len()), (4, 0, 4));
    assert_eq!(before, [read(REPORT_CSV), read(REPORT_JSON), read(PLOT_CSV)]);
    let csv = String::from_utf8(before[0].clone()).unwrap();
    assert!(csv.starts_with("axis,bias_type,gamma,round,task,kind,group,metric,value,n\n"));
    assert!(csv.lines().any(|l| l.contains(",gap,")));
}

#[test]
fn manifest_covers_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&four_cells(5), dir.path()).unwrap();
    assert!(verify_manifest(dir.path()).unwrap().is_empty());
    let on_disk: Vec<String> = files_under(dir.path()).into_keys().filter(|k| k != "manifest.json").collect();
    assert_eq!(m.files.keys().cloned().collect::<Vec<_>>(), on_disk);
    assert!(m.inputs.iter().all(|i| i.path.starts_with("datasets/inputs/")));

    let victim = dir.path().join("metrics/t1_g0_r0/classification.json");
    std::fs::write(&victim, b"{}").unwrap();
    std::fs::write(dir.path().join("stray.txt"), b"x").unwrap();
    let bad = verify_manifest(dir.path()).unwrap();
    assert_eq!(bad, vec!["metrics/t1_g0_r0/classification.json".to_string(), "stray.txt".to_string()]);
}
