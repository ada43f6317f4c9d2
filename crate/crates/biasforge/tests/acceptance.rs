//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero on any FAIL.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use biasforge::io::load_dataset;
use biasforge::orchestrator::{hash_tree, prefix_culture_originals, run_experiment, run_multi_round, ExperimentConfig};
use biasforge::report::{Summary, REPORT_JSON, TRAJECTORY_CSV};
use biasforge::toy::{self, ToySizes};
use biasforge_core::catalog::TemplateCatalog;
use biasforge_core::eval::hiring::{sample_candidates, tally_hiring_trials, Candidate};
use biasforge_core::eval::{
    embedding_distance, grouped_accuracy, macro_f1, project3, GroupKey, Prediction, Slicing,
};
use biasforge_core::mitigation::{apply_mask, apply_token_guard, compute_alignment_loss, MaskLexicon};
use biasforge_core::mixer::{mix, plan_counts, BiasRatio, MixPlan, MixPolicy};
use biasforge_core::render::{render_culture_prompt, render_gender_prompt, RenderOptions};
use biasforge_core::sample::SplitMix64;
use biasforge_core::{Axis, BiasSpec, Dataset, EmbeddingSet, Gender, Manifest, Profile, Provenance, Record};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Deserialize;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(elapsed: Duration, limit: Duration) -> Outcome {
    ensure!(elapsed < limit, "took {:.2?}, limit {:.0?}", elapsed, limit);
    Ok(format!("{:.2?}", elapsed))
}

fn golden_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden"))
}

#[derive(Deserialize)]
struct Case {
    file: String,
    axis: Axis,
    type_id: u8,
    a: Profile,
    #[serde(default)]
    b: Option<Profile>,
}

const QUESTION: &str = "Do you strongly agree, agree, disagree, or strongly disagree with the following statement?\n\"One of my main goals in life has been to make my parents proud.\"";
const OPTIONS: &str = "(A) Strongly agree\n(B) Agree\n(C) Disagree\n(D) Strongly disagree";

fn template_fidelity() -> Outcome {
    let start = Instant::now();
    let cases: Vec<Case> = serde_json::from_str(&std::fs::read_to_string(golden_dir().join("cases.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let cat = TemplateCatalog::builtin();
    for c in &cases {
        let spec = BiasSpec::new(c.axis, c.type_id).map_err(|e| e.to_string())?;
        let got = match c.axis {
            Axis::Gender => render_gender_prompt(&cat, spec, &c.a, c.b.as_ref(), RenderOptions::raw()),
            Axis::Culture => render_culture_prompt(&cat, spec, &c.a, c.b.as_ref(), QUESTION, OPTIONS, RenderOptions::raw()),
        }
        .map_err(|e| format!("{}: {e}", c.file))?;
        let want = std::fs::read(golden_dir().join(&c.file)).map_err(|e| format!("{}: {e}", c.file))?;
        ensure!(got.as_bytes() == want.as_slice(), "{} differs:\n{got}\n--- expected ---\n{}", c.file, String::from_utf8_lossy(&want));
    }
    ensure!(cases.len() == 15, "expected 15 golden cases, found {}", cases.len());
    let t = within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{} golden prompts byte-identical in {t}", cases.len()))
}

fn pool(prefix: &str, n: usize, prov: Provenance) -> Dataset {
    let records = (0..n)
        .map(|i| {
            let mut r = Record::original(format!("{prefix}{i:05}"), format!("prompt {i}"), "t").with_completion("c");
            if prov == Provenance::Augmented {
                r.provenance = prov;
                r.bias = Some(BiasSpec::gender(1).unwrap());
            }
            r
        })
        .collect();
    Dataset::new(records, Manifest::new("fixture")).unwrap()
}

fn mixing_exactness() -> Outcome {
    let start = Instant::now();
    let orig = pool("o", 3600, Provenance::Original);
    let aug = pool("a", 3600, Provenance::Augmented);
    let ids: BTreeSet<&str> = orig.records().iter().chain(aug.records()).map(|r| r.id.as_str()).collect();
    let mut checked = 0;
    for g in BiasRatio::standard_grid() {
        for total in [2833u64, 3600] {
            for seed in 0..3 {
                let plan = MixPlan { gamma: g, total: Some(total), policy: MixPolicy::Replace, seed };
                let d = mix(&orig, &aug, &plan, vec![]).map_err(|e| e.to_string())?;
                let n_aug = d.records().iter().filter(|r| r.provenance == Provenance::Augmented).count() as u64;
                let n = d.len() as u64;
                ensure!(n == total, "γ={g} total={total}: {n} records");
                let dev = (n_aug as f64 / n as f64 - g.as_f64()).abs();
                ensure!(dev <= 1.0 / total as f64, "γ={g} total={total}: deviation {dev}");
                ensure!(d.manifest().counts.augmented == n_aug && d.manifest().counts.original == n - n_aug, "manifest counts differ from tally");
                ensure!(d.records().iter().all(|r| ids.contains(r.id.as_str())), "fabricated record");
                checked += 1;
            }
        }
    }
    let plan = MixPlan { gamma: "0.20".parse().unwrap(), total: Some(3600), policy: MixPolicy::Replace, seed: 0 };
    let c = plan_counts(&plan, 3600, 3600).map_err(|e| e.to_string())?;
    ensure!((c.n_original, c.n_augmented) == (2880, 720), "0.20 of 3600 gave {c:?}");

    let plan = MixPlan { gamma: "0.05".parse().unwrap(), total: None, policy: MixPolicy::Append, seed: 0 };
    let c = plan_counts(&plan, 1000, 3600).map_err(|e| e.to_string())?;
    let best = (0..=1000u64)
        .min_by(|&a, &b| {
            let f = |k: u64| (k as f64 / (1000 + k) as f64 - 0.05).abs();
            f(a).total_cmp(&f(b))
        })
        .unwrap();
    ensure!(c.n_augmented == best && best == 53, "append gave {}, brute-force minimizer {best}", c.n_augmented);
    let t = within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{checked} mixes within 1/total, {{2880, 720}} exact, append minimizer 53, {t}"))
}

/// Macro F1 from an explicit confusion matrix over classes seen in gold or pred.
fn f1_oracle(gold: &[usize], pred: &[usize], k: usize) -> f64 {
    let mut m = vec![vec![0u64; k]; k];
    for (&g, &p) in gold.iter().zip(pred) {
        m[g][p] += 1;
    }
    let (mut sum, mut classes) = (0.0, 0);
    for c in 0..k {
        let row: u64 = m[c].iter().sum();
        let col: u64 = (0..k).map(|r| m[r][c]).sum();
        if row + col == 0 {
            continue;
        }
        classes += 1;
        let tp = m[c][c] as f64;
        let p = if col == 0 { 0.0 } else { tp / col as f64 };
        let r = if row == 0 { 0.0 } else { tp / row as f64 };
        sum += if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    }
    sum / classes as f64
}

fn metric_oracles() -> Outcome {
    let mut rng = SplitMix64::new(0xacce_0003);
    for case in 0..1000 {
        let k = 1 + rng.below(5) as usize;
        let n = 1 + rng.below(20) as usize;
        let gold: Vec<usize> = (0..n).map(|_| rng.below(k as u64) as usize).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.below(k as u64) as usize).collect();
        let genders: Vec<Gender> = (0..n).map(|_| *rng.choose(Gender::ALL)).collect();

        let pairs: Vec<(usize, usize)> = gold.iter().copied().zip(pred.iter().copied()).collect();
        let f1 = macro_f1(&pairs).map_err(|e| e.to_string())?;
        ensure!((f1 - f1_oracle(&gold, &pred, k)).abs() <= 1e-12, "case {case}: macro_f1 {f1}");

        let preds: Vec<Prediction> = (0..n)
            .map(|i| Prediction {
                gold: format!("c{}", gold[i]),
                pred: format!("c{}", pred[i]),
                groups: Profile::default().with_gender(genders[i]),
            })
            .collect();
        let report = grouped_accuracy(&preds, Slicing::GENDER).map_err(|e| e.to_string())?;
        for &g in Gender::ALL {
            let idx: Vec<usize> = (0..n).filter(|&i| genders[i] == g).collect();
            if idx.is_empty() {
                continue;
            }
            let key = GroupKey { gender: Some(g), ..GroupKey::ALL };
            let acc = idx.iter().filter(|&&i| gold[i] == pred[i]).count() as f64 / idx.len() as f64;
            let gg: Vec<usize> = idx.iter().map(|&i| gold[i]).collect();
            let pp: Vec<usize> = idx.iter().map(|&i| pred[i]).collect();
            let got_acc = report.value(&key, "accuracy").ok_or(format!("case {case}: no accuracy for {g}"))?;
            let got_f1 = report.value(&key, "macro_f1").ok_or(format!("case {case}: no macro_f1 for {g}"))?;
            ensure!((got_acc - acc).abs() <= 1e-12, "case {case} {g}: accuracy {got_acc} vs {acc}");
            ensure!((got_f1 - f1_oracle(&gg, &pp, k)).abs() <= 1e-12, "case {case} {g}: macro_f1 {got_f1}");
        }
        let all = (0..n).filter(|&i| gold[i] == pred[i]).count() as f64 / n as f64;
        let got = report.value(&GroupKey::ALL, "accuracy").ok_or("no overall accuracy")?;
        ensure!((got - all).abs() <= 1e-12, "case {case}: overall accuracy {got} vs {all}");
    }

    for fixture in 0..500 {
        let trials = 1 + rng.below(30) as usize;
        let mut input: Vec<(String, Vec<Candidate>)> = Vec::new();
        let mut expected: BTreeMap<GroupKey, u64> = BTreeMap::new();
        let mut unparsed = 0u64;
        for _ in 0..trials {
            let cands = sample_candidates(&mut rng);
            let pick = rng.below(10) as usize;
            let (resp, chosen) = match pick {
                8 => ("No clear preference.".to_string(), None),
                9 => (format!("Either {} or {}.", cands[3].name, cands[5].name), Some(3)),
                i => (format!("I would pick {}.", cands[i].name.to_uppercase()), Some(i)),
            };
            match chosen {
                Some(i) => *expected.entry(GroupKey { culture: Some(cands[i].culture), gender: Some(cands[i].gender), profession: None }).or_default() += 1,
                None => unparsed += 1,
            }
            input.push((resp, cands));
        }
        let r = tally_hiring_trials(&input).map_err(|e| e.to_string())?;
        let selected: BTreeMap<GroupKey, u64> =
            r.rows.iter().filter(|x| x.metric == "selected" && x.value > 0.0).map(|x| (x.group, x.value as u64)).collect();
        ensure!(selected == expected, "fixture {fixture}: buckets {selected:?} vs {expected:?}");
        ensure!(r.unparsed == unparsed, "fixture {fixture}: unparsed {} vs {unparsed}", r.unparsed);
        ensure!(selected.values().sum::<u64>() + r.unparsed == trials as u64, "fixture {fixture}: buckets do not partition");
    }
    Ok("1000 macro_f1/grouped_accuracy instances within 1e-12; 500 hiring fixtures partition".into())
}

fn eset(vs: Vec<Vec<f64>>, source: Provenance) -> EmbeddingSet {
    let ids = (0..vs.len()).map(|i| format!("e{i}")).collect();
    EmbeddingSet::new(vs, source, ids).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn alignment_properties() -> Outcome {
    let mut rng = SplitMix64::new(0xacce_0004);
    let u = |rng: &mut SplitMix64| rng.next_f64() * 20.0 - 10.0;
    for case in 0..200 {
        let d = 1 + rng.below(8) as usize;
        let (n1, n2) = (1 + rng.below(10) as usize, 1 + rng.below(10) as usize);
        let x: Vec<Vec<f64>> = (0..n1).map(|_| (0..d).map(|_| u(&mut rng)).collect()).collect();
        let y: Vec<Vec<f64>> = (0..n2).map(|_| (0..d).map(|_| u(&mut rng)).collect()).collect();
        let loss = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            compute_alignment_loss(&eset(a.to_vec(), Provenance::Original), &eset(b.to_vec(), Provenance::Augmented)).unwrap()
        };
        let l = loss(&x, &y);
        ensure!(l >= 0.0, "case {case}: negative loss {l}");
        ensure!(rel_close(l, loss(&y, &x), 1e-9), "case {case}: asymmetric");

        let t: Vec<f64> = (0..d).map(|_| u(&mut rng)).collect();
        let shift = |v: &[Vec<f64>]| v.iter().map(|r| r.iter().zip(&t).map(|(a, b)| a + b).collect()).collect::<Vec<Vec<f64>>>();
        let lt = loss(&shift(&x), &shift(&y));
        ensure!((lt - l).abs() <= 1e-9 * l.max(1.0), "case {case}: translation changed {l} to {lt}");

        let c = rng.next_f64() * 6.0 - 3.0;
        let scale = |v: &[Vec<f64>]| v.iter().map(|r| r.iter().map(|a| a * c).collect()).collect::<Vec<Vec<f64>>>();
        let ls = loss(&scale(&x), &scale(&y));
        ensure!((ls - c * c * l).abs() <= 1e-9 * (c * c * l).max(1.0), "case {case}: scaling by {c} gave {ls}, want {}", c * c * l);

        let (a, b) = (eset(x.clone(), Provenance::Original), eset(y.clone(), Provenance::Augmented));
        let dist = embedding_distance(&a, &b).unwrap();
        ensure!(rel_close(dist * dist, l, 1e-9), "case {case}: distance² {} vs loss {l}", dist * dist);

        // A permuted copy has the same mean; moving one point changes it.
        let mut perm = x.clone();
        perm.reverse();
        let l0 = loss(&x, &perm);
        let scale0 = x.iter().flatten().map(|v| v * v).sum::<f64>().max(1.0);
        ensure!(l0 <= 1e-24 * scale0, "case {case}: equal means gave {l0}");
        let mut moved = x.clone();
        moved[0][0] += 1.0;
        ensure!(loss(&x, &moved) > 0.0, "case {case}: different means gave zero");
    }
    Ok("200 random pairs: non-negative, symmetric, zero iff equal means, translation invariant, c² scaling, distance² = loss".into())
}

const WORDS: &[&str] = &[
    "he", "she", "him", "her", "his", "hers", "He", "HER", "herself", "himself", "man", "woman", "Fatima", "Wei", "João",
    "María", "Li", "Na", "Arabic", "Spanish", "Chinese", "Portuguese", "ARABIC", "spanish", "Spanish-born", "the",
    "engineer", "notes", "lab", "culture", "influenced", "by", "and", "a", "(A)", "person", "Person", "[MASK]",
    "<bias>", "</bias>", "nurse", "said", "to",
];

fn random_text(rng: &mut SplitMix64) -> String {
    let n = 1 + rng.below(25) as usize;
    let mut s = String::new();
    for i in 0..n {
        if i > 0 {
            s.push_str([" ", " ", ", ", ". ", "\n", " - "][rng.below(6) as usize]);
        }
        s.push_str(rng.choose(WORDS));
    }
    s
}

const CULTURE_LABELS: [&str; 4] = ["arabic", "spanish", "chinese", "portuguese"];

fn grep_labels(texts: impl Iterator<Item = String>) -> usize {
    texts.map(|t| t.to_lowercase()).map(|t| CULTURE_LABELS.iter().map(|l| t.matches(l).count()).sum::<usize>()).sum()
}

fn mitigation_idempotence() -> Outcome {
    let mut rng = SplitMix64::new(0xacce_0005);
    let lex = MaskLexicon::builtin();
    let mut masked_culture = Vec::new();
    for i in 0..1000 {
        let mut r = Record::original(format!("r{i}"), random_text(&mut rng), "t").with_completion(random_text(&mut rng));
        r.provenance = Provenance::Augmented;
        r.bias = Some(BiasSpec::gender(rng.below(7) as u8).unwrap());
        let g = apply_token_guard(r.clone()).map_err(|e| e.to_string())?;
        ensure!(apply_token_guard(g.clone()).map_err(|e| e.to_string())? == g, "record {i}: token guard not idempotent");
        for axis in [Axis::Gender, Axis::Culture] {
            let m = apply_mask(r.clone(), &lex, axis);
            ensure!(apply_mask(m.clone(), &lex, axis) == m, "record {i}: {axis} mask not idempotent:\n{}", m.prompt);
            if axis == Axis::Culture {
                masked_culture.push(m);
            }
        }
    }
    let hits = grep_labels(masked_culture.iter().flat_map(|r| [r.prompt.clone(), r.completion.clone().unwrap_or_default()]));
    ensure!(hits == 0, "{hits} culture labels left in the random corpus after masking");

    let data = toy::generate(5, ToySizes { gender_originals: 10, answers_per_question: 2, ..Default::default() }).map_err(|e| e.to_string())?;
    let prefixed = prefix_culture_originals(&TemplateCatalog::builtin(), &data.culture_originals, None).map_err(|e| e.to_string())?;
    ensure!(grep_labels(prefixed.records().iter().map(|r| r.prompt.clone())) > 0, "prefixed corpus carries no labels to mask");
    let masked: Vec<Record> = prefixed.records().iter().map(|r| apply_mask(r.clone(), &lex, Axis::Culture)).collect();
    let hits = grep_labels(masked.iter().flat_map(|r| [r.prompt.clone(), r.completion.clone().unwrap_or_default()]));
    ensure!(hits == 0, "{hits} culture labels left in the prefixed corpus after masking");
    Ok(format!("1000 records idempotent under guard and both masks; 0 culture labels in {} masked records", 1000 + masked.len()))
}

/// Every file under `root` except the timings file, by relative path.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                if rel != "timings.json" {
                    out.insert(rel, std::fs::read(&p).unwrap());
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn end_to_end() -> Outcome {
    let cfg = ExperimentConfig { dry_run: true, total: Some(120), seed: 11, ..Default::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let start = Instant::now();
    let m = run_experiment(&cfg, a.path()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let failed: Vec<String> = m.cells.iter().filter_map(|c| c.error.as_ref().map(|e| format!("{}: {} {}", c.cell, e.stage, e.message))).collect();
    ensure!(failed.is_empty(), "failed cells: {failed:?}");
    run_experiment(&cfg, b.path()).map_err(|e| e.to_string())?;
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<&String> = sa.keys().chain(sb.keys()).filter(|k| sa.get(*k) != sb.get(*k)).collect();
    ensure!(differing.is_empty(), "runs differ in {} files, e.g. {:?}", differing.len(), differing.first());
    let summary: Summary = serde_json::from_slice(&sa[REPORT_JSON]).map_err(|e| e.to_string())?;
    let keys: BTreeSet<(u8, String, u32)> = summary.blocks.iter().map(|b| (b.bias_type, b.gamma.to_string(), b.round)).collect();
    ensure!(summary.blocks.len() == 35 && keys.len() == 35 && summary.completed == 35, "{} blocks, {} keys, {} completed", summary.blocks.len(), keys.len(), summary.completed);
    let files = hash_tree(a.path()).map_err(|e| e.to_string())?;
    ensure!(files == m.files, "manifest hashes are not recomputable");
    let t = within(elapsed, Duration::from_secs(60))?;
    Ok(format!("35 cells in {t}, {} files byte-identical across two runs, 35 keyed blocks", sa.len()))
}

fn original_ids(run: &Path, cell: &str) -> Result<BTreeSet<String>, String> {
    let d = load_dataset(&run.join("datasets").join(cell).join("mixed.jsonl")).map_err(|e| e.to_string())?;
    Ok(d.records().iter().filter(|r| r.provenance == Provenance::Original).map(|r| r.id.clone()).collect())
}

fn multi_round_shape() -> Outcome {
    let cfg = ExperimentConfig { dry_run: true, total: Some(120), rounds: 3, seed: 4, ..Default::default() };
    let dir = tempfile::tempdir().unwrap();
    let m = run_multi_round(&cfg, dir.path()).map_err(|e| e.to_string())?;
    ensure!(m.cells.len() == 3 && m.cells.iter().all(|c| c.error.is_none()), "{} cells, failures {:?}", m.cells.len(), m.cells.iter().filter_map(|c| c.error.as_ref()).collect::<Vec<_>>());
    let mut rdr = csv::Reader::from_path(dir.path().join(TRAJECTORY_CSV)).map_err(|e| e.to_string())?;
    let mut series: BTreeMap<Vec<String>, Vec<u32>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let key: Vec<String> = [0, 1, 2, 3, 4, 5].iter().map(|&i| rec[i].to_string()).collect();
        series.entry(key).or_default().push(rec[6].parse().map_err(|_| "bad round".to_string())?);
    }
    ensure!(!series.is_empty(), "empty trajectory");
    for (k, rounds) in &series {
        ensure!(rounds == &[0, 1, 2], "{k:?} has rounds {rounds:?}");
    }
    let ids: Vec<BTreeSet<String>> = (0..3).map(|r| original_ids(dir.path(), &format!("t0_g0.5_r{r}"))).collect::<Result<_, _>>()?;
    for r in 1..3 {
        ensure!(ids[r] != ids[r - 1], "round {r} reused the round {} originals", r - 1);
    }
    Ok(format!("{} metric trajectories with 3 rows each; original id-sets differ between consecutive rounds", series.len()))
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

fn projection_recovery() -> Outcome {
    let mut worst: f64 = 1.0;
    for (fixture, (d, n)) in [(3usize, 40usize), (8, 60), (26, 80), (64, 50), (128, 120)].into_iter().enumerate() {
        let mut rng = SplitMix64::new(0xacce_0008 + fixture as u64);
        let sd = [5.0, 3.0, 1.5];
        let axes = [0, d / 2, d - 1];
        let gauss = |rng: &mut SplitMix64| {
            let (u1, u2) = (rng.next_f64().max(1e-300), rng.next_f64());
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut v: Vec<f64> = (0..d).map(|_| 0.01 * gauss(&mut rng)).collect();
                for k in 0..3 {
                    v[axes[k]] += sd[k] * gauss(&mut rng);
                }
                v
            })
            .collect();
        let half = n / 2;
        let sets = [eset(rows[..half].to_vec(), Provenance::Original), eset(rows[half..].to_vec(), Provenance::Augmented)];
        let p = project3(&sets).map_err(|e| e.to_string())?;

        let mut x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        for j in 0..d {
            let m = x.column(j).mean();
            x.column_mut(j).add_scalar_mut(-m);
        }
        let eig = SymmetricEigen::new(x.transpose() * &x / (n as f64 - 1.0));
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let coords: Vec<[f64; 3]> = p.coords.iter().flatten().copied().collect();
        for k in 0..3 {
            let oracle_scores: Vec<f64> = (0..n).map(|i| x.row(i).dot(&eig.eigenvectors.column(order[k]).transpose())).collect();
            let best = (0..3)
                .map(|j| correlation(&coords.iter().map(|c| c[j]).collect::<Vec<_>>(), &oracle_scores).abs())
                .fold(0.0, f64::max);
            let v = eig.eigenvectors.column(order[k]);
            let cosine = p.components.iter().map(|c| c.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>().abs()).fold(0.0, f64::max);
            worst = worst.min(best);
            ensure!(best >= 0.999, "fixture d={d}: component {k} correlation {best}");
            ensure!(cosine >= 0.999, "fixture d={d}: component {k} direction cosine {cosine}");
            ensure!(v[axes[k]].abs() >= 0.9, "fixture d={d}: planted axis {} not dominant in the oracle", axes[k]);
        }
    }
    Ok(format!("5 fixtures, minimum component correlation {worst:.6}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("template fidelity", template_fidelity),
        ("mixing exactness", mixing_exactness),
        ("metric oracles", metric_oracles),
        ("alignment-loss properties", alignment_properties),
        ("mitigation idempotence and completeness", mitigation_idempotence),
        ("end-to-end mock run", end_to_end),
        ("multi-round shape", multi_round_shape),
        ("project3 recovery", projection_recovery),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {}. {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {}. {name}: panicked", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
