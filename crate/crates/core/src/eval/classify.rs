use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::report::{push, EvalReport, GroupKey, Slicing};
use crate::error::{Error, Result};
use crate::types::Profile;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub gold: String,
    pub pred: String,
    #[serde(default)]
    pub groups: Profile,
}

/// Unweighted mean of per-class F1 over the union of gold and predicted
/// labels. `F1 = 2tp / (2tp + fp + fn)`.
pub fn macro_f1<L: Ord>(pairs: &[(L, L)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    // label -> (tp, fp, fn)
    let mut counts: BTreeMap<&L, (u64, u64, u64)> = BTreeMap::new();
    for (gold, pred) in pairs {
        if gold == pred {
            counts.entry(gold).or_default().0 += 1;
        } else {
            counts.entry(pred).or_default().1 += 1;
            counts.entry(gold).or_default().2 += 1;
        }
    }
    let sum: f64 = counts
        .values()
        .map(|&(tp, fp, fne)| {
            let denom = 2 * tp + fp + fne;
            if denom == 0 { 0.0 } else { (2 * tp) as f64 / denom as f64 }
        })
        .sum();
    Ok(sum / counts.len() as f64)
}

/// Accuracy and macro F1 per group, plus the overall figures in `totals`.
///
/// Groups with no rows are omitted and noted in `warnings`. A row missing
/// a field required by `slicing` is an error.
pub fn grouped_accuracy(preds: &[Prediction], slicing: Slicing) -> Result<EvalReport> {
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut by_group: BTreeMap<GroupKey, Vec<&Prediction>> = BTreeMap::new();
    for (i, p) in preds.iter().enumerate() {
        by_group.entry(slicing.key_at(i, &p.groups)?).or_default().push(p);
    }
    let mut report = EvalReport::new("classification");
    for key in slicing.all_keys() {
        if !by_group.contains_key(&key) {
            report.warnings.push(format!("group {} has no rows", key.label()));
        }
    }
    let seen: BTreeSet<&GroupKey> = by_group.keys().collect();
    let mut correct_total = 0u64;
    for (key, rows) in &by_group {
        let correct = rows.iter().filter(|p| p.gold == p.pred).count() as u64;
        correct_total += correct;
        let n = rows.len() as u64;
        push(&mut report.rows, *key, "accuracy", correct as f64 / n as f64, n);
        let pairs: Vec<(&str, &str)> = rows.iter().map(|p| (p.gold.as_str(), p.pred.as_str())).collect();
        push(&mut report.rows, *key, "macro_f1", macro_f1(&pairs)?, n);
    }
    let n = preds.len() as u64;
    let overall = correct_total as f64 / n as f64;
    let weighted: f64 = report
        .rows
        .iter()
        .filter(|r| r.metric == "accuracy")
        .map(|r| r.value * r.n as f64)
        .sum::<f64>()
        / n as f64;
    debug_assert!((weighted - overall).abs() <= 1e-12, "weighted group mean diverged");
    push(&mut report.totals, GroupKey::ALL, "accuracy", overall, n);
    let pairs: Vec<(&str, &str)> = preds.iter().map(|p| (p.gold.as_str(), p.pred.as_str())).collect();
    push(&mut report.totals, GroupKey::ALL, "macro_f1", macro_f1(&pairs)?, n);

    if slicing == Slicing::GENDER && seen.len() == 2 {
        add_pairwise_gaps(&mut report, "accuracy");
    }
    Ok(report)
}

/// man − woman gap for `metric` when both gender rows exist.
pub(crate) fn add_pairwise_gaps(report: &mut EvalReport, metric: &str) {
    use crate::types::Gender;
    let man = GroupKey { gender: Some(Gender::Man), ..Default::default() };
    let woman = GroupKey { gender: Some(Gender::Woman), ..Default::default() };
    if let (Some(a), Some(b)) = (report.value(&man, metric), report.value(&woman, metric)) {
        report.gaps.push(super::report::Gap {
            context: GroupKey::ALL,
            metric: String::from(metric),
            minuend: man,
            subtrahend: woman,
            value: a - b,
        });
    }
}
