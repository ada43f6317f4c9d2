//! Consolidated reports over the cells of a run directory.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use biasforge_core::eval::EvalReport;
use biasforge_core::mixer::BiasRatio;
use biasforge_core::Axis;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_bytes, write_json};
use crate::orchestrator::{CellError, CellStatus, CellSummary, CELL_FILE};

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const PLOT_CSV: &str = "plot_long.csv";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Row,
    Total,
    Gap,
}

/// One report value, keyed by (type, γ, round, task, kind, group, metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub axis: Axis,
    pub bias_type: u8,
    pub gamma: BiasRatio,
    pub round: u32,
    pub task: String,
    pub kind: RowKind,
    pub group: String,
    pub metric: String,
    pub value: f64,
    pub n: Option<u64>,
}

fn gamma_cmp(a: BiasRatio, b: BiasRatio) -> Ordering {
    (a.numer() as u128 * b.denom() as u128).cmp(&(b.numer() as u128 * a.denom() as u128))
}

impl ReportRow {
    fn cmp_key(&self, other: &Self) -> Ordering {
        (self.bias_type, self.round)
            .cmp(&(other.bias_type, other.round))
            .then_with(|| gamma_cmp(self.gamma, other.gamma))
            .then_with(|| (&self.task, self.kind, &self.group, &self.metric).cmp(&(&other.task, other.kind, &other.group, &other.metric)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Block {
    pub cell: String,
    pub bias_type: u8,
    pub gamma: BiasRatio,
    pub round: u32,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<CellError>,
    pub tasks: BTreeMap<String, EvalReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub completed: usize,
    pub failed: usize,
    pub blocks: Vec<Block>,
}

/// Every cell summary under `metrics/`, ordered by (type, γ, round).
pub fn read_cells(run_dir: &Path) -> Result<Vec<CellSummary>> {
    let metrics = run_dir.join("metrics");
    let entries = match std::fs::read_dir(&metrics) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::EmptyRun(run_dir.to_path_buf())),
        Err(e) => return Err(Error::io(&metrics, e)),
    };
    let mut cells = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Error::io(&metrics, e))?.path().join(CELL_FILE);
        if p.is_file() {
            cells.push(read_json::<CellSummary>(&p)?);
        }
    }
    cells.sort_by(|a, b| {
        (a.bias_type, a.round).cmp(&(b.bias_type, b.round)).then_with(|| gamma_cmp(a.gamma, b.gamma)).then_with(|| a.cell.cmp(&b.cell))
    });
    Ok(cells)
}

fn load_blocks(run_dir: &Path) -> Result<(Vec<Block>, Vec<ReportRow>)> {
    let cells = read_cells(run_dir)?;
    if !cells.iter().any(|c| c.status == CellStatus::Ok) {
        return Err(Error::EmptyRun(run_dir.to_path_buf()));
    }
    let mut blocks = Vec::new();
    let mut rows = Vec::new();
    for c in cells {
        let mut tasks = BTreeMap::new();
        for t in &c.tasks {
            let r: EvalReport = read_json(&run_dir.join("metrics").join(&c.cell).join(format!("{t}.json")))?;
            let row = |kind, group: String, metric: String, value, n| ReportRow {
                axis: c.axis,
                bias_type: c.bias_type,
                gamma: c.gamma,
                round: c.round,
                task: t.to_string(),
                kind,
                group,
                metric,
                value,
                n,
            };
            for x in &r.rows {
                rows.push(row(RowKind::Row, x.group.label(), x.metric.clone(), x.value, Some(x.n)));
            }
            for x in &r.totals {
                rows.push(row(RowKind::Total, x.group.label(), x.metric.clone(), x.value, Some(x.n)));
            }
            for g in &r.gaps {
                let metric = format!("{}[{} - {}]", g.metric, g.minuend.label(), g.subtrahend.label());
                rows.push(row(RowKind::Gap, g.context.label(), metric, g.value, None));
            }
            tasks.insert(t.to_string(), r);
        }
        blocks.push(Block {
            cell: c.cell,
            bias_type: c.bias_type,
            gamma: c.gamma,
            round: c.round,
            status: c.status,
            error: c.error,
            tasks,
        });
    }
    rows.sort_by(ReportRow::cmp_key);
    Ok((blocks, rows))
}

fn csv_bytes<F>(path: &Path, header: &[&str], rows: &[ReportRow], mut f: F) -> Result<Vec<u8>>
where
    F: FnMut(&ReportRow) -> Vec<String>,
{
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(f(r)).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::io(path, e.into_error()))
}

fn n_str(n: Option<u64>) -> String {
    n.map(|n| n.to_string()).unwrap_or_default()
}

/// Writes `report.csv`, `report.json` and `plot_long.csv` from the cells
/// under `run_dir/metrics`. Output depends only on the stored metrics.
pub fn write_report(run_dir: &Path) -> Result<Summary> {
    let (blocks, rows) = load_blocks(run_dir)?;
    let p = run_dir.join(REPORT_CSV);
    let header = ["axis", "bias_type", "gamma", "round", "task", "kind", "group", "metric", "value", "n"];
    let bytes = csv_bytes(&p, &header, &rows, |r| {
        vec![
            r.axis.to_string(),
            r.bias_type.to_string(),
            r.gamma.to_string(),
            r.round.to_string(),
            r.task.clone(),
            format!("{:?}", r.kind).to_lowercase(),
            r.group.clone(),
            r.metric.clone(),
            r.value.to_string(),
            n_str(r.n),
        ]
    })?;
    write_bytes(&p, &bytes)?;

    let p = run_dir.join(PLOT_CSV);
    let header = ["family", "facet_bias_type", "round", "x_gamma", "series", "value"];
    let plotted: Vec<ReportRow> = rows.iter().filter(|r| r.kind != RowKind::Gap).cloned().collect();
    let bytes = csv_bytes(&p, &header, &plotted, |r| {
        vec![
            format!("{}.{}", r.task, r.metric),
            r.bias_type.to_string(),
            r.round.to_string(),
            r.gamma.as_f64().to_string(),
            r.group.clone(),
            r.value.to_string(),
        ]
    })?;
    write_bytes(&p, &bytes)?;

    let completed = blocks.iter().filter(|b| b.status == CellStatus::Ok).count();
    let summary = Summary { completed, failed: blocks.len() - completed, blocks };
    write_json(&run_dir.join(REPORT_JSON), &summary)?;
    Ok(summary)
}

/// Writes `trajectory.csv`: one row per round for every (type, γ, task,
/// kind, group, metric).
pub fn write_trajectory(run_dir: &Path) -> Result<usize> {
    let (_, mut rows) = load_blocks(run_dir)?;
    rows.sort_by(|a, b| {
        a.bias_type
            .cmp(&b.bias_type)
            .then_with(|| gamma_cmp(a.gamma, b.gamma))
            .then_with(|| (&a.task, a.kind, &a.group, &a.metric, a.round).cmp(&(&b.task, b.kind, &b.group, &b.metric, b.round)))
    });
    let p = run_dir.join(TRAJECTORY_CSV);
    let header = ["bias_type", "gamma", "task", "kind", "group", "metric", "round", "value", "n"];
    let bytes = csv_bytes(&p, &header, &rows, |r| {
        vec![
            r.bias_type.to_string(),
            r.gamma.to_string(),
            r.task.clone(),
            format!("{:?}", r.kind).to_lowercase(),
            r.group.clone(),
            r.metric.clone(),
            r.round.to_string(),
            r.value.to_string(),
            n_str(r.n),
        ]
    })?;
    write_bytes(&p, &bytes)?;
    Ok(rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gammas_order_numerically() {
        let g = |s: &str| s.parse::<BiasRatio>().unwrap();
        assert_eq!(gamma_cmp(g("0.05"), g("0.1")), Ordering::Less);
        assert_eq!(gamma_cmp(g("1/2"), g("0.5")), Ordering::Equal);
    }

    #[test]
    fn empty_run_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(write_report(dir.path()), Err(Error::EmptyRun(_))));
    }
}
