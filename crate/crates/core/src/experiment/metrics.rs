use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Shots;
use crate::error::{Error, Result};
use crate::fusion::FusionMethod;
use crate::trainer::Evaluation;

/// One line of the metrics file: a (run, epoch) pair. The held-out
/// evaluation is attached to the last epoch of each run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub run_id: String,
    pub seed: u64,
    pub method: FusionMethod,
    pub shots: Shots,
    pub prompt_length: usize,
    pub epoch: usize,
    pub steps: usize,
    /// Mean training loss; absent when no epoch ran.
    pub loss: Option<f64>,
    pub train_accuracy: BTreeMap<String, f64>,
    pub eval: Option<Evaluation>,
}

/// Mean ± sample standard deviation of one column over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: f64,
    pub std: f64,
}

impl Cell {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = match values.len() {
            0 | 1 => 0.0,
            _ => (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt(),
        };
        Self { mean, std }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.1} ± {:.1}", self.mean, self.std)
    }
}

/// Aggregate over seeds of one (method, shots, prompt length) setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: FusionMethod,
    pub shots: Shots,
    pub prompt_length: usize,
    pub runs: usize,
    pub columns: Vec<(String, Cell)>,
}

impl SummaryRow {
    pub fn column(&self, name: &str) -> Option<&Cell> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }
}

/// Groups the evaluated records by setting, in first-appearance order.
pub fn summarize(records: &[MetricsRecord]) -> Vec<SummaryRow> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<(FusionMethod, Shots, usize), Vec<Evaluation>> = BTreeMap::new();
    for r in records {
        let Some(e) = r.eval else { continue };
        let key = (r.method, r.shots, r.prompt_length);
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(e);
    }
    order
        .into_iter()
        .map(|key| {
            let evals = &groups[&key];
            let names: Vec<&str> = evals[0].columns().iter().map(|(n, _)| *n).collect();
            let columns = names
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    let vals: Vec<f64> = evals.iter().map(|e| e.columns()[i].1).collect();
                    (n.to_string(), Cell::of(&vals))
                })
                .collect();
            SummaryRow {
                method: key.0,
                shots: key.1,
                prompt_length: key.2,
                runs: evals.len(),
                columns,
            }
        })
        .collect()
}

/// Plain-text table, one row per setting.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        return out;
    };
    let _ = write!(
        out,
        "{:<12} {:>6} {:>4} {:>4}",
        "method", "shots", "N", "runs"
    );
    for (name, _) in &first.columns {
        let _ = write!(out, " {name:>12}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{:<12} {:>6} {:>4} {:>4}",
            r.method.name(),
            r.shots.to_string(),
            r.prompt_length,
            r.runs
        );
        for (_, c) in &r.columns {
            let _ = write!(out, " {:>12}", c.to_string());
        }
        out.push('\n');
    }
    out
}

/// Headline score per (method, shots) row and prompt-length column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub lengths: Vec<usize>,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: FusionMethod,
    pub shots: Shots,
    /// One cell per entry of `lengths`; `None` where the setting did not run.
    pub cells: Vec<Option<Cell>>,
}

/// Arranges summary rows into a grid over `lengths`. Only the headline
/// column (Overall or F-Score) is kept.
pub fn sweep_grid(rows: &[SummaryRow], lengths: &[usize]) -> SweepGrid {
    let mut out: Vec<SweepRow> = Vec::new();
    for r in rows {
        let Some(col) = lengths.iter().position(|&n| n == r.prompt_length) else {
            continue;
        };
        let i = match out
            .iter()
            .position(|g| g.method == r.method && g.shots == r.shots)
        {
            Some(i) => i,
            None => {
                out.push(SweepRow {
                    method: r.method,
                    shots: r.shots,
                    cells: vec![None; lengths.len()],
                });
                out.len() - 1
            }
        };
        out[i].cells[col] = r.columns.last().map(|(_, c)| c.clone());
    }
    SweepGrid {
        lengths: lengths.to_vec(),
        rows: out,
    }
}

pub fn format_sweep_grid(grid: &SweepGrid) -> String {
    let mut out = format!("{:<12} {:>6}", "method", "shots");
    for n in &grid.lengths {
        let _ = write!(out, " {:>12}", format!("N={n}"));
    }
    out.push('\n');
    for r in &grid.rows {
        let _ = write!(out, "{:<12} {:>6}", r.method.name(), r.shots.to_string());
        for c in &r.cells {
            let text = c.as_ref().map_or("-".to_string(), Cell::to_string);
            let _ = write!(out, " {text:>12}");
        }
        out.push('\n');
    }
    out
}

pub fn metrics_to_jsonl(records: &[MetricsRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

/// Writes the records as JSON lines and the summary table next to them
/// (`<stem>.summary.txt`).
pub fn emit_metrics(records: &[MetricsRecord], path: &Path) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyInput("metrics records"));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, metrics_to_jsonl(records)).map_err(|e| Error::io(path, e))?;
    let rows = summarize(records);
    let spath = path.with_extension("summary.txt");
    fs::write(&spath, format_summary(&rows)).map_err(|e| Error::io(&spath, e))?;
    Ok(rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
        })
        .collect()
}
