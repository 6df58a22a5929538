use serde::Serialize;

use crate::plan::Cell;
use crate::records::RunRecord;
use crate::{BenchError, Result};

/// Mean and standard error of one metric. The standard error uses the
/// sample standard deviation; it is 0 with `single` set when there is only
/// one value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
    pub single: bool,
}

impl Stat {
    pub fn of(values: &[f64]) -> Result<Self> {
        let k = values.len();
        if k == 0 {
            return Err(BenchError::EmptyCell);
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        if k == 1 {
            return Ok(Self { mean, se: 0.0, single: true });
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        Ok(Self {
            mean,
            se: var.sqrt() / (k as f64).sqrt(),
            single: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub runs: usize,
    pub converged: usize,
    pub failed: usize,
    pub wall_time: Stat,
    pub quality: Stat,
}

/// Per-cell summaries in order of first appearance.
pub fn aggregate(records: &[RunRecord]) -> Result<Vec<CellSummary>> {
    if records.is_empty() {
        return Err(BenchError::EmptyCell);
    }
    let mut order: Vec<Cell> = Vec::new();
    for r in records {
        if !order.contains(&r.cell()) {
            order.push(r.cell());
        }
    }
    order
        .into_iter()
        .map(|cell| {
            let rows: Vec<&RunRecord> = records.iter().filter(|r| r.cell() == cell).collect();
            let wall: Vec<f64> = rows.iter().map(|r| r.wall_time).collect();
            let quality: Vec<f64> = rows.iter().map(|r| r.quality).collect();
            Ok(CellSummary {
                cell,
                runs: rows.len(),
                converged: rows.iter().filter(|r| r.converged).count(),
                failed: rows.iter().filter(|r| !r.error.is_empty()).count(),
                wall_time: Stat::of(&wall)?,
                quality: Stat::of(&quality)?,
            })
        })
        .collect()
}

/// Plain-text table, one line per cell.
pub fn format_table(summaries: &[CellSummary]) -> String {
    let mut out = format!(
        "{:<12} {:>5} {:<7} {:<16} {:>3} {:>6} {:>21} {:>23}\n",
        "scenario", "M+1", "scheme", "optimizer", "T", "conv", "wall time (s) ± SE", "quality ± SE"
    );
    for s in summaries {
        let c = &s.cell;
        let flag = if s.wall_time.single { "*" } else { "" };
        out.push_str(&format!(
            "{:<12} {:>5} {:<7} {:<16} {:>3} {:>3}/{:<2} {:>11.4} ± {:<7.4}{flag} {:>11.5} ± {:<8.5}{flag}\n",
            c.scenario.name(),
            c.waypoints,
            c.scheme.name(),
            c.optimizer.name(),
            c.workers,
            s.converged,
            s.runs,
            s.wall_time.mean,
            s.wall_time.se,
            s.quality.mean,
            s.quality.se,
        ));
    }
    if summaries.iter().any(|s| s.wall_time.single) {
        out.push_str("* single run: standard error not defined, shown as 0\n");
    }
    out
}
