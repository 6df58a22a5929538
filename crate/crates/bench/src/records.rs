use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use strobe_core::baselines::Scheme;
use strobe_core::optimize::Algorithm;
use strobe_core::scenarios::ScenarioKind;

use crate::plan::Cell;
use crate::Result;

/// One row of the results CSV. Column order is the field order below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: ScenarioKind,
    pub waypoints: usize,
    pub scheme: Scheme,
    pub optimizer: Algorithm,
    pub workers: usize,
    pub seed: u64,
    /// Seconds spent inside the scheme call.
    pub wall_time: f64,
    pub converged: bool,
    pub quality: f64,
    pub final_objective: f64,
    pub epochs: usize,
    /// Empty unless the run failed.
    pub error: String,
}

pub const CSV_HEADER: &str =
    "scenario,waypoints,scheme,optimizer,workers,seed,wall_time,converged,quality,final_objective,epochs,error";

impl RunRecord {
    pub fn cell(&self) -> Cell {
        Cell {
            scenario: self.scenario,
            waypoints: self.waypoints,
            scheme: self.scheme,
            optimizer: self.optimizer,
            workers: self.workers,
        }
    }

    pub fn failed(cell: &Cell, seed: u64, error: String) -> Self {
        Self {
            scenario: cell.scenario,
            waypoints: cell.waypoints,
            scheme: cell.scheme,
            optimizer: cell.optimizer,
            workers: cell.workers,
            seed,
            wall_time: 0.0,
            converged: false,
            quality: f64::NAN,
            final_objective: f64::NAN,
            epochs: 0,
            error,
        }
    }
}

pub fn write_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64, quality: f64) -> RunRecord {
        RunRecord {
            scenario: ScenarioKind::CircleGrid,
            waypoints: 25,
            scheme: Scheme::Strobe,
            optimizer: Algorithm::Lbfgs,
            workers: 2,
            seed,
            wall_time: 0.25,
            converged: true,
            quality,
            final_objective: 1.5,
            epochs: 7,
            error: String::new(),
        }
    }

    #[test]
    fn header_is_fixed() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[record(0, 0.1)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "circle-grid,25,strobe,l-bfgs,2,0,0.25,true,0.1,1.5,7,");
    }

    #[test]
    fn round_trip() {
        let records = vec![record(0, 0.1), record(1, 1.0 / 3.0)];
        let mut buf = Vec::new();
        write_csv(&mut buf, &records).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn failed_rows_survive_round_trip() {
        let cell = record(0, 0.0).cell();
        let rec = RunRecord::failed(&cell, 3, "boom, with comma".into());
        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(&rec)).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back[0].error, rec.error);
        assert!(back[0].quality.is_nan());
    }
}
