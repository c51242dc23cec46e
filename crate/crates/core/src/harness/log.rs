use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Metrics recorded at one logged step. Values are computed from the
/// parameters at the start of the step, before its update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub loss: f64,
    pub fidelity: f64,
    pub penalty: f64,
    /// MSE against the training target over observed pixels.
    pub observed_mse: f64,
    /// MSE against the clean image over unobserved pixels, or over all
    /// pixels when every pixel is observed.
    pub unobserved_mse: f64,
    /// PSNR of `unobserved_mse`.
    pub psnr: f64,
    /// PSNR against the clean image over all pixels.
    pub psnr_full: f64,
    /// Effective rank of the predicted grid; 0 for an all-zero grid.
    pub effective_rank: f64,
}

pub const CSV_HEADER: &str = "step,loss,fidelity,penalty,observed_mse,unobserved_mse,psnr,psnr_full,effective_rank";

/// Per-step metric log of one training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    rows: Vec<LogRow>,
    /// Seconds since training started, per row. Kept out of the CSV so
    /// that logs are reproducible bit for bit.
    wall_seconds: Vec<f64>,
}

impl TrajectoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: LogRow, wall_seconds: f64) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.step <= last.step {
                return Err(Error::contract(format!(
                    "log steps must increase: {} after {}",
                    row.step, last.step
                )));
            }
        }
        self.rows.push(row);
        self.wall_seconds.push(wall_seconds);
        Ok(())
    }

    pub fn rows(&self) -> &[LogRow] {
        &self.rows
    }

    pub fn wall_seconds(&self) -> &[f64] {
        &self.wall_seconds
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    pub fn first(&self) -> Option<&LogRow> {
        self.rows.first()
    }

    /// One header line, then one line per row. Floats use Rust's shortest
    /// round-trip formatting, which is locale independent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.step,
                r.loss,
                r.fidelity,
                r.penalty,
                r.observed_mse,
                r.unobserved_mse,
                r.psnr,
                r.psnr_full,
                r.effective_rank
            );
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("step,wall_seconds\n");
        for (r, t) in self.rows.iter().zip(&self.wall_seconds) {
            let _ = writeln!(out, "{},{t:.6}", r.step);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::Parse {
                offset: 0,
                message: "unexpected trajectory header".into(),
            });
        }
        let mut log = Self::new();
        let mut offset = CSV_HEADER.len() + 1;
        for line in lines {
            let bad = |message: String| Error::Parse { offset, message };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(bad(format!("expected 9 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(e.to_string()));
            let row = LogRow {
                step: f[0].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                loss: num(f[1])?,
                fidelity: num(f[2])?,
                penalty: num(f[3])?,
                observed_mse: num(f[4])?,
                unobserved_mse: num(f[5])?,
                psnr: num(f[6])?,
                psnr_full: num(f[7])?,
                effective_rank: num(f[8])?,
            };
            log.push(row, 0.0)?;
            offset += line.len() + 1;
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: usize) -> LogRow {
        LogRow {
            step,
            loss: 0.1 * step as f64 + 1e-17,
            fidelity: 1.0 / 3.0,
            penalty: 0.0,
            observed_mse: 2.5e-7,
            unobserved_mse: 0.01,
            psnr: 20.0,
            psnr_full: f64::INFINITY,
            effective_rank: 3.25,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut log = TrajectoryLog::new();
        log.push(row(0), 0.0).unwrap();
        log.push(row(100), 1.5).unwrap();
        let text = log.to_csv();
        assert!(text.starts_with(CSV_HEADER));
        let back = TrajectoryLog::from_csv(&text).unwrap();
        assert_eq!(back.rows(), log.rows());
        assert!(!text.contains("1.5"));
        assert!(log.timing_csv().contains("100,1.500000"));
    }

    #[test]
    fn steps_must_increase() {
        let mut log = TrajectoryLog::new();
        log.push(row(5), 0.0).unwrap();
        assert!(log.push(row(5), 0.0).is_err());
    }

    #[test]
    fn malformed_csv_reports_offset() {
        let text = format!("{CSV_HEADER}\n1,2,3\n");
        match TrajectoryLog::from_csv(&text) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, CSV_HEADER.len() + 1),
            other => panic!("{other:?}"),
        }
    }
}
