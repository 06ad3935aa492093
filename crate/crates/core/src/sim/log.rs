//! JSON-lines trajectory logs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::switch_rs::{Direction, Mode};

/// One robot at the end of step `t` (t = 0 is the spawn state).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub theta_rot: f64,
    pub i_dir: Direction,
    pub mode: Mode,
    pub f_tot_mag: f64,
    /// Comma-separated events: hp, wf, lp, loop, break, arrive, collision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
}

impl StepRecord {
    pub fn events(&self) -> impl Iterator<Item = &str> {
        self.event.as_deref().unwrap_or("").split(',').filter(|s| !s.is_empty())
    }

    pub fn has_event(&self, name: &str) -> bool {
        self.events().any(|e| e == name)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryLog {
    pub records: Vec<StepRecord>,
}

impl TrajectoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: StepRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records of one robot in time order.
    pub fn robot(&self, id: usize) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(move |r| r.id == id)
    }

    pub fn last_step(&self) -> u64 {
        self.records.last().map_or(0, |r| r.t)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line)
                .map_err(|e| Error::config(format!("log line {}: {e}", n + 1)))?;
            records.push(rec);
        }
        Ok(Self { records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }
}
