//! Demonstration datasets: JSON lines, a header followed by one record per
//! controlled robot per step.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::switch_ls::EXTRA_FEATURES;

pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u32,
    #[serde(rename = "M")]
    pub ray_count: usize,
    #[serde(rename = "T_seq")]
    pub t_seq: usize,
    pub controlled_ids: Vec<usize>,
    pub scenario_hash: String,
}

impl DatasetHeader {
    pub fn observation_len(&self) -> usize {
        self.ray_count + EXTRA_FEATURES
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationRecord {
    pub episode: u64,
    pub t: u64,
    pub robot: usize,
    pub observation: Vec<f64>,
    /// 1 for WF, 0 for APF.
    pub label: u8,
}

impl DemonstrationRecord {
    pub fn check(&self, header: &DatasetHeader) -> Result<()> {
        if self.observation.len() != header.observation_len() {
            return Err(Error::config(format!(
                "record (robot {}, t {}) has {} features, expected {}",
                self.robot,
                self.t,
                self.observation.len(),
                header.observation_len()
            )));
        }
        if self.label > 1 {
            return Err(Error::config(format!("label {} is not 0 or 1", self.label)));
        }
        if !header.controlled_ids.contains(&self.robot) {
            return Err(Error::config(format!("robot {} is not in the controlled set", self.robot)));
        }
        if self.observation.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("observation contains a non-finite value"));
        }
        Ok(())
    }
}

pub struct DatasetWriter {
    out: BufWriter<File>,
    header: DatasetHeader,
    count: usize,
}

impl DatasetWriter {
    /// Creates the file and writes the header line.
    pub fn create(path: impl AsRef<Path>, header: DatasetHeader) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        Ok(Self { out, header, count: 0 })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn write(&mut self, record: &DemonstrationRecord) -> Result<()> {
        record.check(&self.header)?;
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Flushes and returns the number of records written.
    pub fn finish(mut self) -> Result<usize> {
        self.out.flush()?;
        Ok(self.count)
    }
}

/// Reads and validates a dataset file.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<(DatasetHeader, Vec<DemonstrationRecord>)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = lines.next().ok_or_else(|| Error::config("empty dataset file"))??;
    let header: DatasetHeader = serde_json::from_str(&first)?;
    if header.version != DATASET_VERSION {
        return Err(Error::config(format!("unsupported dataset version {}", header.version)));
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: DemonstrationRecord = serde_json::from_str(&line)?;
        r.check(&header)?;
        records.push(r);
    }
    Ok((header, records))
}
