//! Dataset ingestion and serialization.
//!
//! Two formats are supported, both one record per time step:
//!
//! * CSV with header `traj,t,s1,...,sp,action[,reward]`, rows sorted by
//!   `(traj, t)`, `traj` running 1..N and `t` running 1..T contiguously.
//! * NDJSON with one object per line:
//!   `{"traj": 1, "t": 1, "state": [...], "action": 0.0, "reward": 0.5}`
//!   (`reward` optional).
//!
//! Floating-point values are written as shortest round-trip decimals, so
//! `read(write(d)) == d` holds bit-exactly on every numeric field.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Dataset, Trajectory};

/// On-disk dataset format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Ndjson,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "ndjson" | "jsonl" => Ok(Format::Ndjson),
            other => Err(Error::validation(format!(
                "unknown format {other:?} (expected csv or ndjson)"
            ))),
        }
    }
}

impl Format {
    /// Infer a format from a file extension, if recognizable.
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()? {
            "csv" => Some(Format::Csv),
            "ndjson" | "jsonl" => Some(Format::Ndjson),
            _ => None,
        }
    }
}

/// Read a dataset from a file.
pub fn read_dataset(path: &Path, format: Format) -> Result<Dataset> {
    let file = File::open(path)?;
    match format {
        Format::Csv => read_csv(BufReader::new(file)),
        Format::Ndjson => read_ndjson(BufReader::new(file)),
    }
}

/// Write a dataset to a file.
pub fn write_dataset(dataset: &Dataset, path: &Path, format: Format) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv => write_csv(dataset, &mut out)?,
        Format::Ndjson => write_ndjson(dataset, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRecord {
    traj: usize,
    t: usize,
    state: Vec<f64>,
    action: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reward: Option<f64>,
}

/// Accumulates per-step records into trajectories, enforcing the contiguous
/// `(traj, t)` ordering contract shared by both formats.
struct DatasetBuilder {
    done: Vec<Trajectory>,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    has_rewards: Option<bool>,
    p: Option<usize>,
    current_traj: usize,
    next_t: usize,
}

impl DatasetBuilder {
    fn new() -> Self {
        DatasetBuilder {
            done: Vec::new(),
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            has_rewards: None,
            p: None,
            current_traj: 0,
            next_t: 1,
        }
    }

    fn push(&mut self, rec: StepRecord, where_: &str) -> Result<()> {
        if let Some(p) = self.p {
            if rec.state.len() != p {
                return Err(Error::validation(format!(
                    "{where_}: state has {} coordinates, expected {}",
                    rec.state.len(),
                    p
                )));
            }
        } else {
            if rec.state.is_empty() {
                return Err(Error::validation(format!("{where_}: empty state vector")));
            }
            self.p = Some(rec.state.len());
        }
        match self.has_rewards {
            None => self.has_rewards = Some(rec.reward.is_some()),
            Some(expect) => {
                if rec.reward.is_some() != expect {
                    return Err(Error::validation(format!(
                        "{where_}: reward must be present on all records or none"
                    )));
                }
            }
        }

        let expected = if rec.traj == self.current_traj {
            (self.current_traj, self.next_t)
        } else if rec.traj == self.current_traj + 1 && rec.t == 1 {
            self.flush_trajectory(where_)?;
            self.current_traj = rec.traj;
            self.next_t = 1;
            (rec.traj, 1)
        } else {
            return Err(Error::validation(format!(
                "{where_}: expected (traj={}, t={}) or (traj={}, t=1), got (traj={}, t={})",
                self.current_traj,
                self.next_t,
                self.current_traj + 1,
                rec.traj,
                rec.t
            )));
        };
        if (rec.traj, rec.t) != expected {
            return Err(Error::validation(format!(
                "{where_}: expected (traj={}, t={}), got (traj={}, t={})",
                expected.0, expected.1, rec.traj, rec.t
            )));
        }

        self.states.extend_from_slice(&rec.state);
        self.actions.push(rec.action);
        if let Some(r) = rec.reward {
            self.rewards.push(r);
        }
        self.next_t += 1;
        Ok(())
    }

    fn flush_trajectory(&mut self, where_: &str) -> Result<()> {
        if self.current_traj == 0 {
            return Ok(());
        }
        let p = self.p.expect("p set before first flush");
        let states = std::mem::take(&mut self.states);
        let actions = std::mem::take(&mut self.actions);
        let rewards = if self.has_rewards == Some(true) {
            Some(std::mem::take(&mut self.rewards))
        } else {
            None
        };
        let traj = Trajectory::from_flat(states, p, actions, rewards)
            .map_err(|e| Error::validation(format!("{where_}: {e}")))?;
        if let Some(first) = self.done.first() {
            if traj.len() != first.len() {
                return Err(Error::validation(format!(
                    "trajectory {} has length {} but trajectory 1 has length {}",
                    self.current_traj,
                    traj.len(),
                    first.len()
                )));
            }
        }
        self.done.push(traj);
        Ok(())
    }

    fn finish(mut self, where_: &str) -> Result<Dataset> {
        self.flush_trajectory(where_)?;
        Dataset::new(self.done)
    }
}

/// Parse a CSV dataset from a reader.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let p = validate_csv_header(&headers)?;
    let has_reward = headers.len() == p + 4;
    let width = headers.len();

    let mut builder = DatasetBuilder::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2; // 1-based, after the header line
        let where_ = format!("row {line}");
        let record = record?;
        if record.len() != width {
            return Err(Error::validation(format!(
                "{where_}: has {} columns, expected {} per the header",
                record.len(),
                width
            )));
        }
        let parse_num = |idx: usize, name: &str| -> Result<f64> {
            record[idx].trim().parse::<f64>().map_err(|_| {
                Error::validation(format!(
                    "{where_}: column {name} has non-numeric value {:?}",
                    &record[idx]
                ))
            })
        };
        let traj = record[0].trim().parse::<usize>().map_err(|_| {
            Error::validation(format!("{where_}: bad traj id {:?}", &record[0]))
        })?;
        let t = record[1].trim().parse::<usize>().map_err(|_| {
            Error::validation(format!("{where_}: bad time index {:?}", &record[1]))
        })?;
        let mut state = Vec::with_capacity(p);
        for j in 0..p {
            state.push(parse_num(2 + j, &format!("s{}", j + 1))?);
        }
        let action = parse_num(2 + p, "action")?;
        let reward = if has_reward {
            Some(parse_num(3 + p, "reward")?)
        } else {
            None
        };
        builder.push(
            StepRecord {
                traj,
                t,
                state,
                action,
                reward,
            },
            &where_,
        )?;
    }
    builder.finish("end of file")
}

fn validate_csv_header(headers: &csv::StringRecord) -> Result<usize> {
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    if cols.len() < 4 || cols[0] != "traj" || cols[1] != "t" {
        return Err(Error::validation(
            "csv header must start with traj,t,s1,...,sp,action[,reward]".to_string(),
        ));
    }
    let mut p = 0;
    let mut idx = 2;
    while idx < cols.len() && cols[idx] == format!("s{}", p + 1) {
        p += 1;
        idx += 1;
    }
    if p == 0 {
        return Err(Error::validation(
            "csv header has no state columns s1..sp".to_string(),
        ));
    }
    if idx >= cols.len() || cols[idx] != "action" {
        return Err(Error::validation(format!(
            "csv header: expected column \"action\" after s{p}, found {:?}",
            cols.get(idx).copied().unwrap_or("<end>")
        )));
    }
    idx += 1;
    if idx < cols.len() {
        if cols[idx] != "reward" {
            return Err(Error::validation(format!(
                "csv header: unknown column {:?}",
                cols[idx]
            )));
        }
        idx += 1;
    }
    if idx != cols.len() {
        return Err(Error::validation(format!(
            "csv header: unknown trailing column {:?}",
            cols[idx]
        )));
    }
    Ok(p)
}

/// Write a dataset as CSV.
pub fn write_csv<W: Write>(dataset: &Dataset, out: &mut W) -> Result<()> {
    let p = dataset.state_dim();
    let with_rewards = dataset.trajectories().iter().all(|t| t.rewards().is_some());
    if !with_rewards
        && dataset
            .trajectories()
            .iter()
            .any(|t| t.rewards().is_some())
    {
        return Err(Error::validation(
            "csv output needs rewards on all trajectories or none".to_string(),
        ));
    }

    let mut header = String::from("traj,t");
    for j in 1..=p {
        header.push_str(&format!(",s{j}"));
    }
    header.push_str(",action");
    if with_rewards {
        header.push_str(",reward");
    }
    writeln!(out, "{header}")?;

    let mut line = String::new();
    for (j, traj) in dataset.trajectories().iter().enumerate() {
        for t in 1..=traj.len() {
            line.clear();
            line.push_str(&format!("{},{}", j + 1, t));
            for v in traj.state(t).expect("t in range") {
                line.push(',');
                line.push_str(&v.to_string());
            }
            line.push(',');
            line.push_str(&traj.action(t).expect("t in range").to_string());
            if with_rewards {
                line.push(',');
                line.push_str(&traj.rewards().expect("checked")[t - 1].to_string());
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

/// Parse an NDJSON dataset from a reader.
pub fn read_ndjson<R: Read>(reader: R) -> Result<Dataset> {
    let mut builder = DatasetBuilder::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let where_ = format!("line {}", i + 1);
        let rec: StepRecord = serde_json::from_str(&line)
            .map_err(|e| Error::validation(format!("{where_}: {e}")))?;
        builder.push(rec, &where_)?;
    }
    builder.finish("end of file")
}

/// Write a dataset as NDJSON.
pub fn write_ndjson<W: Write>(dataset: &Dataset, out: &mut W) -> Result<()> {
    for (j, traj) in dataset.trajectories().iter().enumerate() {
        for t in 1..=traj.len() {
            let rec = StepRecord {
                traj: j + 1,
                t,
                state: traj.state(t).expect("t in range").to_vec(),
                action: traj.action(t).expect("t in range"),
                reward: traj.rewards().map(|r| r[t - 1]),
            };
            serde_json::to_writer(&mut *out, &rec)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
