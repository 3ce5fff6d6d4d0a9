//! Monte Carlo harness: repeated simulate-then-estimate runs with
//! independent per-repetition seed substreams, aggregated into the table
//! layout of the experiments (mean, MSE, and the empirical distribution of
//! `k_hat - k0`).
//!
//! Repetitions are independent parallel tasks; outcome `i` depends only on
//! the master seeds and `i`, never on other repetitions or scheduling. File
//! output is byte-reproducible by default: per-repetition wall-clock timing
//! is kept in memory (and printable on request) but written as zeros unless
//! timing output is explicitly enabled, since live timings would make
//! otherwise identical runs produce different artifacts.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::{run_estimate, EstimatorConfig};
use crate::simulate::{simulate, SimSpec};

const MC_SIM_STREAM: u64 = 0x51;
const MC_EST_STREAM: u64 = 0x52;

/// One repetition's result.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub rep: usize,
    pub k_hat: Option<usize>,
    pub undetermined: bool,
    pub error: Option<String>,
    pub seconds: f64,
}

/// Empirical distribution of `k_hat - k0` over all repetitions; the named
/// offsets, plus catch-all bins, sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McBins {
    #[serde(rename = "-1")]
    pub minus_one: f64,
    #[serde(rename = "0")]
    pub zero: f64,
    #[serde(rename = "1")]
    pub plus_one: f64,
    #[serde(rename = "2")]
    pub plus_two: f64,
    #[serde(rename = "3")]
    pub plus_three: f64,
    #[serde(rename = "4")]
    pub plus_four: f64,
    pub other: f64,
    pub undetermined: f64,
    pub error: f64,
}

impl McBins {
    pub fn total(&self) -> f64 {
        self.minus_one
            + self.zero
            + self.plus_one
            + self.plus_two
            + self.plus_three
            + self.plus_four
            + self.other
            + self.undetermined
            + self.error
    }
}

/// Aggregated Monte Carlo report.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub model: &'static str,
    pub k_true: usize,
    pub reps: usize,
    pub outcomes: Vec<RepOutcome>,
    /// Mean of `k_hat` over determined repetitions; absent if none.
    pub mean: Option<f64>,
    /// Mean of `(k_hat - k0)^2` over determined repetitions.
    pub mse: Option<f64>,
    pub bins: McBins,
    pub total_seconds: f64,
}

#[derive(Serialize)]
struct McSummary<'a> {
    model: &'a str,
    k_true: usize,
    reps: usize,
    mean: Option<f64>,
    mse: Option<f64>,
    bins: &'a McBins,
}

impl McReport {
    /// Fraction of repetitions with `k_hat == k`.
    pub fn frequency_of(&self, k: usize) -> f64 {
        let hits = self
            .outcomes
            .iter()
            .filter(|o| o.k_hat == Some(k))
            .count();
        hits as f64 / self.reps as f64
    }

    /// Per-repetition CSV: `rep,k_hat,undetermined,seconds`. `k_hat` is
    /// empty for undetermined and failed repetitions (failures also carry
    /// `undetermined = false`, distinguishing the two). The seconds column
    /// is zeroed unless `with_timing` is set, keeping the file reproducible.
    pub fn write_csv<W: Write>(&self, out: &mut W, with_timing: bool) -> Result<()> {
        writeln!(out, "rep,k_hat,undetermined,seconds")?;
        for o in &self.outcomes {
            let k = o.k_hat.map_or(String::new(), |k| k.to_string());
            let secs = if with_timing { o.seconds } else { 0.0 };
            writeln!(out, "{},{},{},{:.3}", o.rep, k, o.undetermined, secs)?;
        }
        Ok(())
    }

    /// Summary JSON with mean, MSE, and the distribution bins.
    pub fn summary_json(&self) -> Result<String> {
        let summary = McSummary {
            model: self.model,
            k_true: self.k_true,
            reps: self.reps,
            mean: self.mean,
            mse: self.mse,
            bins: &self.bins,
        };
        Ok(serde_json::to_string_pretty(&summary)?)
    }
}

/// Run `reps` independent simulate-estimate repetitions.
pub fn run_mc(spec: &SimSpec, config: &EstimatorConfig, reps: usize) -> Result<McReport> {
    if reps < 1 {
        return Err(Error::validation("need at least one repetition".to_string()));
    }
    spec.validate()?;
    config.validate_dims(spec.n, spec.t_len)?;
    let k_true = spec.model.true_order();

    let started = Instant::now();
    let outcomes: Vec<RepOutcome> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let rep_started = Instant::now();
            let mut rep_spec = spec.clone();
            rep_spec.seed = crate::rng::derive_seed(spec.seed, &[MC_SIM_STREAM, rep as u64]);
            let mut rep_config = config.clone();
            rep_config.seed = crate::rng::derive_seed(config.seed, &[MC_EST_STREAM, rep as u64]);

            let result = simulate(&rep_spec).and_then(|data| run_estimate(&data, &rep_config));
            let seconds = rep_started.elapsed().as_secs_f64();
            match result {
                Ok(run) => RepOutcome {
                    rep,
                    k_hat: run.order.k_hat,
                    undetermined: run.order.undetermined,
                    error: None,
                    seconds,
                },
                Err(e) => RepOutcome {
                    rep,
                    k_hat: None,
                    undetermined: false,
                    error: Some(e.to_string()),
                    seconds,
                },
            }
        })
        .collect();
    let total_seconds = started.elapsed().as_secs_f64();

    let mut bins = McBins {
        minus_one: 0.0,
        zero: 0.0,
        plus_one: 0.0,
        plus_two: 0.0,
        plus_three: 0.0,
        plus_four: 0.0,
        other: 0.0,
        undetermined: 0.0,
        error: 0.0,
    };
    let weight = 1.0 / reps as f64;
    let mut determined: Vec<usize> = Vec::new();
    for o in &outcomes {
        if o.error.is_some() {
            bins.error += weight;
        } else if let Some(k) = o.k_hat {
            determined.push(k);
            match k as i64 - k_true as i64 {
                -1 => bins.minus_one += weight,
                0 => bins.zero += weight,
                1 => bins.plus_one += weight,
                2 => bins.plus_two += weight,
                3 => bins.plus_three += weight,
                4 => bins.plus_four += weight,
                _ => bins.other += weight,
            }
        } else {
            bins.undetermined += weight;
        }
    }
    let (mean, mse) = if determined.is_empty() {
        (None, None)
    } else {
        let n = determined.len() as f64;
        let mean = determined.iter().sum::<usize>() as f64 / n;
        let mse = determined
            .iter()
            .map(|&k| {
                let d = k as f64 - k_true as f64;
                d * d
            })
            .sum::<f64>()
            / n;
        (Some(mean), Some(mse))
    };

    Ok(McReport {
        model: spec.model.name(),
        k_true,
        reps,
        outcomes,
        mean,
        mse,
        bins,
        total_seconds,
    })
}
