//! The deviation statistic.
//!
//! For a candidate order `k`, lag offset `q`, and direction `(mu, nu)`, the
//! empirical deviation is the evaluation-half average of the squared modulus
//! of the factorization defect
//!
//! ```text
//! g_Rm = g1_R - g2_R * g3_R + g2_I * g3_I
//! g_Im = g1_I - g2_I * g3_R - g2_R * g3_I
//! ```
//!
//! taken over all evaluation trajectories and all admissible start times
//! `2 <= t <= T - q - k`. It vanishes for every `(q, mu, nu)` exactly when
//! the process is Markov of order at most `k`, so the max statistic over the
//! whole `(q, direction)` grid separates candidate orders below the true
//! order from those at or above it.
//!
//! Grid cells are pure functions of (data, split, fitted models) and are
//! evaluated in parallel; the reduction is a max, so scheduling cannot
//! change any result. Deviations are often minuscule, so per-cell sums are
//! accumulated pairwise to limit rounding drift across long sums.

use rayon::prelude::*;

use crate::ccf::backend::RegressionBackend;
use crate::ccf::{fit_g2_pair, g1_time_range, CcfModelSet, Direction, SplitAssignment};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::trajectory::Dataset;

const G2_FIT_STREAM: u64 = 0x21;
const CELL_FIT_STREAM: u64 = 0x22;

/// One evaluated grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCell {
    pub k: usize,
    pub q: usize,
    /// 1-based direction index.
    pub b: usize,
    /// The empirical deviation; non-negative, bounded by 18.
    pub value: f64,
    /// Number of `(trajectory, t)` summands averaged.
    pub summand_count: usize,
}

/// The max statistic per candidate order, `k = 0..=K`, with the `k = 0`
/// entry pinned to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PiSequence {
    values: Vec<f64>,
}

impl PiSequence {
    /// Build from the per-order values for `k = 1..=K`.
    pub fn from_order_values(values_from_k1: Vec<f64>) -> Result<Self> {
        if values_from_k1.is_empty() {
            return Err(Error::validation("need at least one candidate order".to_string()));
        }
        if values_from_k1.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::validation(
                "max-statistic values must be finite and non-negative".to_string(),
            ));
        }
        let mut values = Vec::with_capacity(values_from_k1.len() + 1);
        values.push(1.0);
        values.extend(values_from_k1);
        Ok(PiSequence { values })
    }

    /// Values indexed by `k = 0..=K`; `values()[0] == 1`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn k_max(&self) -> usize {
        self.values.len() - 1
    }
}

/// The grid of evaluated cells together with the derived max sequence.
#[derive(Debug, Clone)]
pub struct GammaGrid {
    pub pi: PiSequence,
    /// All cells in `(k, q, b)` lexicographic order.
    pub cells: Vec<GammaCell>,
}

/// The factorization defect `(g_Rm, g_Im)` at one evaluation point.
/// `full_window` is `(X_m)_t^{t+q+k-1}`, `suffix_window` its last `k` chain
/// vectors. Both components are bounded by 3 in magnitude.
pub fn residual_pair(
    models: &CcfModelSet,
    full_window: &[f64],
    suffix_window: &[f64],
) -> Result<(f64, f64)> {
    let [g1r, g1i, g2r, g2i, g3r, g3i] = models.predict_components(full_window, suffix_window)?;
    Ok(combine_components(g1r, g1i, g2r, g2i, g3r, g3i))
}

/// The defect given the six component values; shared by the estimator path
/// and the verification oracles.
pub fn combine_components(
    g1r: f64,
    g1i: f64,
    g2r: f64,
    g2i: f64,
    g3r: f64,
    g3i: f64,
) -> (f64, f64) {
    (
        g1r - g2r * g3r + g2i * g3i,
        g1i - g2i * g3r - g2r * g3i,
    )
}

/// Sum with pairwise splitting; error grows like O(log n) instead of O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Empirical deviation for one fitted cell: the average of
/// `g_Rm^2 + g_Im^2` over all evaluation trajectories and admissible `t`.
pub fn gamma_hat(
    dataset: &Dataset,
    split: &SplitAssignment,
    models: &CcfModelSet,
    b: usize,
) -> Result<GammaCell> {
    let (k, q) = (models.k, models.q);
    let t_len = dataset.t_len();
    let range = g1_time_range(t_len, k, q).ok_or_else(|| {
        Error::validation(format!(
            "empty evaluation range for (k={k}, q={q}): T={t_len} too small"
        ))
    })?;

    let mut squares = Vec::with_capacity(split.n_eval() * range.clone().count());
    for &j in split.eval_ids() {
        let cm = dataset.trajectory(j).chain_matrix();
        for t in range.clone() {
            let full = cm.window(t, t + q + k - 1);
            let suffix = cm.window(t + q, t + q + k - 1);
            let (g_rm, g_im) = residual_pair(models, full, suffix)?;
            squares.push(g_rm * g_rm + g_im * g_im);
        }
    }
    let count = squares.len();
    let value = pairwise_sum(&squares) / count as f64;
    debug_assert!((0.0..=18.0).contains(&value));
    Ok(GammaCell {
        k,
        q,
        b,
        value,
        summand_count: count,
    })
}

/// Max over a cell collection; insensitive to ordering.
pub fn pi_statistic(cells: &[GammaCell]) -> f64 {
    cells.iter().map(|c| c.value).fold(f64::MIN, f64::max)
}

/// Evaluate the full `(k, q, b)` grid and reduce to the max sequence.
///
/// Fits on the training half with per-cell derived seeds (the `g2` pair is
/// fit once per `(k, b)` and shared across `q`), evaluates on the evaluation
/// half, and runs cells in parallel. Errors carry the offending `(k, q)`.
pub fn compute_pi_sequence(
    dataset: &Dataset,
    split: &SplitAssignment,
    directions: &[Direction],
    k_max: usize,
    q_max: usize,
    backend: &dyn RegressionBackend,
    seed: u64,
) -> Result<GammaGrid> {
    if k_max < 1 {
        return Err(Error::validation("K must be >= 1".to_string()));
    }
    if directions.is_empty() {
        return Err(Error::validation("need at least one direction".to_string()));
    }
    let t_len = dataset.t_len();
    if g1_time_range(t_len, k_max, q_max).is_none() {
        return Err(Error::validation(format!(
            "empty evaluation range for (k={k_max}, q={q_max}): T={t_len} too small"
        )));
    }

    let kb_pairs: Vec<(usize, usize)> = (1..=k_max)
        .flat_map(|k| (0..directions.len()).map(move |bi| (k, bi)))
        .collect();

    let mut cells: Vec<GammaCell> = kb_pairs
        .into_par_iter()
        .map(|(k, bi)| -> Result<Vec<GammaCell>> {
            let direction = &directions[bi];
            let g2 = fit_g2_pair(
                dataset,
                split,
                k,
                direction,
                backend,
                derive_seed(seed, &[G2_FIT_STREAM, k as u64, bi as u64]),
            )
            .map_err(|e| e.in_stage("g2-fit"))?;
            (0..=q_max)
                .into_par_iter()
                .map(|q| {
                    let models = CcfModelSet::fit(
                        dataset,
                        split,
                        k,
                        q,
                        direction,
                        backend,
                        derive_seed(seed, &[CELL_FIT_STREAM, k as u64, q as u64, bi as u64]),
                        (g2.0.clone(), g2.1.clone()),
                    )?;
                    gamma_hat(dataset, split, &models, bi + 1)
                })
                .collect()
        })
        .collect::<Result<Vec<Vec<GammaCell>>>>()?
        .into_iter()
        .flatten()
        .collect();
    cells.sort_unstable_by_key(|c| (c.k, c.q, c.b));

    let pi_values: Vec<f64> = (1..=k_max)
        .map(|k| {
            let per_k: Vec<GammaCell> = cells.iter().filter(|c| c.k == k).copied().collect();
            pi_statistic(&per_k)
        })
        .collect();
    Ok(GammaGrid {
        pi: PiSequence::from_order_values(pi_values)?,
        cells,
    })
}
