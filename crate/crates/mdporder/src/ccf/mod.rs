//! Conditional-characteristic-function regression.
//!
//! The deviation statistic needs, for every candidate order `k`, lag offset
//! `q`, and projection direction `(mu, nu)`, six conditional expectations:
//! the real and imaginary parts of
//!
//! * `g1`: `E[exp(i mu'S_{t+q+k} + i nu'X_{t-1}) | (X_m)_t^{t+q+k-1}]`
//! * `g2`: `E[exp(i mu'S_{t+q+k})               | (X_m)_{t+q}^{t+q+k-1}]`
//! * `g3`: `E[exp(i nu'X_{t-1})                 | (X_m)_t^{t+q+k-1}]`
//!
//! Each is fit as a plain regression of a cosine/sine target on a flattened
//! window of chain vectors, using trajectories from the training half of a
//! sample split only. Backends are pluggable; all shipped backends predict
//! convex combinations of their training targets, so predictions stay in
//! `[-1, 1]`.
//!
//! `g2` depends on neither `q` nor `nu`, so its fit is shared across the
//! whole `q` grid for a given `(k, mu)`: its rows pool all starts
//! `1 <= s <= T-k`, justified by time-invariance of the transition law.

pub mod backend;
pub mod forest;
pub mod knn;
pub mod oracle;

use std::ops::RangeInclusive;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream};
use crate::trajectory::Dataset;

use backend::{CcfEstimator, RegressionBackend};

const SPLIT_STREAM: u64 = 0x5;
const DIRECTION_STREAM: u64 = 0xd;

/// Disjoint halves of the trajectory index set `{0, ..., N-1}`: statistics
/// are evaluated on `eval_ids`, regressions are fit on `train_ids`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    eval_ids: Vec<usize>,
    train_ids: Vec<usize>,
}

impl SplitAssignment {
    /// Validated construction from explicit halves. The two sides must be
    /// disjoint and cover `{0, ..., N-1}`; for odd `N` the training side
    /// holds the extra trajectory.
    pub fn new(mut eval_ids: Vec<usize>, mut train_ids: Vec<usize>) -> Result<Self> {
        eval_ids.sort_unstable();
        train_ids.sort_unstable();
        let n = eval_ids.len() + train_ids.len();
        let mut seen = vec![false; n];
        for &id in eval_ids.iter().chain(train_ids.iter()) {
            if id >= n || seen[id] {
                return Err(Error::validation(
                    "split halves must be disjoint and cover 0..N".to_string(),
                ));
            }
            seen[id] = true;
        }
        if eval_ids.is_empty() || train_ids.is_empty() {
            return Err(Error::validation("both split halves must be non-empty".to_string()));
        }
        if eval_ids.len() > train_ids.len() {
            return Err(Error::validation(
                "the larger half of an odd split belongs to the training side".to_string(),
            ));
        }
        Ok(SplitAssignment { eval_ids, train_ids })
    }

    pub fn eval_ids(&self) -> &[usize] {
        &self.eval_ids
    }

    pub fn train_ids(&self) -> &[usize] {
        &self.train_ids
    }

    /// `N_L`, the number of evaluation trajectories.
    pub fn n_eval(&self) -> usize {
        self.eval_ids.len()
    }
}

/// Uniformly random split of the dataset's trajectories, deterministic per
/// seed. Even `N` gives halves of size `N/2`; odd `N` puts the larger half
/// on the training side.
pub fn split_sample(dataset: &Dataset, seed: u64) -> Result<SplitAssignment> {
    let n = dataset.num_trajectories();
    if n < 2 {
        return Err(Error::validation(format!(
            "sample splitting needs N >= 2, got {n}"
        )));
    }
    let mut ids: Vec<usize> = (0..n).collect();
    let mut rng = substream(seed, &[SPLIT_STREAM]);
    ids.shuffle(&mut rng);
    let n_eval = n / 2;
    let eval_ids = ids[..n_eval].to_vec();
    let train_ids = ids[n_eval..].to_vec();
    SplitAssignment::new(eval_ids, train_ids)
}

/// One randomized projection pair: `mu` acts on states, `nu` on chain
/// vectors, both standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl Direction {
    /// The degenerate all-zero direction, under which every cosine target is
    /// exactly 1 and every sine target exactly 0.
    pub fn zero(p: usize) -> Self {
        Direction {
            mu: vec![0.0; p],
            nu: vec![0.0; p + 1],
        }
    }
}

/// Draw `b` i.i.d. direction pairs `mu ~ N_p(0, I)`, `nu ~ N_{p+1}(0, I)`,
/// deterministic per seed. Direction `i` depends only on `(seed, i)`, so a
/// longer list extends a shorter one.
pub fn draw_directions(b: usize, p: usize, seed: u64) -> Result<Vec<Direction>> {
    if b < 1 {
        return Err(Error::validation("need at least one direction".to_string()));
    }
    Ok((0..b)
        .map(|i| {
            let mut rng = substream(seed, &[DIRECTION_STREAM, i as u64]);
            let mu = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            let nu = (0..=p).map(|_| StandardNormal.sample(&mut rng)).collect();
            Direction { mu, nu }
        })
        .collect())
}

/// Which conditional characteristic function a task estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GKind {
    G1,
    G2,
    G3,
}

/// Real (cosine) or imaginary (sine) component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Real,
    Imag,
}

impl Part {
    /// `cos` for the real part, `sin` for the imaginary part.
    pub fn apply(&self, angle: f64) -> f64 {
        match self {
            Part::Real => angle.cos(),
            Part::Imag => angle.sin(),
        }
    }
}

/// One regression task. `G2` tasks ignore `q` and the `nu` half of the
/// direction by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CcfTask {
    pub kind: GKind,
    pub part: Part,
    pub k: usize,
    pub q: usize,
    pub direction: Direction,
}

/// Row-major feature matrix fed to the regression backends.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl FeatureMatrix {
    pub fn new(cols: usize) -> Self {
        FeatureMatrix {
            data: Vec::new(),
            rows: 0,
            cols,
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Valid start indices `t` for `g1`/`g3` rows: both `X_{t-1}` and
/// `S_{t+q+k}` must exist, giving `2 <= t <= T-q-k`.
pub fn g1_time_range(t_len: usize, k: usize, q: usize) -> Option<RangeInclusive<usize>> {
    let hi = t_len.checked_sub(q + k)?;
    (hi >= 2).then_some(2..=hi)
}

/// Valid start indices `s` for `g2` rows: `1 <= s <= T-k`.
pub fn g2_time_range(t_len: usize, k: usize) -> Option<RangeInclusive<usize>> {
    let hi = t_len.checked_sub(k)?;
    (hi >= 1).then_some(1..=hi)
}

/// Assemble the regression rows for one task from the training half.
///
/// * `g1`: features `(X_m)_t^{t+q+k-1}`, target `cos/sin(mu'S_{t+q+k} + nu'X_{t-1})`.
/// * `g3`: same features, target `cos/sin(nu'X_{t-1})`.
/// * `g2`: features `(X_m)_s^{s+k-1}` over all `1 <= s <= T-k`, target
///   `cos/sin(mu'S_{s+k})`.
pub fn build_training_rows(
    dataset: &Dataset,
    split: &SplitAssignment,
    task: &CcfTask,
) -> Result<(FeatureMatrix, Vec<f64>)> {
    let p = dataset.state_dim();
    let width = p + 1;
    let t_len = dataset.t_len();
    let (k, q) = (task.k, task.q);

    match task.kind {
        GKind::G2 => {
            let range = g2_time_range(t_len, k).ok_or_else(|| {
                Error::validation(format!(
                    "no g2 training rows for k={k}: T={t_len} too small"
                ))
            })?;
            let mut features = FeatureMatrix::new(k * width);
            let mut targets = Vec::new();
            for &j in split.train_ids() {
                let traj = dataset.trajectory(j);
                let cm = traj.chain_matrix();
                for s in range.clone() {
                    features.push_row(cm.window(s, s + k - 1));
                    let angle = dot(&task.direction.mu, traj.state(s + k)?);
                    targets.push(task.part.apply(angle));
                }
            }
            Ok((features, targets))
        }
        GKind::G1 | GKind::G3 => {
            let range = g1_time_range(t_len, k, q).ok_or_else(|| {
                Error::validation(format!(
                    "no g1/g3 training rows for (k={k}, q={q}): T={t_len} too small"
                ))
            })?;
            let mut features = FeatureMatrix::new((q + k) * width);
            let mut targets = Vec::new();
            for &j in split.train_ids() {
                let traj = dataset.trajectory(j);
                let cm = traj.chain_matrix();
                for t in range.clone() {
                    features.push_row(cm.window(t, t + q + k - 1));
                    let past = dot(&task.direction.nu, cm.chain_vector(t - 1));
                    let angle = match task.kind {
                        GKind::G1 => dot(&task.direction.mu, traj.state(t + q + k)?) + past,
                        GKind::G3 => past,
                        GKind::G2 => unreachable!(),
                    };
                    targets.push(task.part.apply(angle));
                }
            }
            Ok((features, targets))
        }
    }
}

/// The six fitted component estimators for one `(k, q, direction)` cell,
/// plus fit provenance. The `g2` pair is shared across the `q` grid.
#[derive(Clone)]
pub struct CcfModelSet {
    pub k: usize,
    pub q: usize,
    g1_re: Arc<dyn CcfEstimator>,
    g1_im: Arc<dyn CcfEstimator>,
    g2_re: Arc<dyn CcfEstimator>,
    g2_im: Arc<dyn CcfEstimator>,
    g3_re: Arc<dyn CcfEstimator>,
    g3_im: Arc<dyn CcfEstimator>,
    backend_name: &'static str,
    training_rows: usize,
}

impl std::fmt::Debug for CcfModelSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CcfModelSet")
            .field("k", &self.k)
            .field("q", &self.q)
            .field("backend", &self.backend_name)
            .field("training_rows", &self.training_rows)
            .finish()
    }
}

fn part_tag(part: Part) -> u64 {
    match part {
        Part::Real => 0,
        Part::Imag => 1,
    }
}

/// Fit the `g2` real/imaginary pair for `(k, direction)`; reused across all
/// `q` in the grid.
pub fn fit_g2_pair(
    dataset: &Dataset,
    split: &SplitAssignment,
    k: usize,
    direction: &Direction,
    backend: &dyn RegressionBackend,
    seed: u64,
) -> Result<(Arc<dyn CcfEstimator>, Arc<dyn CcfEstimator>)> {
    let mut out: Vec<Arc<dyn CcfEstimator>> = Vec::with_capacity(2);
    for part in [Part::Real, Part::Imag] {
        let task = CcfTask {
            kind: GKind::G2,
            part,
            k,
            q: 0,
            direction: direction.clone(),
        };
        let (features, targets) = build_training_rows(dataset, split, &task)?;
        let fitted = backend.fit(
            &task,
            &features,
            &targets,
            derive_seed(seed, &[2, part_tag(part)]),
        )?;
        out.push(Arc::from(fitted));
    }
    let im = out.pop().expect("two fits");
    let re = out.pop().expect("two fits");
    Ok((re, im))
}

impl CcfModelSet {
    /// Fit the cell `(k, q, direction)`, reusing an already-fitted `g2`
    /// pair.
    pub fn fit(
        dataset: &Dataset,
        split: &SplitAssignment,
        k: usize,
        q: usize,
        direction: &Direction,
        backend: &dyn RegressionBackend,
        seed: u64,
        g2_pair: (Arc<dyn CcfEstimator>, Arc<dyn CcfEstimator>),
    ) -> Result<Self> {
        let mut fitted: Vec<Arc<dyn CcfEstimator>> = Vec::with_capacity(4);
        let mut training_rows = 0;
        for (kind, kind_tag) in [(GKind::G1, 1u64), (GKind::G3, 3u64)] {
            for part in [Part::Real, Part::Imag] {
                let task = CcfTask {
                    kind,
                    part,
                    k,
                    q,
                    direction: direction.clone(),
                };
                let (features, targets) = build_training_rows(dataset, split, &task)?;
                training_rows = features.rows();
                let model = backend.fit(
                    &task,
                    &features,
                    &targets,
                    derive_seed(seed, &[kind_tag, part_tag(part)]),
                )?;
                fitted.push(Arc::from(model));
            }
        }
        let g3_im = fitted.pop().expect("four fits");
        let g3_re = fitted.pop().expect("four fits");
        let g1_im = fitted.pop().expect("four fits");
        let g1_re = fitted.pop().expect("four fits");
        Ok(CcfModelSet {
            k,
            q,
            g1_re,
            g1_im,
            g2_re: g2_pair.0,
            g2_im: g2_pair.1,
            g3_re,
            g3_im,
            backend_name: backend.name(),
            training_rows,
        })
    }

    /// Predictions of the six components at one evaluation point.
    /// `full_window` is `(X_m)_t^{t+q+k-1}` and `suffix_window` its final
    /// `k` chain vectors `(X_m)_{t+q}^{t+q+k-1}`.
    pub fn predict_components(
        &self,
        full_window: &[f64],
        suffix_window: &[f64],
    ) -> Result<[f64; 6]> {
        Ok([
            self.g1_re.predict(full_window)?,
            self.g1_im.predict(full_window)?,
            self.g2_re.predict(suffix_window)?,
            self.g2_im.predict(suffix_window)?,
            self.g3_re.predict(full_window)?,
            self.g3_im.predict(full_window)?,
        ])
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend_name
    }

    pub fn training_rows(&self) -> usize {
        self.training_rows
    }

    pub fn g2_models(&self) -> (Arc<dyn CcfEstimator>, Arc<dyn CcfEstimator>) {
        (Arc::clone(&self.g2_re), Arc::clone(&self.g2_im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate, Model, SimSpec};

    fn toy_dataset(n: usize, t_len: usize, p: usize) -> Dataset {
        if t_len >= 10 {
            return simulate(&SimSpec::new(Model::Iid, n, t_len, p, 77)).unwrap();
        }
        // Short lengths, below what the simulators accept: build by hand.
        let trajs = (0..n)
            .map(|j| {
                let states = (0..t_len)
                    .map(|t| (0..p).map(|c| ((j + 1) * (t + 1) * (c + 2)) as f64 * 0.1).collect())
                    .collect();
                let actions = (0..t_len).map(|t| ((j + t) % 2) as f64).collect();
                crate::trajectory::Trajectory::new(states, actions, None).unwrap()
            })
            .collect();
        Dataset::new(trajs).unwrap()
    }

    #[test]
    fn split_sizes_follow_the_even_and_odd_rules() {
        let d2 = toy_dataset(2, 10, 1);
        let s2 = split_sample(&d2, 1).unwrap();
        assert_eq!((s2.n_eval(), s2.train_ids().len()), (1, 1));

        let d12 = toy_dataset(12, 10, 1);
        let s12 = split_sample(&d12, 1).unwrap();
        assert_eq!((s12.n_eval(), s12.train_ids().len()), (6, 6));

        let d5 = toy_dataset(5, 10, 1);
        let s5 = split_sample(&d5, 1).unwrap();
        assert_eq!((s5.n_eval(), s5.train_ids().len()), (2, 3));
    }

    #[test]
    fn split_is_a_partition_and_deterministic() {
        let d = toy_dataset(9, 10, 1);
        let a = split_sample(&d, 3).unwrap();
        let b = split_sample(&d, 3).unwrap();
        assert_eq!(a, b);

        let mut all: Vec<usize> = a
            .eval_ids()
            .iter()
            .chain(a.train_ids())
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn directions_have_the_right_shapes_and_seeding() {
        let dirs = draw_directions(1, 3, 5).unwrap();
        assert_eq!((dirs[0].mu.len(), dirs[0].nu.len()), (3, 4));

        assert_eq!(
            draw_directions(4, 2, 9).unwrap(),
            draw_directions(4, 2, 9).unwrap()
        );
        assert!(draw_directions(0, 2, 9).is_err());
    }

    #[test]
    fn direction_entries_have_mean_near_zero() {
        // 10^4 standard normal entries: sample mean within 0.05 of zero.
        let dirs = draw_directions(3400, 1, 11).unwrap();
        let entries: Vec<f64> = dirs
            .iter()
            .flat_map(|d| d.mu.iter().chain(d.nu.iter()).copied())
            .collect();
        assert!(entries.len() >= 10_000);
        let mean = entries.iter().sum::<f64>() / entries.len() as f64;
        assert!(mean.abs() < 0.05, "mean = {mean}");
    }

    #[test]
    fn g2_row_counting() {
        // k = 1, T = 3: starts s in {1, 2}, two rows per training trajectory.
        let d = toy_dataset(4, 10, 1);
        let split = SplitAssignment::new(vec![0, 1], vec![2, 3]).unwrap();
        let task = CcfTask {
            kind: GKind::G2,
            part: Part::Real,
            k: 1,
            q: 0,
            direction: Direction::zero(1),
        };
        let (features, targets) = build_training_rows(&d, &split, &task).unwrap();
        assert_eq!(features.rows(), 2 * (10 - 1));
        assert_eq!(targets.len(), features.rows());
        assert_eq!(features.cols(), 2);
        assert_eq!(g2_time_range(3, 1), Some(1..=2));
    }

    #[test]
    fn g1_row_counting() {
        // k = 2, q = 1, T = 6: t in {2, 3}, two rows per training trajectory.
        assert_eq!(g1_time_range(6, 2, 1), Some(2..=3));
        let d: Dataset = toy_dataset(4, 6, 1);
        let split = SplitAssignment::new(vec![0, 1], vec![2, 3]).unwrap();
        let task = CcfTask {
            kind: GKind::G1,
            part: Part::Imag,
            k: 2,
            q: 1,
            direction: Direction::zero(1),
        };
        let (features, targets) = build_training_rows(&d, &split, &task).unwrap();
        assert_eq!(features.rows(), 2 * 2);
        assert_eq!(features.cols(), 3 * 2);
        assert_eq!(targets.len(), 4);
    }

    #[test]
    fn targets_are_bounded_by_one() {
        let d = toy_dataset(4, 20, 2);
        let split = split_sample(&d, 0).unwrap();
        let dirs = draw_directions(3, 2, 1).unwrap();
        for dir in &dirs {
            for kind in [GKind::G1, GKind::G2, GKind::G3] {
                for part in [Part::Real, Part::Imag] {
                    let task = CcfTask {
                        kind,
                        part,
                        k: 2,
                        q: 1,
                        direction: dir.clone(),
                    };
                    let (_, targets) = build_training_rows(&d, &split, &task).unwrap();
                    assert!(targets.iter().all(|t| (-1.0..=1.0).contains(t)));
                }
            }
        }
    }

    #[test]
    fn empty_row_range_is_an_error() {
        let d = toy_dataset(4, 10, 1);
        let split = split_sample(&d, 0).unwrap();
        let task = CcfTask {
            kind: GKind::G1,
            part: Part::Real,
            k: 6,
            q: 3,
            direction: Direction::zero(1),
        };
        // T - q - k = 1 < 2: no valid t.
        let err = build_training_rows(&d, &split, &task).unwrap_err();
        assert!(err.to_string().contains("too small"), "{err}");
    }

    #[test]
    fn split_assignment_rejects_overlap_and_gaps() {
        assert!(SplitAssignment::new(vec![0, 1], vec![1, 2]).is_err());
        assert!(SplitAssignment::new(vec![0], vec![2]).is_err());
        assert!(SplitAssignment::new(vec![], vec![0, 1]).is_err());
        assert!(SplitAssignment::new(vec![0, 1], vec![2]).is_err());
    }
}
