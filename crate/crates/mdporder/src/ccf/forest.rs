//! Regression forest backend: bagged variance-reduction trees.
//!
//! Each tree grows on a bootstrap resample of the (canonically ordered)
//! training rows, choosing at every node the best of `ceil(d/3)` randomly
//! drawn candidate features by exact squared-error scan. Leaves predict the
//! mean of their targets, so every prediction is a convex combination of
//! training targets.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::ccf::backend::{
    canonical_row_order, check_fit_inputs, check_query_dim, CcfEstimator, RegressionBackend,
};
use crate::ccf::{CcfTask, FeatureMatrix};
use crate::error::Result;
use crate::rng::substream;

pub struct ForestBackend {
    pub trees: usize,
    pub min_leaf: usize,
    /// Bagged exact-scan trees when set; extremely randomized trees on the
    /// full sample otherwise.
    pub exact_splits: bool,
    /// Row fraction per tree: 1.0 draws n rows with replacement (bagging);
    /// below 1.0 draws floor(frac * n) rows without replacement.
    pub subsample: f64,
    /// Minimum variance reduction, as a fraction of the node's squared
    /// error, for a split to be kept; 0 disables pre-pruning.
    pub min_gain_frac: f64,
    /// Candidate features per split; `None` selects `ceil(d/3)`.
    pub mtry: Option<usize>,
    /// Scale the leaf size with dimension as `n^(4/(4+d))`, floored at
    /// `min_leaf`. A fixed small leaf over-localizes low-dimensional fits,
    /// inflating their variance relative to high-dimensional ones; the
    /// adaptive schedule keeps the error level comparable across the
    /// window-dimension grid.
    pub dimension_adaptive_leaf: bool,
}

impl Default for ForestBackend {
    fn default() -> Self {
        ForestBackend {
            trees: 100,
            min_leaf: 5,
            exact_splits: true,
            subsample: 1.0,
            min_gain_frac: 0.0,
            mtry: None,
            dimension_adaptive_leaf: true,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    /// Split feature, or -1 for a leaf.
    feature: i32,
    /// Split threshold for internal nodes; predicted value for leaves.
    value: f64,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            let node = &self.nodes[at];
            if node.feature < 0 {
                return node.value;
            }
            at = if x[node.feature as usize] <= node.value {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }
}

pub struct Forest {
    trees: Vec<Tree>,
    dim: usize,
}

impl CcfEstimator for Forest {
    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, features: &[f64]) -> Result<f64> {
        check_query_dim(self.dim, features)?;
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        let mean = sum / self.trees.len() as f64;
        Ok(mean.clamp(-1.0, 1.0))
    }
}

impl RegressionBackend for ForestBackend {
    fn name(&self) -> &'static str {
        "forest"
    }

    fn fit(
        &self,
        _task: &CcfTask,
        features: &FeatureMatrix,
        targets: &[f64],
        seed: u64,
    ) -> Result<Box<dyn CcfEstimator>> {
        check_fit_inputs(features, targets)?;
        let canonical = canonical_row_order(features, targets);
        let d = features.cols();
        let n = features.rows();
        let mtry = self.mtry.unwrap_or(d.div_ceil(3)).clamp(1, d);
        let min_leaf = if self.dimension_adaptive_leaf {
            let schedule = (n as f64).powf(4.0 / (4.0 + d as f64)).ceil() as usize;
            self.min_leaf.max(schedule)
        } else {
            self.min_leaf
        };

        let mut builder = TreeBuilder {
            features,
            targets,
            mtry,
            min_leaf,
            exact_splits: self.exact_splits,
            min_gain_frac: self.min_gain_frac,
            nodes: Vec::new(),
            idx: Vec::with_capacity(canonical.len()),
            sort_buf: Vec::with_capacity(canonical.len()),
            feat_pool: (0..d as u32).collect(),
        };

        let trees = (0..self.trees)
            .map(|i| {
                let mut rng = substream(seed, &[i as u64]);
                builder.grow(&canonical, self.subsample, &mut rng)
            })
            .collect();
        Ok(Box::new(Forest {
            trees,
            dim: d,
        }))
    }
}

struct TreeBuilder<'a> {
    features: &'a FeatureMatrix,
    targets: &'a [f64],
    mtry: usize,
    min_leaf: usize,
    exact_splits: bool,
    min_gain_frac: f64,
    nodes: Vec<Node>,
    idx: Vec<u32>,
    sort_buf: Vec<(f64, f64)>,
    feat_pool: Vec<u32>,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, canonical: &[u32], subsample: f64, rng: &mut ChaCha12Rng) -> Tree {
        let n = canonical.len();
        self.idx.clear();
        if subsample >= 1.0 {
            for _ in 0..n {
                self.idx.push(canonical[rng.random_range(0..n)]);
            }
        } else {
            // Partial Fisher-Yates draw without replacement.
            let take = ((n as f64 * subsample) as usize).clamp(1, n);
            let mut pool: Vec<u32> = canonical.to_vec();
            for i in 0..take {
                let j = rng.random_range(i..n);
                pool.swap(i, j);
            }
            self.idx.extend_from_slice(&pool[..take]);
        }
        let m = self.idx.len();
        self.nodes.clear();
        self.build(0, m, rng);
        Tree {
            nodes: std::mem::take(&mut self.nodes),
        }
    }

    fn leaf(&mut self, lo: usize, hi: usize) -> u32 {
        let sum: f64 = self.idx[lo..hi]
            .iter()
            .map(|&i| self.targets[i as usize])
            .sum();
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            feature: -1,
            value: sum / (hi - lo) as f64,
            left: 0,
            right: 0,
        });
        id
    }

    fn build(&mut self, lo: usize, hi: usize, rng: &mut ChaCha12Rng) -> u32 {
        let m = hi - lo;
        if m < 2 * self.min_leaf {
            return self.leaf(lo, hi);
        }
        let first = self.targets[self.idx[lo] as usize];
        if self.idx[lo..hi]
            .iter()
            .all(|&i| self.targets[i as usize] == first)
        {
            return self.leaf(lo, hi);
        }

        // Draw mtry distinct candidate features.
        let d = self.feat_pool.len();
        for i in 0..self.mtry.min(d) {
            let j = rng.random_range(i..d);
            self.feat_pool.swap(i, j);
        }

        let mut best: Option<(f64, u32, f64)> = None; // (score, feature, threshold)
        for fi in 0..self.mtry.min(d) {
            let f = self.feat_pool[fi];
            if self.exact_splits {
                self.best_exact_split(lo, hi, f, &mut best);
            } else {
                self.score_random_split(lo, hi, f, rng, &mut best);
            }
        }

        let Some((score, feature, threshold)) = best else {
            return self.leaf(lo, hi);
        };
        if self.min_gain_frac > 0.0 {
            // A split must reduce the node's squared error by a minimum
            // fraction; pure-noise nodes collapse to leaves.
            let (mut total, mut total_sq) = (0.0, 0.0);
            for &i in &self.idx[lo..hi] {
                let y = self.targets[i as usize];
                total += y;
                total_sq += y * y;
            }
            let baseline = total * total / m as f64;
            let sse_parent = total_sq - baseline;
            if score - baseline < self.min_gain_frac * sse_parent {
                return self.leaf(lo, hi);
            }
        }

        // In-place partition: rows with x[f] <= threshold move to the front.
        let mut split = lo;
        for i in lo..hi {
            if self.features.row(self.idx[i] as usize)[feature as usize] <= threshold {
                self.idx.swap(split, i);
                split += 1;
            }
        }
        debug_assert!(split > lo && split < hi);

        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            feature: feature as i32,
            value: threshold,
            left: 0,
            right: 0,
        });
        let left = self.build(lo, split, rng);
        let right = self.build(split, hi, rng);
        self.nodes[id as usize].left = left;
        self.nodes[id as usize].right = right;
        id
    }

    /// Exact scan over all admissible cut points of one feature.
    fn best_exact_split(&mut self, lo: usize, hi: usize, f: u32, best: &mut Option<(f64, u32, f64)>) {
        let m = hi - lo;
        self.sort_buf.clear();
        self.sort_buf.extend(self.idx[lo..hi].iter().map(|&i| {
            (
                self.features.row(i as usize)[f as usize],
                self.targets[i as usize],
            )
        }));
        self.sort_buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let total: f64 = self.sort_buf.iter().map(|r| r.1).sum();
        let mut left_sum = 0.0;
        for i in 0..m - 1 {
            left_sum += self.sort_buf[i].1;
            let left_n = i + 1;
            if left_n < self.min_leaf || m - left_n < self.min_leaf {
                continue;
            }
            let (v_prev, v_next) = (self.sort_buf[i].0, self.sort_buf[i + 1].0);
            if v_prev >= v_next {
                continue;
            }
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / left_n as f64
                + right_sum * right_sum / (m - left_n) as f64;
            if best.map_or(true, |(s, _, _)| score > s) {
                // Midpoint, nudged down so the left side is exactly the
                // scanned prefix even when the midpoint rounds up.
                let mid = v_prev + (v_next - v_prev) / 2.0;
                let threshold = if mid < v_next { mid } else { v_prev };
                *best = Some((score, f, threshold));
            }
        }
    }

    /// One uniformly drawn cut point for one feature; linear-time scoring.
    fn score_random_split(
        &mut self,
        lo: usize,
        hi: usize,
        f: u32,
        rng: &mut ChaCha12Rng,
        best: &mut Option<(f64, u32, f64)>,
    ) {
        let m = hi - lo;
        let mut v_min = f64::INFINITY;
        let mut v_max = f64::NEG_INFINITY;
        for &i in &self.idx[lo..hi] {
            let v = self.features.row(i as usize)[f as usize];
            v_min = v_min.min(v);
            v_max = v_max.max(v);
        }
        if !(v_min < v_max) {
            return;
        }
        // A draw in [min, max) always leaves both sides non-empty under the
        // `x <= threshold` routing.
        let threshold = rng.random_range(v_min..v_max);
        let mut left_n = 0usize;
        let mut left_sum = 0.0;
        let mut total = 0.0;
        for &i in &self.idx[lo..hi] {
            let y = self.targets[i as usize];
            total += y;
            if self.features.row(i as usize)[f as usize] <= threshold {
                left_n += 1;
                left_sum += y;
            }
        }
        if left_n < self.min_leaf || m - left_n < self.min_leaf {
            return;
        }
        let right_sum = total - left_sum;
        let score = left_sum * left_sum / left_n as f64
            + right_sum * right_sum / (m - left_n) as f64;
        if best.map_or(true, |(s, _, _)| score > s) {
            *best = Some((score, f, threshold));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccf::{Direction, GKind, Part};

    fn task() -> CcfTask {
        CcfTask {
            kind: GKind::G1,
            part: Part::Real,
            k: 1,
            q: 0,
            direction: Direction::zero(1),
        }
    }

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(rows[0].len());
        for r in rows {
            m.push_row(r);
        }
        m
    }

    #[test]
    fn constant_target_predicts_the_constant_exactly() {
        let x = matrix(&[&[0.0, 1.0], &[1.0, 2.0], &[2.0, 0.5], &[3.0, -1.0]]);
        let y = vec![0.5; 4];
        let backend = ForestBackend::default();
        let model = backend.fit(&task(), &x, &y, 1).unwrap();
        for q in [[0.0, 0.0], [10.0, -3.0], [1.5, 0.7]] {
            assert_eq!(model.predict(&q).unwrap(), 0.5);
        }
    }

    #[test]
    fn identical_feature_rows_fall_back_to_target_mean() {
        let x = matrix(&[&[1.0], &[1.0], &[1.0], &[1.0]]);
        let y = vec![0.0, 0.5, 0.5, 1.0];
        let backend = ForestBackend {
            trees: 30,
            min_leaf: 1,
        };
        let model = backend.fit(&task(), &x, &y, 1).unwrap();
        let pred = model.predict(&[1.0]).unwrap();
        // No split is possible; every tree is a leaf over its bootstrap
        // sample, so the forest averages resampled targets around 0.5.
        assert!((pred - 0.5).abs() < 0.25, "pred = {pred}");
    }

    #[test]
    fn learns_a_step_function() {
        let mut x = FeatureMatrix::new(1);
        let mut y = Vec::new();
        for i in 0..200 {
            let v = i as f64 / 200.0;
            x.push_row(&[v]);
            y.push(if v < 0.5 { -0.8 } else { 0.8 });
        }
        let backend = ForestBackend::default();
        let model = backend.fit(&task(), &x, &y, 7).unwrap();
        assert!(model.predict(&[0.1]).unwrap() < -0.6);
        assert!(model.predict(&[0.9]).unwrap() > 0.6);
    }

    #[test]
    fn fit_is_deterministic_and_row_order_invariant() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
            .collect();
        let y: Vec<f64> = (0..60).map(|i| ((i * i) as f64 * 0.05).sin()).collect();

        let fwd = {
            let mut m = FeatureMatrix::new(2);
            rows.iter().for_each(|r| m.push_row(r));
            m
        };
        let rev = {
            let mut m = FeatureMatrix::new(2);
            rows.iter().rev().for_each(|r| m.push_row(r));
            m
        };
        let y_rev: Vec<f64> = y.iter().rev().copied().collect();

        let backend = ForestBackend::default();
        let a = backend.fit(&task(), &fwd, &y, 42).unwrap();
        let b = backend.fit(&task(), &fwd, &y, 42).unwrap();
        let c = backend.fit(&task(), &rev, &y_rev, 42).unwrap();
        for q in [[0.3, 0.4], [-0.2, 0.9], [0.0, 0.0]] {
            let pa = a.predict(&q).unwrap();
            assert_eq!(pa, b.predict(&q).unwrap());
            assert_eq!(pa, c.predict(&q).unwrap());
        }
    }

    #[test]
    fn predictions_stay_in_the_target_hull() {
        let mut x = FeatureMatrix::new(3);
        let mut y = Vec::new();
        for i in 0..150 {
            let t = i as f64;
            x.push_row(&[t.sin(), (2.0 * t).cos(), (0.1 * t).sin()]);
            y.push((3.0 * t).sin());
        }
        let backend = ForestBackend::default();
        let model = backend.fit(&task(), &x, &y, 5).unwrap();
        for i in 0..50 {
            let t = 1000.0 + i as f64;
            let pred = model
                .predict(&[t.sin(), (2.0 * t).cos(), (0.1 * t).sin()])
                .unwrap();
            assert!((-1.0..=1.0).contains(&pred));
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let x = matrix(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let backend = ForestBackend::default();
        let model = backend.fit(&task(), &x, &[0.1, 0.2], 1).unwrap();
        assert!(model.predict(&[1.0]).is_err());
        assert!(model.predict(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn zero_rows_is_an_error() {
        let x = FeatureMatrix::new(2);
        let backend = ForestBackend::default();
        assert!(backend.fit(&task(), &x, &[], 1).is_err());
    }
}
