//! k-nearest-neighbor backend: target averaging over the `k` closest
//! training rows in Euclidean distance on per-coordinate standardized
//! features. Default neighborhood size is `ceil(n^(2/3))`.

use crate::ccf::backend::{
    canonical_row_order, check_fit_inputs, check_query_dim, CcfEstimator, RegressionBackend,
};
use crate::ccf::{CcfTask, FeatureMatrix};
use crate::error::Result;

pub struct KnnBackend {
    /// Neighborhood size; `None` selects `ceil(n^(2/3))`.
    pub k: Option<usize>,
}

struct KnnModel {
    data: Vec<f64>, // standardized rows, canonical order
    targets: Vec<f64>,
    means: Vec<f64>,
    inv_sd: Vec<f64>,
    k: usize,
    dim: usize,
}

impl RegressionBackend for KnnBackend {
    fn name(&self) -> &'static str {
        "knn"
    }

    fn fit(
        &self,
        _task: &CcfTask,
        features: &FeatureMatrix,
        targets: &[f64],
        _seed: u64,
    ) -> Result<Box<dyn CcfEstimator>> {
        check_fit_inputs(features, targets)?;
        let n = features.rows();
        let d = features.cols();
        let k = self
            .k
            .unwrap_or_else(|| (n as f64).powf(2.0 / 3.0).ceil() as usize)
            .clamp(1, n);

        let mut means = vec![0.0; d];
        for i in 0..n {
            for (m, v) in means.iter_mut().zip(features.row(i)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n as f64);

        let mut var = vec![0.0; d];
        for i in 0..n {
            for ((v, m), x) in var.iter_mut().zip(&means).zip(features.row(i)) {
                *v += (x - m) * (x - m);
            }
        }
        // Constant coordinates are dropped from the metric.
        let inv_sd: Vec<f64> = var
            .iter()
            .map(|v| {
                let sd = (v / n as f64).sqrt();
                if sd > 0.0 {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect();

        let order = canonical_row_order(features, targets);
        let mut data = Vec::with_capacity(n * d);
        let mut sorted_targets = Vec::with_capacity(n);
        for &i in &order {
            for ((x, m), s) in features.row(i as usize).iter().zip(&means).zip(&inv_sd) {
                data.push((x - m) * s);
            }
            sorted_targets.push(targets[i as usize]);
        }

        Ok(Box::new(KnnModel {
            data,
            targets: sorted_targets,
            means,
            inv_sd,
            k,
            dim: d,
        }))
    }
}

impl CcfEstimator for KnnModel {
    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, features: &[f64]) -> Result<f64> {
        check_query_dim(self.dim, features)?;
        let query: Vec<f64> = features
            .iter()
            .zip(&self.means)
            .zip(&self.inv_sd)
            .map(|((x, m), s)| (x - m) * s)
            .collect();

        let n = self.targets.len();
        let mut scored: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let row = &self.data[i * self.dim..(i + 1) * self.dim];
                let d2: f64 = row
                    .iter()
                    .zip(&query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, self.targets[i])
            })
            .collect();

        // Ties in distance break on the target value, so the selected
        // neighborhood is a function of the training multiset alone.
        let cmp = |a: &(f64, f64), b: &(f64, f64)| {
            a.0.total_cmp(&b.0).then_with(|| a.1.total_cmp(&b.1))
        };
        if self.k < n {
            scored.select_nth_unstable_by(self.k - 1, cmp);
        }
        let head = &mut scored[..self.k];
        head.sort_unstable_by(cmp);
        let sum: f64 = head.iter().map(|(_, y)| y).sum();
        Ok((sum / self.k as f64).clamp(-1.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccf::{Direction, GKind, Part};

    fn task() -> CcfTask {
        CcfTask {
            kind: GKind::G2,
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
    fn single_row_predicts_that_target_everywhere() {
        let x = matrix(&[&[3.0, 4.0]]);
        let backend = KnnBackend { k: None };
        let model = backend.fit(&task(), &x, &[0.25], 0).unwrap();
        assert_eq!(model.predict(&[0.0, 0.0]).unwrap(), 0.25);
        assert_eq!(model.predict(&[100.0, -5.0]).unwrap(), 0.25);
    }

    #[test]
    fn one_nearest_neighbor_recovers_training_targets() {
        let x = matrix(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let y = vec![-0.5, 0.0, 0.5, 1.0];
        let backend = KnnBackend { k: Some(1) };
        let model = backend.fit(&task(), &x, &y, 0).unwrap();
        for (i, target) in y.iter().enumerate() {
            assert_eq!(model.predict(&[i as f64]).unwrap(), *target);
        }
    }

    #[test]
    fn constant_target_predicts_the_constant() {
        let x = matrix(&[&[0.0], &[5.0], &[-3.0]]);
        let backend = KnnBackend { k: None };
        let model = backend.fit(&task(), &x, &[0.5, 0.5, 0.5], 0).unwrap();
        assert_eq!(model.predict(&[7.0]).unwrap(), 0.5);
    }

    #[test]
    fn default_k_follows_the_two_thirds_rule() {
        // n = 27: ceil(27^(2/3)) = 9. Build a clustered design where the
        // 9 nearest points of the origin all carry target 1.
        let mut x = FeatureMatrix::new(1);
        let mut y = Vec::new();
        for i in 0..9 {
            x.push_row(&[i as f64 * 1e-3]);
            y.push(1.0);
        }
        for i in 0..18 {
            x.push_row(&[100.0 + i as f64]);
            y.push(-1.0);
        }
        let backend = KnnBackend { k: None };
        let model = backend.fit(&task(), &x, &y, 0).unwrap();
        assert_eq!(model.predict(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn standardization_makes_coordinates_comparable() {
        // Feature 0 spans [0, 1000], feature 1 spans [0, 1]. Without
        // standardization feature 1 would be invisible to the metric.
        let mut x = FeatureMatrix::new(2);
        let mut y = Vec::new();
        for i in 0..40 {
            let big = (i % 20) as f64 * 50.0;
            let small = if i < 20 { 0.0 } else { 1.0 };
            x.push_row(&[big, small]);
            y.push(if i < 20 { -1.0 } else { 1.0 });
        }
        let backend = KnnBackend { k: Some(5) };
        let model = backend.fit(&task(), &x, &y, 0).unwrap();
        assert_eq!(model.predict(&[500.0, 1.0]).unwrap(), 1.0);
        assert_eq!(model.predict(&[500.0, 0.0]).unwrap(), -1.0);
    }

    #[test]
    fn row_order_invariance() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()])
            .collect();
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.2).sin()).collect();
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
        let backend = KnnBackend { k: Some(7) };
        let a = backend.fit(&task(), &fwd, &y, 0).unwrap();
        let b = backend.fit(&task(), &rev, &y_rev, 0).unwrap();
        for q in [[0.1, 0.2], [-0.4, 0.9]] {
            assert_eq!(a.predict(&q).unwrap(), b.predict(&q).unwrap());
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let x = matrix(&[&[0.0, 1.0]]);
        let backend = KnnBackend { k: None };
        let model = backend.fit(&task(), &x, &[0.5], 0).unwrap();
        assert!(model.predict(&[0.0]).is_err());
    }
}
