//! Pluggable regression backends for the CCF component fits.
//!
//! A backend must be deterministic given its fit seed and must keep
//! predictions inside the convex hull of its training targets; the shipped
//! choices are a variance-reduction forest (default), a k-nearest-neighbor
//! averager on standardized features, and an exact closed-form oracle used
//! only in verification.

use crate::ccf::{CcfTask, FeatureMatrix};
use crate::error::{Error, Result};

/// A fitted conditional-characteristic-function component estimator.
pub trait CcfEstimator: Send + Sync {
    /// Dimension of the feature vectors this model was fit on.
    fn feature_dim(&self) -> usize;

    /// Predict at one query point. Errors on dimension mismatch; otherwise
    /// the result is finite and lies in `[-1, 1]`.
    fn predict(&self, features: &[f64]) -> Result<f64>;
}

/// A regression procedure that turns training rows into a fitted estimator.
pub trait RegressionBackend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Fit one task. `seed` fully determines any internal randomness.
    /// Requires at least one training row; identical feature rows are legal
    /// and degrade gracefully to target averaging.
    fn fit(
        &self,
        task: &CcfTask,
        features: &FeatureMatrix,
        targets: &[f64],
        seed: u64,
    ) -> Result<Box<dyn CcfEstimator>>;
}

/// Backend selection plus hyperparameters, as carried in configuration.
/// The exact oracle is deliberately not constructible from configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Forest { trees: usize, min_leaf: usize },
    Knn { k: Option<usize> },
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Forest {
            trees: 100,
            min_leaf: 5,
        }
    }
}

impl BackendSpec {
    pub fn build(&self) -> Result<Box<dyn RegressionBackend>> {
        match self {
            BackendSpec::Forest { trees, min_leaf } => {
                if *trees == 0 || *min_leaf == 0 {
                    return Err(Error::validation(
                        "forest needs trees >= 1 and min-leaf >= 1".to_string(),
                    ));
                }
                Ok(Box::new(super::forest::ForestBackend {
                    trees: *trees,
                    min_leaf: *min_leaf,
                    ..Default::default()
                }))
            }
            BackendSpec::Knn { k } => {
                if k == &Some(0) {
                    return Err(Error::validation("knn needs k >= 1".to_string()));
                }
                Ok(Box::new(super::knn::KnnBackend { k: *k }))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BackendSpec::Forest { .. } => "forest",
            BackendSpec::Knn { .. } => "knn",
        }
    }
}

pub(crate) fn check_fit_inputs(features: &FeatureMatrix, targets: &[f64]) -> Result<()> {
    if features.rows() == 0 {
        return Err(Error::validation("cannot fit on zero training rows".to_string()));
    }
    if features.rows() != targets.len() {
        return Err(Error::validation(format!(
            "feature rows ({}) and targets ({}) disagree",
            features.rows(),
            targets.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_query_dim(dim: usize, features: &[f64]) -> Result<()> {
    if features.len() != dim {
        return Err(Error::validation(format!(
            "query has dimension {}, model was fit on dimension {}",
            features.len(),
            dim
        )));
    }
    Ok(())
}

/// Row indices sorted lexicographically by (feature vector, target). Fitting
/// through this order makes every backend a function of the training
/// multiset alone: relabeling or reordering training trajectories cannot
/// change the fit.
pub(crate) fn canonical_row_order(features: &FeatureMatrix, targets: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..features.rows() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        let (ra, rb) = (features.row(a as usize), features.row(b as usize));
        for (x, y) in ra.iter().zip(rb) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        targets[a as usize].total_cmp(&targets[b as usize])
    });
    order
}
