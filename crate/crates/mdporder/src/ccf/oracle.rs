//! Exact-oracle backend: wraps a user-supplied closed-form function of the
//! task and the query window, bypassing estimation entirely.
//!
//! Used in verification against processes whose conditional characteristic
//! functions are computable exactly (see [`crate::enumchain`]); never
//! reachable from configuration or the command line.

use std::sync::Arc;

use crate::ccf::backend::{check_fit_inputs, check_query_dim, CcfEstimator, RegressionBackend};
use crate::ccf::{CcfTask, FeatureMatrix};
use crate::error::Result;

/// Closed form evaluated at `(task, query window)`.
pub type OracleFn = dyn Fn(&CcfTask, &[f64]) -> f64 + Send + Sync;

pub struct OracleBackend {
    func: Arc<OracleFn>,
}

impl OracleBackend {
    pub fn new(func: impl Fn(&CcfTask, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        OracleBackend {
            func: Arc::new(func),
        }
    }
}

struct OracleModel {
    func: Arc<OracleFn>,
    task: CcfTask,
    dim: usize,
}

impl RegressionBackend for OracleBackend {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn fit(
        &self,
        task: &CcfTask,
        features: &FeatureMatrix,
        targets: &[f64],
        _seed: u64,
    ) -> Result<Box<dyn CcfEstimator>> {
        // Training rows are ignored, but the contract (>= 1 row, matching
        // target count) still holds so the oracle is a drop-in substitute.
        check_fit_inputs(features, targets)?;
        Ok(Box::new(OracleModel {
            func: Arc::clone(&self.func),
            task: task.clone(),
            dim: features.cols(),
        }))
    }
}

impl CcfEstimator for OracleModel {
    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, features: &[f64]) -> Result<f64> {
        check_query_dim(self.dim, features)?;
        Ok((self.func)(&self.task, features))
    }
}
