//! Core data model: trajectories of (state, action, optional reward)
//! triplets, datasets of i.i.d. trajectories, and window extraction over the
//! joint state-action sequence.
//!
//! Time indices in the public API and in error messages are 1-based
//! (`t = 1..=T`); storage is 0-based internally. All values are validated to
//! be finite at construction, so downstream numerics never see NaN or
//! infinity. Types are immutable after construction and safe to share across
//! parallel workers.

use crate::error::{Error, Result};

/// One observed trajectory: states `S_t` (p-dimensional), scalar actions
/// `A_t`, and optional scalar rewards `R_t`, for `t = 1..=T`.
///
/// Rewards are carried as payload only; the order-determination statistic
/// never reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<f64>, // row-major, T x p
    actions: Vec<f64>,
    rewards: Option<Vec<f64>>,
    p: usize,
}

/// The joint state-action vector `X_t = (S_t', A_t)'`, of dimension `p + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainVector {
    values: Vec<f64>,
}

impl ChainVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// A contiguous slab of chain vectors `X_{t1}, ..., X_{t2}` flattened into a
/// single vector in increasing-`t` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    flat: Vec<f64>,
    span: (usize, usize),
}

impl Window {
    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    /// The 1-based inclusive span `(t1, t2)` this window covers.
    pub fn span(&self) -> (usize, usize) {
        self.span
    }
}

impl Trajectory {
    /// Build a trajectory from per-step state vectors, validating shape and
    /// finiteness.
    pub fn new(
        states: Vec<Vec<f64>>,
        actions: Vec<f64>,
        rewards: Option<Vec<f64>>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::validation("trajectory must have length T >= 1"));
        }
        let p = states[0].len();
        let t_len = states.len();
        let mut flat = Vec::with_capacity(t_len * p);
        for (i, s) in states.iter().enumerate() {
            if s.len() != p {
                return Err(Error::validation(format!(
                    "state at t={} has dimension {} but t=1 has dimension {}",
                    i + 1,
                    s.len(),
                    p
                )));
            }
            flat.extend_from_slice(s);
        }
        Self::from_flat(flat, p, actions, rewards)
    }

    /// Build a trajectory from a row-major `T x p` state buffer.
    pub fn from_flat(
        states: Vec<f64>,
        p: usize,
        actions: Vec<f64>,
        rewards: Option<Vec<f64>>,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::validation("state dimension p must be >= 1"));
        }
        if states.is_empty() || states.len() % p != 0 {
            return Err(Error::validation(format!(
                "state buffer length {} is not a positive multiple of p={}",
                states.len(),
                p
            )));
        }
        let t_len = states.len() / p;
        if actions.len() != t_len {
            return Err(Error::validation(format!(
                "trajectory has {} states but {} actions",
                t_len,
                actions.len()
            )));
        }
        if let Some(r) = &rewards {
            if r.len() != t_len {
                return Err(Error::validation(format!(
                    "trajectory has {} states but {} rewards",
                    t_len,
                    r.len()
                )));
            }
        }
        let all_finite = states.iter().all(|v| v.is_finite())
            && actions.iter().all(|v| v.is_finite())
            && rewards
                .iter()
                .all(|r| r.iter().all(|v| v.is_finite()));
        if !all_finite {
            return Err(Error::validation("trajectory contains non-finite values"));
        }
        Ok(Trajectory {
            states,
            actions,
            rewards,
            p,
        })
    }

    /// Trajectory length `T`.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        false // T >= 1 by construction
    }

    /// State dimension `p`.
    pub fn state_dim(&self) -> usize {
        self.p
    }

    /// The state vector `S_t` for 1-based `t`.
    pub fn state(&self, t: usize) -> Result<&[f64]> {
        self.check_t(t)?;
        Ok(&self.states[(t - 1) * self.p..t * self.p])
    }

    /// The action `A_t` for 1-based `t`.
    pub fn action(&self, t: usize) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.actions[t - 1])
    }

    pub fn rewards(&self) -> Option<&[f64]> {
        self.rewards.as_deref()
    }

    /// The joint vector `X_t = (S_t', A_t)'`.
    pub fn chain_vector(&self, t: usize) -> Result<ChainVector> {
        self.check_t(t)?;
        let mut values = Vec::with_capacity(self.p + 1);
        values.extend_from_slice(&self.states[(t - 1) * self.p..t * self.p]);
        values.push(self.actions[t - 1]);
        Ok(ChainVector { values })
    }

    /// The flattened window `(X_{t1}', ..., X_{t2}')'` for a 1-based
    /// inclusive span `t1 <= t2`.
    pub fn window(&self, t1: usize, t2: usize) -> Result<Window> {
        if t1 == 0 || t2 == 0 || t1 > t2 || t2 > self.len() {
            return Err(Error::validation(format!(
                "invalid window span ({t1}, {t2}) for trajectory of length {}",
                self.len()
            )));
        }
        let width = self.p + 1;
        let mut flat = Vec::with_capacity((t2 - t1 + 1) * width);
        for t in t1..=t2 {
            flat.extend_from_slice(&self.states[(t - 1) * self.p..t * self.p]);
            flat.push(self.actions[t - 1]);
        }
        Ok(Window {
            flat,
            span: (t1, t2),
        })
    }

    /// Contiguous `T x (p+1)` layout of the chain vectors, for fast repeated
    /// window slicing in the evaluation loops.
    pub fn chain_matrix(&self) -> ChainMatrix {
        let width = self.p + 1;
        let t_len = self.len();
        let mut data = Vec::with_capacity(t_len * width);
        for t in 0..t_len {
            data.extend_from_slice(&self.states[t * self.p..(t + 1) * self.p]);
            data.push(self.actions[t]);
        }
        ChainMatrix { data, width, t_len }
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.len() {
            return Err(Error::validation(format!(
                "time index t={} out of range 1..={}",
                t,
                self.len()
            )));
        }
        Ok(())
    }
}

/// Preassembled chain vectors of one trajectory; `window(t1, t2)` is a
/// borrow, so the evaluation loops never copy.
#[derive(Debug, Clone)]
pub struct ChainMatrix {
    data: Vec<f64>,
    width: usize,
    t_len: usize,
}

impl ChainMatrix {
    /// Flattened `(X_{t1}', ..., X_{t2}')'` as a borrowed slice (1-based
    /// inclusive span; caller guarantees `1 <= t1 <= t2 <= T`).
    pub fn window(&self, t1: usize, t2: usize) -> &[f64] {
        debug_assert!(t1 >= 1 && t1 <= t2 && t2 <= self.t_len);
        &self.data[(t1 - 1) * self.width..t2 * self.width]
    }

    /// The single chain vector `X_t`.
    pub fn chain_vector(&self, t: usize) -> &[f64] {
        self.window(t, t)
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// A sample of `N` i.i.d. trajectories sharing the same length `T` and state
/// dimension `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    trajectories: Vec<Trajectory>,
    p: usize,
    t_len: usize,
}

impl Dataset {
    /// Validate and assemble a dataset. Requires `N >= 2` so the sample can
    /// be split into non-empty halves, and identical `(T, p)` across
    /// trajectories.
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        if trajectories.len() < 2 {
            return Err(Error::validation(format!(
                "dataset needs at least 2 trajectories, got {}",
                trajectories.len()
            )));
        }
        let p = trajectories[0].state_dim();
        let t_len = trajectories[0].len();
        for (j, traj) in trajectories.iter().enumerate() {
            if traj.state_dim() != p || traj.len() != t_len {
                return Err(Error::validation(format!(
                    "trajectory {} has (T={}, p={}) but trajectory 1 has (T={}, p={})",
                    j + 1,
                    traj.len(),
                    traj.state_dim(),
                    t_len,
                    p
                )));
            }
        }
        Ok(Dataset {
            trajectories,
            p,
            t_len,
        })
    }

    pub fn num_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    pub fn state_dim(&self) -> usize {
        self.p
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    /// Trajectory by 0-based index.
    pub fn trajectory(&self, j: usize) -> &Trajectory {
        &self.trajectories[j]
    }

    /// Chain matrices for every trajectory, in order.
    pub fn chain_matrices(&self) -> Vec<ChainMatrix> {
        self.trajectories.iter().map(|t| t.chain_matrix()).collect()
    }
}
