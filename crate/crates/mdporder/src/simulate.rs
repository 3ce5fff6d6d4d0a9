//! Synthetic data generators used by the experiment harness and the test
//! suite: two vector-autoregressive decision processes of true order 2, a
//! glucose-dynamics mimic, and an i.i.d. null model.
//!
//! Generation is a pure function of [`SimSpec`]: every random draw comes
//! from a substream keyed by `(seed, model, trajectory, time step, role)`,
//! so trajectories can be generated independently and in parallel without
//! changing the output.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::trajectory::{Dataset, Trajectory};

/// Which generator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Order-2 process: `S_t = (4/5) M(A_{t-1}) S_{t-2} + eps_t`.
    Model1,
    /// Local order-2 process whose lag-2 coefficient shrinks with `N*T`.
    Model2,
    /// Three-dimensional glucose/intake/exercise mimic with lag-2 dynamics.
    Ohio,
    /// No temporal dependence at all; a 1-order process by construction.
    Iid,
}

impl Model {
    /// The true order of the generated process.
    pub fn true_order(&self) -> usize {
        match self {
            Model::Model1 | Model::Model2 | Model::Ohio => 2,
            Model::Iid => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Model1 => "model1",
            Model::Model2 => "model2",
            Model::Ohio => "ohio",
            Model::Iid => "iid",
        }
    }

    fn tag(&self) -> u64 {
        match self {
            Model::Model1 => 1,
            Model::Model2 => 2,
            Model::Ohio => 3,
            Model::Iid => 4,
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "model1" => Ok(Model::Model1),
            "model2" => Ok(Model::Model2),
            "ohio" => Ok(Model::Ohio),
            "iid" => Ok(Model::Iid),
            other => Err(Error::validation(format!(
                "unknown model {other:?} (expected model1, model2, ohio, or iid)"
            ))),
        }
    }
}

/// Full description of one synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub model: Model,
    pub n: usize,
    pub t_len: usize,
    pub p: usize,
    pub seed: u64,
    /// Steps generated and discarded before recording, to approximate
    /// stationarity. Default 100.
    pub burn_in: usize,
    /// Replaces the innovation standard deviation when set (0 switches the
    /// noise off entirely; initial states use the same scale).
    pub noise_scale_override: Option<f64>,
}

impl SimSpec {
    pub fn new(model: Model, n: usize, t_len: usize, p: usize, seed: u64) -> Self {
        SimSpec {
            model,
            n,
            t_len,
            p,
            seed,
            burn_in: 100,
            noise_scale_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::validation(format!("N must be >= 2, got {}", self.n)));
        }
        if self.t_len < 10 {
            return Err(Error::validation(format!(
                "T must be >= 10, got {}",
                self.t_len
            )));
        }
        if self.p < 1 {
            return Err(Error::validation("p must be >= 1".to_string()));
        }
        if self.model == Model::Ohio && self.p != 3 {
            return Err(Error::validation(format!(
                "the ohio model is 3-dimensional; got p = {}",
                self.p
            )));
        }
        if let Some(s) = self.noise_scale_override {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::validation(format!(
                    "noise scale override must be a finite non-negative real, got {s}"
                )));
            }
        }
        Ok(())
    }

    /// Innovation standard deviation: the override if given, otherwise the
    /// model default (`sqrt(3/p)` for the VAR models, 1 for ohio and iid).
    fn noise_sd(&self) -> f64 {
        self.noise_scale_override.unwrap_or(match self.model {
            Model::Model1 | Model::Model2 => (3.0 / self.p as f64).sqrt(),
            Model::Ohio | Model::Iid => 1.0,
        })
    }
}

/// Lag-2 coefficient of Model 2, recomputed from the spec's `N` and `T`:
/// `sqrt(ln(NT)^3 / (NT))`. Decays to 0 as `N*T` grows.
pub fn model2_lag2_coef(n: usize, t_len: usize) -> f64 {
    let nt = (n * t_len) as f64;
    (nt.ln().powi(3) / nt).sqrt()
}

/// Glucose-equation coefficients of the ohio model, applied to
/// `X_t = (S_{1,t}, S_{2,t}, S_{3,t}, A_t)`.
pub const OHIO_LAG2_COEF: [f64; 4] = [-0.377, 0.165, 0.329, -5.271];
pub const OHIO_LAG1_COEF: [f64; 4] = [1.145, 0.3, -4.388, -1.387];

/// Action distribution of the ohio model on `{0, 1, 2, 3, 4}`.
pub const OHIO_ACTION_PMF: [f64; 5] = [0.8, 0.155, 0.03, 0.01, 0.005];

/// Deterministic part of the ohio glucose update:
/// `S_{1,t+2} = OHIO_LAG2_COEF . X_t + OHIO_LAG1_COEF . X_{t+1}`.
pub fn ohio_glucose_mean(x_lag2: &[f64; 4], x_lag1: &[f64; 4]) -> f64 {
    let dot = |c: &[f64; 4], x: &[f64; 4]| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    dot(&OHIO_LAG2_COEF, x_lag2) + dot(&OHIO_LAG1_COEF, x_lag1)
}

/// `M(a) s = [a*J + (1-a)*I] s`, where `J` is the anti-diagonal exchange
/// matrix. With binary `a` this either reverses `s` (a = 1) or leaves it
/// unchanged (a = 0).
fn mixed_exchange(a: f64, s: &[f64]) -> Vec<f64> {
    let p = s.len();
    (0..p).map(|i| a * s[p - 1 - i] + (1.0 - a) * s[i]).collect()
}

/// Binary action rule `A_t = 1(sum(S_t) > 0)`.
fn threshold_action(s: &[f64]) -> f64 {
    if s.iter().sum::<f64>() > 0.0 {
        1.0
    } else {
        0.0
    }
}

// Substream roles, combined with (trajectory, time) when keying draws.
const ROLE_INIT: u64 = 0;
const ROLE_NOISE: u64 = 1;
const ROLE_INTAKE: u64 = 2;
const ROLE_EXERCISE: u64 = 3;
const ROLE_ACTION: u64 = 4;

/// Generate a dataset per the spec. Deterministic: equal specs yield
/// identical datasets, independent of thread count.
pub fn simulate(spec: &SimSpec) -> Result<Dataset> {
    spec.validate()?;
    let trajectories: Vec<Trajectory> = (0..spec.n)
        .into_par_iter()
        .map(|j| match spec.model {
            Model::Model1 | Model::Model2 => simulate_var(spec, j as u64),
            Model::Ohio => simulate_ohio_traj(spec, j as u64),
            Model::Iid => simulate_iid_traj(spec, j as u64),
        })
        .collect();
    Dataset::new(trajectories)
}

fn draw_normal_vec(spec: &SimSpec, traj: u64, u: u64, role: u64, sd: f64, dim: usize) -> Vec<f64> {
    let mut rng = substream(spec.seed, &[spec.model.tag(), traj, u, role]);
    if sd == 0.0 {
        return vec![0.0; dim];
    }
    let normal = Normal::new(0.0, sd).expect("finite sd");
    (0..dim).map(|_| normal.sample(&mut rng)).collect()
}

fn simulate_var(spec: &SimSpec, traj: u64) -> Trajectory {
    let p = spec.p;
    let sd = spec.noise_sd();
    let total = spec.burn_in + spec.t_len;
    let lag2 = match spec.model {
        Model::Model1 => 0.8,
        Model::Model2 => model2_lag2_coef(spec.n, spec.t_len),
        _ => unreachable!(),
    };
    let lag1 = match spec.model {
        Model::Model1 => 0.0,
        Model::Model2 => 0.4,
        _ => unreachable!(),
    };

    let mut states: Vec<Vec<f64>> = Vec::with_capacity(total.max(2));
    states.push(draw_normal_vec(spec, traj, 1, ROLE_INIT, sd, p));
    states.push(draw_normal_vec(spec, traj, 2, ROLE_INIT, sd, p));
    for u in 3..=total as u64 {
        let a_prev = threshold_action(&states[states.len() - 1]);
        let m2 = mixed_exchange(a_prev, &states[states.len() - 2]);
        let m1 = mixed_exchange(a_prev, &states[states.len() - 1]);
        let noise = draw_normal_vec(spec, traj, u, ROLE_NOISE, sd, p);
        let s: Vec<f64> = (0..p)
            .map(|i| lag2 * m2[i] + lag1 * m1[i] + noise[i])
            .collect();
        states.push(s);
    }
    finish_trajectory(states, spec.burn_in, spec.t_len, |s| threshold_action(s))
}

fn simulate_ohio_traj(spec: &SimSpec, traj: u64) -> Trajectory {
    let sd = spec.noise_sd();
    let total = spec.burn_in + spec.t_len;
    let chi10 = ChiSquared::new(10.0).expect("valid dof");
    let pois5 = Poisson::new(5.0).expect("valid rate");

    // All of S2, S3, A are drawn fresh at every step; only the glucose
    // coordinate S1 carries lag-2 dynamics.
    let mut xs: Vec<[f64; 4]> = Vec::with_capacity(total.max(2));
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(total.max(2));
    let mut actions: Vec<f64> = Vec::with_capacity(total.max(2));
    for u in 1..=total as u64 {
        let s1 = if u <= 2 {
            draw_normal_vec(spec, traj, u, ROLE_INIT, sd, 1)[0]
        } else {
            let noise = draw_normal_vec(spec, traj, u, ROLE_NOISE, sd, 1)[0];
            ohio_glucose_mean(&xs[xs.len() - 2], &xs[xs.len() - 1]) + noise
        };
        let s2 = {
            let mut rng = substream(spec.seed, &[spec.model.tag(), traj, u, ROLE_INTAKE]);
            if rng.random::<f64>() < 0.1 {
                chi10.sample(&mut rng)
            } else {
                0.0
            }
        };
        let s3 = {
            let mut rng = substream(spec.seed, &[spec.model.tag(), traj, u, ROLE_EXERCISE]);
            if rng.random::<f64>() < 0.015 {
                pois5.sample(&mut rng)
            } else {
                0.0
            }
        };
        let a = {
            let mut rng = substream(spec.seed, &[spec.model.tag(), traj, u, ROLE_ACTION]);
            let draw = rng.random::<f64>();
            let mut cum = 0.0;
            let mut level = OHIO_ACTION_PMF.len() - 1;
            for (idx, w) in OHIO_ACTION_PMF.iter().enumerate() {
                cum += w;
                if draw < cum {
                    level = idx;
                    break;
                }
            }
            level as f64
        };
        xs.push([s1, s2, s3, a]);
        states.push(vec![s1, s2, s3]);
        actions.push(a);
    }

    let start = spec.burn_in;
    build_trajectory(
        states[start..].to_vec(),
        actions[start..].to_vec(),
        spec.t_len,
    )
}

fn simulate_iid_traj(spec: &SimSpec, traj: u64) -> Trajectory {
    let sd = spec.noise_sd();
    let mut states = Vec::with_capacity(spec.t_len);
    let mut actions = Vec::with_capacity(spec.t_len);
    for u in 1..=spec.t_len as u64 {
        states.push(draw_normal_vec(spec, traj, u, ROLE_NOISE, sd, spec.p));
        let mut rng = substream(spec.seed, &[spec.model.tag(), traj, u, ROLE_ACTION]);
        actions.push(if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 });
    }
    build_trajectory(states, actions, spec.t_len)
}

fn finish_trajectory(
    states: Vec<Vec<f64>>,
    burn_in: usize,
    t_len: usize,
    action_rule: impl Fn(&[f64]) -> f64,
) -> Trajectory {
    let kept: Vec<Vec<f64>> = states.into_iter().skip(burn_in).take(t_len).collect();
    let actions: Vec<f64> = kept.iter().map(|s| action_rule(s)).collect();
    build_trajectory(kept, actions, t_len)
}

/// Attach the reward convention `R_t = mean(S_{t+1})`, `R_T = 0`.
fn build_trajectory(states: Vec<Vec<f64>>, actions: Vec<f64>, t_len: usize) -> Trajectory {
    debug_assert_eq!(states.len(), t_len);
    let p = states[0].len();
    let rewards: Vec<f64> = (0..t_len)
        .map(|t| {
            if t + 1 < t_len {
                states[t + 1].iter().sum::<f64>() / p as f64
            } else {
                0.0
            }
        })
        .collect();
    Trajectory::new(states, actions, Some(rewards)).expect("simulated data is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn model1_zero_noise_is_all_zero() {
        let mut spec = SimSpec::new(Model::Model1, 2, 50, 3, 9);
        spec.noise_scale_override = Some(0.0);
        let d = simulate(&spec).unwrap();
        for traj in d.trajectories() {
            for t in 1..=traj.len() {
                assert!(traj.state(t).unwrap().iter().all(|&v| v == 0.0));
                assert_eq!(traj.action(t).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn model2_zero_noise_is_all_zero() {
        let mut spec = SimSpec::new(Model::Model2, 2, 50, 2, 9);
        spec.noise_scale_override = Some(0.0);
        let d = simulate(&spec).unwrap();
        for traj in d.trajectories() {
            for t in 1..=traj.len() {
                assert!(traj.state(t).unwrap().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn model1_hand_recursion() {
        // S_1 = (1, -2), S_2 = (1, 1): A_2 = 1, so S_3 = 0.8 * J * S_1.
        let s1 = [1.0, -2.0];
        let s2 = [1.0, 1.0];
        let a2 = threshold_action(&s2);
        assert_eq!(a2, 1.0);
        let m = mixed_exchange(a2, &s1);
        let s3: Vec<f64> = m.iter().map(|v| 0.8 * v).collect();
        assert_relative_eq!(s3[0], -1.6, max_relative = 1e-15);
        assert_relative_eq!(s3[1], 0.8, max_relative = 1e-15);
    }

    #[test]
    fn threshold_action_is_strict() {
        assert_eq!(threshold_action(&[0.0, 0.0]), 0.0);
        assert_eq!(threshold_action(&[1.0, -1.0]), 0.0);
        assert_eq!(threshold_action(&[1e-9]), 1.0);
    }

    #[test]
    fn model2_coefficient_value_and_limit() {
        // sqrt(ln(2700)^3 / 2700), evaluated directly.
        assert_relative_eq!(
            model2_lag2_coef(6, 450),
            0.427407158808053,
            max_relative = 1e-12
        );
        // Decays to zero along growing N*T.
        let seq: Vec<f64> = [(6, 450), (60, 450), (600, 4500), (6000, 45000)]
            .iter()
            .map(|&(n, t)| model2_lag2_coef(n, t))
            .collect();
        assert!(seq.windows(2).all(|w| w[1] < w[0]));
        assert!(seq.last().unwrap() < &0.06);
    }

    #[test]
    fn ohio_action_pmf_sums_to_one() {
        assert_eq!(OHIO_ACTION_PMF.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn ohio_glucose_mean_dot_products() {
        let x = [1.0, 0.0, 0.0, 0.0];
        assert_relative_eq!(ohio_glucose_mean(&x, &x), 0.768, max_relative = 1e-15);
    }

    #[test]
    fn ohio_rejects_wrong_dimension() {
        let spec = SimSpec::new(Model::Ohio, 2, 50, 2, 1);
        assert!(simulate(&spec).is_err());
    }

    #[test]
    fn ohio_intake_frequency_matches_bernoulli() {
        let spec = SimSpec::new(Model::Ohio, 2, 10_000, 3, 17);
        let d = simulate(&spec).unwrap();
        let mut nonzero = 0usize;
        let mut count = 0usize;
        for traj in d.trajectories() {
            for t in 1..=traj.len() {
                if traj.state(t).unwrap()[1] != 0.0 {
                    nonzero += 1;
                }
                count += 1;
            }
        }
        let frac = nonzero as f64 / count as f64;
        assert!((frac - 0.1).abs() < 0.02, "intake fraction {frac}");
    }

    #[test]
    fn action_ranges_per_model() {
        let d1 = simulate(&SimSpec::new(Model::Model1, 3, 60, 3, 5)).unwrap();
        let d2 = simulate(&SimSpec::new(Model::Model2, 3, 60, 3, 5)).unwrap();
        for d in [&d1, &d2] {
            for traj in d.trajectories() {
                for t in 1..=traj.len() {
                    let a = traj.action(t).unwrap();
                    assert!(a == 0.0 || a == 1.0);
                }
            }
        }
        let do_ = simulate(&SimSpec::new(Model::Ohio, 3, 60, 3, 5)).unwrap();
        for traj in do_.trajectories() {
            for t in 1..=traj.len() {
                let a = traj.action(t).unwrap();
                assert!(a >= 0.0 && a <= 4.0 && a.fract() == 0.0);
            }
        }
    }

    #[test]
    fn iid_has_negligible_lag1_autocorrelation() {
        let spec = SimSpec::new(Model::Iid, 2, 5000, 3, 23);
        let d = simulate(&spec).unwrap();
        let traj = d.trajectory(0);
        let t_len = traj.len();
        for coord in 0..3 {
            let xs: Vec<f64> = (1..=t_len)
                .map(|t| traj.state(t).unwrap()[coord])
                .collect();
            let mean = xs.iter().sum::<f64>() / t_len as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
            let cov: f64 = xs
                .windows(2)
                .map(|w| (w[0] - mean) * (w[1] - mean))
                .sum::<f64>();
            let acf = cov / var;
            assert!(
                acf.abs() < 3.0 / (t_len as f64).sqrt(),
                "coord {coord}: acf = {acf}"
            );
        }
    }

    #[test]
    fn simulation_is_deterministic_per_seed() {
        let spec = SimSpec::new(Model::Model1, 4, 40, 2, 42);
        assert_eq!(simulate(&spec).unwrap(), simulate(&spec).unwrap());

        let mut other = spec.clone();
        other.seed = 43;
        assert_ne!(simulate(&spec).unwrap(), simulate(&other).unwrap());
    }

    #[test]
    fn output_shape_matches_spec() {
        for model in [Model::Model1, Model::Model2, Model::Iid] {
            let spec = SimSpec::new(model, 5, 37, 2, 3);
            let d = simulate(&spec).unwrap();
            assert_eq!(d.num_trajectories(), 5);
            assert_eq!(d.t_len(), 37);
            assert_eq!(d.state_dim(), 2);
        }
        let d = simulate(&SimSpec::new(Model::Ohio, 4, 25, 3, 3)).unwrap();
        assert_eq!(
            (d.num_trajectories(), d.t_len(), d.state_dim()),
            (4, 25, 3)
        );
    }

    #[test]
    fn rewards_follow_the_documented_convention() {
        let spec = SimSpec::new(Model::Model1, 2, 20, 3, 11);
        let d = simulate(&spec).unwrap();
        for traj in d.trajectories() {
            let rewards = traj.rewards().unwrap();
            for t in 1..traj.len() {
                let next = traj.state(t + 1).unwrap();
                let mean = next.iter().sum::<f64>() / next.len() as f64;
                assert_eq!(rewards[t - 1], mean);
            }
            assert_eq!(rewards[traj.len() - 1], 0.0);
        }
    }
}
