//! An exactly solvable two-state chain of true order 2, used to validate the
//! deviation statistic against brute-force enumeration.
//!
//! The state is a bit, the action is the deterministic copy `A_t = S_t`, and
//! `P(S_{t+1} = 1 | S_{t-1}, S_t)` comes from an explicit 2x2 table. Every
//! conditional characteristic function then reduces to a finite sum over bit
//! strings weighted by exact string probabilities, which makes the true
//! `g1`, `g2`, `g3` computable without estimation and the population
//! deviation computable by exhaustive enumeration over window
//! configurations.

use crate::ccf::oracle::OracleBackend;
use crate::ccf::{CcfTask, GKind, Part};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::trajectory::{Dataset, Trajectory};
use rand::Rng;

const CHAIN_STREAM: u64 = 0xb1;

/// Binary order-2 chain with explicit transition table.
#[derive(Debug, Clone, Copy)]
pub struct BinaryOrder2Chain {
    /// `prob_one[i][j] = P(S_{t+1} = 1 | S_{t-1} = i, S_t = j)`.
    prob_one: [[f64; 2]; 2],
    /// Stationary law of the pair `(S_t, S_{t+1})`, indexed `2*i + j`;
    /// precomputed since the enumeration paths consult it per string.
    pair: [f64; 4],
}

impl BinaryOrder2Chain {
    /// A table with strong lag-2 dependence, so order 1 is clearly violated.
    pub fn strongly_order_two() -> Self {
        BinaryOrder2Chain::new([[0.9, 0.3], [0.2, 0.7]]).expect("valid table")
    }

    pub fn new(prob_one: [[f64; 2]; 2]) -> Result<Self> {
        for row in &prob_one {
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::validation(format!(
                        "transition probability {p} outside [0, 1]"
                    )));
                }
            }
        }
        // Iterate the pair chain to its stationary point.
        let mut pair = [0.25f64; 4];
        for _ in 0..2000 {
            let mut next = [0.0f64; 4];
            for i in 0..2 {
                for j in 0..2 {
                    let mass = pair[2 * i + j];
                    let p1 = prob_one[i][j];
                    next[2 * j + 1] += mass * p1;
                    next[2 * j] += mass * (1.0 - p1);
                }
            }
            pair = next;
        }
        Ok(BinaryOrder2Chain { prob_one, pair })
    }

    /// Stationary distribution of the pair `(S_t, S_{t+1})`, indexed
    /// `2*i + j`.
    pub fn stationary_pair(&self) -> [f64; 4] {
        self.pair
    }

    /// Exact probability of observing the consecutive bit string `bits`
    /// under stationarity.
    pub fn string_prob(&self, bits: &[u8]) -> f64 {
        let pair = self.pair;
        match bits.len() {
            0 => 1.0,
            1 => {
                let b = bits[0] as usize;
                pair[2 * b] + pair[2 * b + 1]
            }
            _ => {
                let mut prob = pair[2 * bits[0] as usize + bits[1] as usize];
                for w in bits.windows(3) {
                    let p1 = self.prob_one[w[0] as usize][w[1] as usize];
                    prob *= if w[2] == 1 { p1 } else { 1.0 - p1 };
                }
                prob
            }
        }
    }

    /// True conditional characteristic function component for a task,
    /// evaluated at a query window (flattened `(s, a)` pairs with `a = s`).
    pub fn ccf_value(&self, task: &CcfTask, window: &[f64]) -> f64 {
        let bits = window_bits(window);
        let mu = task.direction.mu[0];
        // With A = S the projection nu'X collapses to (nu_1 + nu_2) * s.
        let nu = task.direction.nu[0] + task.direction.nu[1];
        self.g_component(task.kind, task.part, &bits, mu, nu)
    }

    /// Enumerate the conditional law of the endpoints (past bit for g1/g3,
    /// future bit for g1/g2) given the conditioning bits, and average the
    /// cosine/sine of the projected angle.
    fn g_component(&self, kind: GKind, part: Part, bits: &[u8], mu: f64, nu: f64) -> f64 {
        let with_past = kind != GKind::G2;
        let with_future = kind != GKind::G3;
        let mut numer = 0.0;
        let mut denom = 0.0;
        for past in 0..if with_past { 2u8 } else { 1 } {
            for future in 0..if with_future { 2u8 } else { 1 } {
                let mut string = Vec::with_capacity(bits.len() + 2);
                if with_past {
                    string.push(past);
                }
                string.extend_from_slice(bits);
                if with_future {
                    string.push(future);
                }
                let weight = self.string_prob(&string);
                let mut angle = 0.0;
                if with_future {
                    angle += mu * future as f64;
                }
                if with_past {
                    angle += nu * past as f64;
                }
                numer += weight * part.apply(angle);
                denom += weight;
            }
        }
        numer / denom
    }

    /// Population deviation `Gamma^(k,q)(mu, nu)`: the stationary-weighted
    /// average of the squared factorization defect over all `2^(q+k)` window
    /// configurations.
    pub fn population_gamma(&self, k: usize, q: usize, mu: f64, nu: f64) -> f64 {
        let len = q + k;
        let mut total = 0.0;
        for code in 0..(1usize << len) {
            let window: Vec<u8> = (0..len).map(|i| ((code >> i) & 1) as u8).collect();
            let weight = self.string_prob(&window);
            if weight == 0.0 {
                continue;
            }
            let suffix = &window[q..];
            let (g_rm, g_im) = self.defect(&window, suffix, mu, nu);
            total += weight * (g_rm * g_rm + g_im * g_im);
        }
        total
    }

    /// Real/imaginary factorization defect at one window configuration.
    pub fn defect(&self, window: &[u8], suffix: &[u8], mu: f64, nu: f64) -> (f64, f64) {
        let g1r = self.g_component(GKind::G1, Part::Real, window, mu, nu);
        let g1i = self.g_component(GKind::G1, Part::Imag, window, mu, nu);
        let g2r = self.g_component(GKind::G2, Part::Real, suffix, mu, nu);
        let g2i = self.g_component(GKind::G2, Part::Imag, suffix, mu, nu);
        let g3r = self.g_component(GKind::G3, Part::Real, window, mu, nu);
        let g3i = self.g_component(GKind::G3, Part::Imag, window, mu, nu);
        (
            g1r - g2r * g3r + g2i * g3i,
            g1i - g2i * g3r - g2r * g3i,
        )
    }

    /// Exact-oracle backend evaluating this chain's true components.
    pub fn oracle_backend(&self) -> OracleBackend {
        let chain = *self;
        OracleBackend::new(move |task: &CcfTask, window: &[f64]| chain.ccf_value(task, window))
    }

    /// Sample `n` stationary trajectories of length `t_len` (100 burn-in
    /// steps), with `A_t = S_t` and no rewards.
    pub fn simulate(&self, n: usize, t_len: usize, seed: u64) -> Result<Dataset> {
        let pair = self.stationary_pair();
        let trajectories: Vec<Trajectory> = (0..n)
            .map(|j| {
                let burn = 100;
                let total = burn + t_len;
                let mut bits: Vec<u8> = Vec::with_capacity(total);
                {
                    let mut rng = substream(seed, &[CHAIN_STREAM, j as u64, 0, 0]);
                    let draw = rng.random::<f64>();
                    let mut cum = 0.0;
                    let mut cell = 3;
                    for (idx, w) in pair.iter().enumerate() {
                        cum += w;
                        if draw < cum {
                            cell = idx;
                            break;
                        }
                    }
                    bits.push((cell >> 1) as u8);
                    bits.push((cell & 1) as u8);
                }
                for u in 3..=total as u64 {
                    let mut rng = substream(seed, &[CHAIN_STREAM, j as u64, u, 1]);
                    let p1 = self.prob_one[bits[bits.len() - 2] as usize]
                        [bits[bits.len() - 1] as usize];
                    bits.push(if rng.random::<f64>() < p1 { 1 } else { 0 });
                }
                let kept = &bits[burn..burn + t_len];
                let states: Vec<Vec<f64>> = kept.iter().map(|&b| vec![b as f64]).collect();
                let actions: Vec<f64> = kept.iter().map(|&b| b as f64).collect();
                Trajectory::new(states, actions, None).expect("chain data is well-formed")
            })
            .collect();
        Dataset::new(trajectories)
    }
}

/// Recover the bit string from a flattened window of `(s, a)` pairs.
pub fn window_bits(window: &[f64]) -> Vec<u8> {
    debug_assert_eq!(window.len() % 2, 0);
    window
        .chunks_exact(2)
        .map(|x| u8::from(x[0] > 0.5))
        .collect()
}
