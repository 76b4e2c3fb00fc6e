//! The energy-state birth-death chain.
//!
//! The state `u` is the number of units held by node 1; node 2 holds `U - u`.
//! A channel use with symbols `(1, 0)` moves the state to `u - 1`, `(0, 1)`
//! moves it to `u + 1`, and `(0, 0)` / `(1, 1)` leave it unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{joint_from_marginals, BernoulliParam, JointSymbolDist};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Total number of energy units `U >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct EnergyBudget(u32);

impl EnergyBudget {
    pub fn new(total_units: u32) -> Result<Self> {
        if total_units == 0 {
            return Err(Error::EmptyBudget);
        }
        Ok(Self(total_units))
    }

    pub fn total(self) -> u32 {
        self.0
    }

    /// Number of chain states, `U + 1`.
    pub fn states(self) -> usize {
        self.0 as usize + 1
    }

    /// The level node 2 is at when the chain is in state `u`.
    pub fn complement(self, u: usize) -> usize {
        self.0 as usize - u
    }
}

impl TryFrom<u32> for EnergyBudget {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EnergyBudget> for u32 {
    fn from(b: EnergyBudget) -> u32 {
        b.0
    }
}

/// Anything that fixes a joint symbol law for each energy state.
pub trait StatePolicy<T: Scalar> {
    fn budget(&self) -> EnergyBudget;

    /// Joint law of `(x1, x2)` while the chain sits in state `u`.
    fn joint_at(&self, u: usize) -> JointSymbolDist<T>;
}

/// Per-node probability of sending "1", indexed by the node's own energy.
///
/// `p1[e]` is used by node 1 when it holds `e` units, `p2[e]` by node 2 when
/// it holds `e` units. Both entries at `e = 0` are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalPolicy<T> {
    budget: EnergyBudget,
    p1: Vec<T>,
    p2: Vec<T>,
}

impl<T: Scalar> MarginalPolicy<T> {
    pub fn new(budget: EnergyBudget, p1: Vec<T>, p2: Vec<T>) -> Result<Self> {
        for (node, p) in [(1u8, &p1), (2u8, &p2)] {
            if p.len() != budget.states() {
                return Err(Error::PolicyLength {
                    expected: budget.states(),
                    got: p.len(),
                });
            }
            for &v in p.iter() {
                BernoulliParam::new(v)?;
            }
            if p[0] != T::zero() {
                return Err(Error::ZeroEnergyViolation {
                    node,
                    value: p[0].to_f64_lossy(),
                });
            }
        }
        Ok(Self { budget, p1, p2 })
    }

    /// Both nodes send "1" with probability `p` at every nonzero level.
    pub fn uniform(budget: EnergyBudget, p: T) -> Result<Self> {
        let mut v = vec![p; budget.states()];
        v[0] = T::zero();
        Self::new(budget, v.clone(), v)
    }

    /// Builds a policy from the free entries `p1[1..=U]` followed by `p2[1..=U]`.
    pub fn from_free(budget: EnergyBudget, free: &[T]) -> Result<Self> {
        let u = budget.total() as usize;
        if free.len() != 2 * u {
            return Err(Error::PolicyLength {
                expected: 2 * u,
                got: free.len(),
            });
        }
        let mut p1 = vec![T::zero()];
        p1.extend_from_slice(&free[..u]);
        let mut p2 = vec![T::zero()];
        p2.extend_from_slice(&free[u..]);
        Self::new(budget, p1, p2)
    }

    pub fn p1(&self) -> &[T] {
        &self.p1
    }

    pub fn p2(&self) -> &[T] {
        &self.p2
    }

    /// True when every nonzero level has `0 < p < 1`, which makes the
    /// induced chain irreducible.
    pub fn is_strictly_interior(&self) -> bool {
        self.p1[1..]
            .iter()
            .chain(self.p2[1..].iter())
            .all(|&v| v > T::zero() && v < T::one())
    }

    /// Swaps the roles of the two nodes.
    pub fn swapped(&self) -> Self {
        Self {
            budget: self.budget,
            p1: self.p2.clone(),
            p2: self.p1.clone(),
        }
    }
}

impl<T: Scalar> StatePolicy<T> for MarginalPolicy<T> {
    fn budget(&self) -> EnergyBudget {
        self.budget
    }

    fn joint_at(&self, u: usize) -> JointSymbolDist<T> {
        let b = self.budget.complement(u);
        joint_from_marginals(BernoulliParam(self.p1[u]), BernoulliParam(self.p2[b]))
    }
}

/// Tridiagonal transition matrix of the energy chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionKernel<T> {
    budget: EnergyBudget,
    down: Vec<T>,
    up: Vec<T>,
}

impl<T: Scalar> TransitionKernel<T> {
    /// Builds a kernel from per-state move probabilities. `down[0]` and
    /// `up[U]` must be zero and `down[u] + up[u] <= 1`.
    pub fn from_moves(budget: EnergyBudget, down: Vec<T>, up: Vec<T>) -> Result<Self> {
        let n = budget.states();
        for v in [&down, &up] {
            if v.len() != n {
                return Err(Error::PolicyLength {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        if down[0] != T::zero() {
            return Err(Error::ZeroEnergyViolation {
                node: 1,
                value: down[0].to_f64_lossy(),
            });
        }
        if up[n - 1] != T::zero() {
            return Err(Error::ZeroEnergyViolation {
                node: 2,
                value: up[n - 1].to_f64_lossy(),
            });
        }
        for (&d, &u) in down.iter().zip(&up) {
            BernoulliParam::new(d)?;
            BernoulliParam::new(u)?;
            if d + u > T::one() + T::normalization_tol() {
                return Err(Error::NotNormalized {
                    sum: (d + u).to_f64_lossy(),
                });
            }
        }
        Ok(Self { budget, down, up })
    }

    pub fn budget(&self) -> EnergyBudget {
        self.budget
    }

    /// `q[u][u-1]` for every state.
    pub fn down(&self) -> &[T] {
        &self.down
    }

    /// `q[u][u+1]` for every state.
    pub fn up(&self) -> &[T] {
        &self.up
    }

    pub fn stay(&self, u: usize) -> T {
        T::one() - self.down[u] - self.up[u]
    }

    /// Transition probability from `from` to `to`.
    pub fn prob(&self, from: usize, to: usize) -> T {
        if to + 1 == from {
            self.down[from]
        } else if to == from + 1 {
            self.up[from]
        } else if to == from {
            self.stay(from)
        } else {
            T::zero()
        }
    }

    /// Dense row-stochastic matrix.
    pub fn rows(&self) -> Vec<Vec<T>> {
        let n = self.budget.states();
        (0..n)
            .map(|i| (0..n).map(|j| self.prob(i, j)).collect())
            .collect()
    }
}

/// Builds the chain induced by a state policy.
pub fn build_kernel<T: Scalar, P: StatePolicy<T> + ?Sized>(
    policy: &P,
) -> Result<TransitionKernel<T>> {
    let budget = policy.budget();
    let n = budget.states();
    let mut down = Vec::with_capacity(n);
    let mut up = Vec::with_capacity(n);
    for u in 0..n {
        let d = policy.joint_at(u);
        if u == 0 && (d.get(1, 0) > T::zero() || d.get(1, 1) > T::zero()) {
            return Err(Error::ZeroEnergyViolation {
                node: 1,
                value: (d.get(1, 0) + d.get(1, 1)).to_f64_lossy(),
            });
        }
        if u == n - 1 && (d.get(0, 1) > T::zero() || d.get(1, 1) > T::zero()) {
            return Err(Error::ZeroEnergyViolation {
                node: 2,
                value: (d.get(0, 1) + d.get(1, 1)).to_f64_lossy(),
            });
        }
        down.push(d.one_zero());
        up.push(d.zero_one());
    }
    Ok(TransitionKernel { budget, down, up })
}

/// Long-run state probabilities of the energy chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution<T> {
    pi: Vec<T>,
}

impl<T: Scalar> StationaryDistribution<T> {
    pub fn probs(&self) -> &[T] {
        &self.pi
    }

    pub fn get(&self, u: usize) -> T {
        self.pi[u]
    }

    /// Largest entry of `|pi - pi Q|`.
    pub fn balance_residual(&self, kernel: &TransitionKernel<T>) -> T {
        let n = self.pi.len();
        (0..n)
            .map(|j| {
                let mut inflow = self.pi[j] * kernel.stay(j);
                if j > 0 {
                    inflow = inflow + self.pi[j - 1] * kernel.up[j - 1];
                }
                if j + 1 < n {
                    inflow = inflow + self.pi[j + 1] * kernel.down[j + 1];
                }
                (inflow - self.pi[j]).abs()
            })
            .fold(T::zero(), T::max)
    }
}

/// Solves global balance through the detailed-balance product
/// `pi[u+1] = pi[u] * up[u] / down[u+1]`, in the log domain.
pub fn stationary<T: Scalar>(kernel: &TransitionKernel<T>) -> Result<StationaryDistribution<T>> {
    let n = kernel.budget.states();
    let mut log_w = Vec::with_capacity(n);
    log_w.push(T::zero());
    for u in 0..n - 1 {
        if kernel.up[u] <= T::zero() {
            return Err(Error::NotIrreducible { state: u });
        }
        if kernel.down[u + 1] <= T::zero() {
            return Err(Error::NotIrreducible { state: u + 1 });
        }
        let next = log_w[u] + kernel.up[u].ln() - kernel.down[u + 1].ln();
        log_w.push(next);
    }
    let max = log_w.iter().copied().fold(T::neg_infinity(), T::max);
    let w: Vec<T> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let total = w.iter().fold(T::zero(), |a, &b| a + b);
    Ok(StationaryDistribution {
        pi: w.into_iter().map(|v| v / total).collect(),
    })
}

/// Runs the chain for `steps` transitions and returns the fraction of steps
/// spent in each state (the state before each transition is counted).
pub fn simulate_chain<T: Scalar>(
    kernel: &TransitionKernel<T>,
    steps: u64,
    initial_state: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = kernel.budget.states();
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if initial_state >= n {
        return Err(Error::StateOutOfRange {
            state: initial_state,
            total: kernel.budget.total(),
        });
    }
    let down: Vec<f64> = kernel.down.iter().map(|v| v.to_f64_lossy()).collect();
    let up: Vec<f64> = kernel.up.iter().map(|v| v.to_f64_lossy()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; n];
    let mut u = initial_state;
    for _ in 0..steps {
        counts[u] += 1;
        let r: f64 = rng.gen();
        if r < down[u] {
            u -= 1;
        } else if r < down[u] + up[u] {
            u += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / steps as f64)
        .collect())
}

/// Limit of `sqrt(steps)` times the standard deviation of the occupancy of
/// `state` reported by [`simulate_chain`]:
/// `sqrt(pi_s (1 - pi_s) + 2 pi_s sum_{k >= 1} (P^k(s, s) - pi_s))`.
///
/// Slowly mixing chains have values far above 1.
pub fn occupancy_clt_std<T: Scalar>(
    kernel: &TransitionKernel<T>,
    pi: &StationaryDistribution<T>,
    state: usize,
) -> Result<f64> {
    let n = kernel.budget.states();
    if state >= n {
        return Err(Error::StateOutOfRange {
            state,
            total: kernel.budget.total(),
        });
    }
    let down: Vec<f64> = kernel.down.iter().map(|v| v.to_f64_lossy()).collect();
    let up: Vec<f64> = kernel.up.iter().map(|v| v.to_f64_lossy()).collect();
    let ps = pi.get(state).to_f64_lossy();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    v[state] = 1.0;
    let mut tail = 0.0;
    let mut quiet = 0;
    // Terms decay geometrically; stop once they stay at rounding level.
    for _ in 0..100_000_000u64 {
        next.iter_mut().for_each(|x| *x = 0.0);
        for u in 0..n {
            let stay = 1.0 - down[u] - up[u];
            next[u] += v[u] * stay;
            if u > 0 {
                next[u - 1] += v[u] * down[u];
            }
            if u + 1 < n {
                next[u + 1] += v[u] * up[u];
            }
        }
        std::mem::swap(&mut v, &mut next);
        let term = v[state] - ps;
        tail += term;
        quiet = if term.abs() < 1e-13 { quiet + 1 } else { 0 };
        if quiet == 50 {
            break;
        }
    }
    Ok((ps * (1.0 - ps) + 2.0 * ps * tail).max(0.0).sqrt())
}
