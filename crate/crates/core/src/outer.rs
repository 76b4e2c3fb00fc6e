//! Converse bound: any achievable pair satisfies, for some per-state joint
//! law `phi(x1, x2 | u)` whose chain has stationary law `pi`,
//!
//! ```text
//! R1      <= sum_u pi_u H(X1 | X2, u)
//! R2      <= sum_u pi_u H(X2 | X1, u)
//! R1 + R2 <= sum_u pi_u H(X1, X2 | u)
//! ```
//!
//! The stationarity constraint is eliminated by computing `pi` from `phi`
//! through the same birth-death kernel used for the inner bound, so the
//! search space is a product of per-state simplices.

use serde::{Deserialize, Serialize};

use crate::chain::{
    build_kernel, stationary, EnergyBudget, MarginalPolicy, StatePolicy, StationaryDistribution,
};
use crate::entropy::{joint_entropy, marginals_and_conditionals, JointSymbolDist};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::search::{default_starts, multi_start, SearchConfig, SeparableObjective, StateTerms};

/// One joint symbol law per energy state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointStatePolicy<T> {
    budget: EnergyBudget,
    dists: Vec<JointSymbolDist<T>>,
}

impl<T: Scalar> JointStatePolicy<T> {
    /// Node 1 cannot send "1" in state 0, node 2 cannot in state `U`.
    pub fn new(budget: EnergyBudget, dists: Vec<JointSymbolDist<T>>) -> Result<Self> {
        if dists.len() != budget.states() {
            return Err(Error::PolicyLength {
                expected: budget.states(),
                got: dists.len(),
            });
        }
        let first = dists[0];
        let node1_at_zero = first.get(1, 0) + first.get(1, 1);
        if node1_at_zero > T::zero() {
            return Err(Error::ZeroEnergyViolation {
                node: 1,
                value: node1_at_zero.to_f64_lossy(),
            });
        }
        let last = dists[dists.len() - 1];
        let node2_at_full = last.get(0, 1) + last.get(1, 1);
        if node2_at_full > T::zero() {
            return Err(Error::ZeroEnergyViolation {
                node: 2,
                value: node2_at_full.to_f64_lossy(),
            });
        }
        Ok(Self { budget, dists })
    }

    /// Product laws of a marginal policy.
    pub fn from_marginal(policy: &MarginalPolicy<T>) -> Self {
        let budget = policy.budget();
        Self {
            budget,
            dists: (0..budget.states()).map(|u| policy.joint_at(u)).collect(),
        }
    }

    pub fn dists(&self) -> &[JointSymbolDist<T>] {
        &self.dists
    }
}

impl<T: Scalar> StatePolicy<T> for JointStatePolicy<T> {
    fn budget(&self) -> EnergyBudget {
        self.budget
    }

    fn joint_at(&self, u: usize) -> JointSymbolDist<T> {
        self.dists[u]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterBoundValues<T> {
    pub r1_bound: T,
    pub r2_bound: T,
    pub sum_bound: T,
    pub stationary: StationaryDistribution<T>,
}

/// Per-state rewards `[H(X1|X2), H(X2|X1), H(X1,X2)]`.
fn state_rewards<T: Scalar>(d: &JointSymbolDist<T>) -> [T; 3] {
    let mc = marginals_and_conditionals(d);
    [
        mc.entropy_x1_given_x2(),
        mc.entropy_x2_given_x1(),
        joint_entropy(d),
    ]
}

pub fn outer_values<T: Scalar>(policy: &JointStatePolicy<T>) -> Result<OuterBoundValues<T>> {
    let pi = stationary(&build_kernel(policy)?)?;
    let mut acc = [T::zero(); 3];
    for (d, &w) in policy.dists.iter().zip(pi.probs()) {
        for (a, r) in acc.iter_mut().zip(state_rewards(d)) {
            *a = *a + w * r;
        }
    }
    Ok(OuterBoundValues {
        r1_bound: acc[0],
        r2_bound: acc[1],
        sum_bound: acc[2],
        stationary: pi,
    })
}

/// Largest `lambda R1 + (1 - lambda) R2` over the pentagon cut out by the
/// three bounds.
fn pentagon_support<T: Scalar>(lambda: T, r1: T, r2: T, sum: T) -> T {
    let one = T::one();
    if lambda >= T::lit(0.5) {
        let a = r1.min(sum);
        let b = r2.min(sum - a).max(T::zero());
        lambda * a + (one - lambda) * b
    } else {
        let b = r2.min(sum);
        let a = r1.min(sum - b).max(T::zero());
        lambda * a + (one - lambda) * b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum OuterGoal<T> {
    Sum,
    Weighted(T),
}

/// Stick-breaking coordinates: state 0 and state `U` have one coordinate
/// (the mass on `(0,0)`), interior states three.
struct OuterObjective<T> {
    total: usize,
    goal: OuterGoal<T>,
    coord_state: Vec<usize>,
    offsets: Vec<usize>,
}

impl<T: Scalar> OuterObjective<T> {
    fn new(total: usize, goal: OuterGoal<T>) -> Self {
        let mut coord_state = Vec::new();
        let mut offsets = Vec::new();
        for u in 0..=total {
            offsets.push(coord_state.len());
            let width = if u == 0 || u == total { 1 } else { 3 };
            coord_state.extend(std::iter::repeat_n(u, width));
        }
        Self {
            total,
            goal,
            coord_state,
            offsets,
        }
    }

    fn dist(&self, x: &[T], u: usize) -> [T; 4] {
        let s = &x[self.offsets[u]..];
        let one = T::one();
        if u == 0 {
            [s[0], one - s[0], T::zero(), T::zero()]
        } else if u == self.total {
            [s[0], T::zero(), one - s[0], T::zero()]
        } else {
            let rest = one - s[0];
            let tail = rest * (one - s[1]);
            [s[0], rest * s[1], tail * s[2], tail * (one - s[2])]
        }
    }

    fn coords_of(&self, d: &JointSymbolDist<T>, u: usize) -> Vec<T> {
        let [p00, p01, p10, p11] = d.probs();
        let half = T::lit(0.5);
        if u == 0 || u == self.total {
            return vec![p00];
        }
        let rest = T::one() - p00;
        let s1 = if rest > T::zero() { p01 / rest } else { half };
        let s2 = if p10 + p11 > T::zero() {
            p10 / (p10 + p11)
        } else {
            half
        };
        vec![p00, s1, s2]
    }

    fn coords(&self, policy: &JointStatePolicy<T>) -> Vec<T> {
        (0..=self.total)
            .flat_map(|u| self.coords_of(&policy.dists[u], u))
            .collect()
    }

    fn policy(&self, budget: EnergyBudget, x: &[T]) -> Result<JointStatePolicy<T>> {
        let dists = (0..=self.total)
            .map(|u| JointSymbolDist::new(self.dist(x, u)))
            .collect::<Result<Vec<_>>>()?;
        JointStatePolicy::new(budget, dists)
    }
}

impl<T: Scalar> SeparableObjective<T> for OuterObjective<T> {
    fn dim(&self) -> usize {
        self.coord_state.len()
    }

    fn states(&self) -> usize {
        self.total + 1
    }

    fn state_of(&self, coord: usize) -> usize {
        self.coord_state[coord]
    }

    fn terms(&self, x: &[T], u: usize) -> StateTerms<T> {
        let phi = self.dist(x, u);
        let d = JointSymbolDist::new(phi).unwrap_or_else(|_| {
            let s = phi.iter().fold(T::zero(), |a, &b| a + b);
            JointSymbolDist::new(phi.map(|v| v / s)).expect("renormalized")
        });
        StateTerms {
            down: phi[2],
            up: phi[1],
            rewards: state_rewards(&d),
        }
    }

    fn combine(&self, avg: [T; 3]) -> T {
        match self.goal {
            OuterGoal::Sum => avg[2],
            OuterGoal::Weighted(l) => T::lit(2.0) * pentagon_support(l, avg[0], avg[1], avg[2]),
        }
    }
}

/// Best joint-state policy found and its bound values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterOptimum<T> {
    pub policy: JointStatePolicy<T>,
    pub values: OuterBoundValues<T>,
    /// The maximized quantity: `sum_bound`, or twice the pentagon support.
    pub objective: T,
    pub restarts_used: usize,
}

fn run_outer<T: Scalar>(
    budget: EnergyBudget,
    goal: OuterGoal<T>,
    search: &SearchConfig,
    seeds: &[JointStatePolicy<T>],
) -> Result<OuterOptimum<T>> {
    if search.restarts == 0 && seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one restart is required".into(),
        ));
    }
    let total = budget.total() as usize;
    let obj = OuterObjective::new(total, goal);
    let grid = |g: T| -> Vec<T> {
        let p = MarginalPolicy::uniform(budget, g).expect("grid value in (0, 1)");
        obj.coords(&JointStatePolicy::from_marginal(&p))
    };
    let mut starts = default_starts(obj.dim(), search, grid);
    for s in seeds {
        if s.budget != budget {
            return Err(Error::InvalidArgument(
                "seed policy has a different budget".into(),
            ));
        }
        starts.push(obj.coords(s));
    }
    let best = multi_start(&obj, &starts, search).expect("nonempty starts");
    let policy = obj.policy(budget, &best.x)?;
    let values = outer_values(&policy)?;
    let objective = match goal {
        OuterGoal::Sum => values.sum_bound,
        OuterGoal::Weighted(l) => {
            T::lit(2.0) * pentagon_support(l, values.r1_bound, values.r2_bound, values.sum_bound)
        }
    };
    Ok(OuterOptimum {
        policy,
        values,
        objective,
        restarts_used: starts.len(),
    })
}

/// Maximizes the sum-rate bound.
pub fn optimize_outer_sum<T: Scalar>(
    budget: EnergyBudget,
    search: &SearchConfig,
) -> Result<OuterOptimum<T>> {
    run_outer(budget, OuterGoal::Sum, search, &[])
}

/// Same as [`optimize_outer_sum`] with extra starting policies, e.g. the
/// product law of an optimized marginal policy.
pub fn optimize_outer_sum_seeded<T: Scalar>(
    budget: EnergyBudget,
    search: &SearchConfig,
    seeds: &[JointStatePolicy<T>],
) -> Result<OuterOptimum<T>> {
    run_outer(budget, OuterGoal::Sum, search, seeds)
}

/// Maximizes `2 (lambda R1 + (1 - lambda) R2)` over the outer region.
pub fn optimize_outer_weighted<T: Scalar>(
    budget: EnergyBudget,
    lambda: T,
    search: &SearchConfig,
) -> Result<OuterOptimum<T>> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "weight {lambda} is outside [0, 1]"
        )));
    }
    run_outer(budget, OuterGoal::Weighted(lambda), search, &[])
}
