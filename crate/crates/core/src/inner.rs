//! Achievable rates of state-multiplexed, independently generated codebooks.
//!
//! With node `j` drawing its level-`e` codebook i.i.d. Bernoulli(`p_j[e]`),
//! the rate pair
//!
//! ```text
//! R1 = sum_u pi_u H(p1[u]),   R2 = sum_u pi_u H(p2[U - u])
//! ```
//!
//! is achievable, where `pi` is the stationary law of the chain the policy
//! induces. [`optimize_sum_rate`] searches the policy space for the best
//! weighted sum `2 (lambda R1 + (1 - lambda) R2)`.

use serde::{Deserialize, Serialize};

use crate::chain::{
    build_kernel, stationary, EnergyBudget, MarginalPolicy, StationaryDistribution,
};
use crate::entropy::h2;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::search::{default_starts, multi_start, SearchConfig, SeparableObjective, StateTerms};

/// Rates in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair<T> {
    pub r1: T,
    pub r2: T,
}

impl<T: Scalar> RatePair<T> {
    pub fn sum(&self) -> T {
        self.r1 + self.r2
    }

    /// `2 (lambda r1 + (1 - lambda) r2)`; equals `r1 + r2` at `lambda = 1/2`.
    pub fn weighted(&self, lambda: T) -> T {
        let two = T::lit(2.0);
        two * (lambda * self.r1 + (T::one() - lambda) * self.r2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult<T> {
    pub lambda: T,
    pub policy: MarginalPolicy<T>,
    pub rates: RatePair<T>,
    pub stationary: StationaryDistribution<T>,
    pub objective: T,
    pub restarts_used: usize,
}

/// The achievable rate pair of a policy.
pub fn rates_for_policy<T: Scalar>(policy: &MarginalPolicy<T>) -> Result<RatePair<T>> {
    let pi = stationary(&build_kernel(policy)?)?;
    Ok(rates_with(policy, &pi))
}

fn rates_with<T: Scalar>(
    policy: &MarginalPolicy<T>,
    pi: &StationaryDistribution<T>,
) -> RatePair<T> {
    let total = policy.p1().len() - 1;
    let mut r1 = T::zero();
    let mut r2 = T::zero();
    for (u, &w) in pi.probs().iter().enumerate() {
        r1 = r1 + w * h2(policy.p1()[u]);
        r2 = r2 + w * h2(policy.p2()[total - u]);
    }
    RatePair { r1, r2 }
}

/// Free coordinates are `p1[1..=U]` then `p2[1..=U]`.
struct InnerObjective<T> {
    total: usize,
    lambda: T,
}

impl<T: Scalar> InnerObjective<T> {
    fn p1(&self, x: &[T], level: usize) -> T {
        if level == 0 {
            T::zero()
        } else {
            x[level - 1]
        }
    }

    fn p2(&self, x: &[T], level: usize) -> T {
        if level == 0 {
            T::zero()
        } else {
            x[self.total + level - 1]
        }
    }
}

impl<T: Scalar> SeparableObjective<T> for InnerObjective<T> {
    fn dim(&self) -> usize {
        2 * self.total
    }

    fn states(&self) -> usize {
        self.total + 1
    }

    fn state_of(&self, coord: usize) -> usize {
        if coord < self.total {
            coord + 1
        } else {
            self.total - (coord - self.total + 1)
        }
    }

    fn terms(&self, x: &[T], u: usize) -> StateTerms<T> {
        let a = self.p1(x, u);
        let b = self.p2(x, self.total - u);
        StateTerms {
            down: a * (T::one() - b),
            up: (T::one() - a) * b,
            rewards: [h2(a), h2(b), T::zero()],
        }
    }

    fn combine(&self, avg: [T; 3]) -> T {
        RatePair {
            r1: avg[0],
            r2: avg[1],
        }
        .weighted(self.lambda)
    }
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "weight {lambda} is outside [0, 1]"
        )));
    }
    Ok(())
}

/// Best policy for the weighted sum `2 (lambda R1 + (1 - lambda) R2)` found
/// by multi-start coordinate ascent over `p_j[e]` in `[clamp, 1 - clamp]`.
pub fn optimize_sum_rate<T: Scalar>(
    budget: EnergyBudget,
    lambda: T,
    search: &SearchConfig,
) -> Result<OptimizationResult<T>> {
    check_lambda(lambda)?;
    if search.restarts == 0 {
        return Err(Error::InvalidArgument(
            "at least one restart is required".into(),
        ));
    }
    let total = budget.total() as usize;
    let obj = InnerObjective { total, lambda };
    let starts = default_starts(2 * total, search, |g| vec![g; 2 * total]);
    let best = multi_start(&obj, &starts, search).expect("nonempty starts");
    let policy = MarginalPolicy::from_free(budget, &best.x)?;
    let pi = stationary(&build_kernel(&policy)?)?;
    let rates = rates_with(&policy, &pi);
    Ok(OptimizationResult {
        lambda,
        objective: rates.weighted(lambda),
        policy,
        rates,
        stationary: pi,
        restarts_used: starts.len(),
    })
}

/// One optimization per weight, ordered by weight.
pub fn region_sweep<T: Scalar>(
    budget: EnergyBudget,
    lambdas: &[T],
    search: &SearchConfig,
) -> Result<Vec<OptimizationResult<T>>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("weight grid is empty".into()));
    }
    let mut grid = lambdas.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    grid.into_iter()
        .map(|l| optimize_sum_rate(budget, l, search))
        .collect()
}
