//! Multi-start coordinate ascent for objectives of the form
//! `combine(sum_u pi_u * r_u)`, where `pi` is the stationary law of a
//! birth-death chain and both the chain moves and the rewards of state `u`
//! depend only on the coordinates attached to `u`.
//!
//! Each coordinate lives in `[clamp, 1 - clamp]` and is refined by a golden
//! section search; only the touched state is re-evaluated. After every
//! sweep a line search along the sweep displacement speeds up the zig-zag
//! typical of coupled coordinates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Knobs of the multi-start local search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Number of local searches, grid seeds first.
    pub restarts: usize,
    /// Stop once a full sweep improves the objective by less than this.
    pub tol: f64,
    pub seed: u64,
    pub max_sweeps: usize,
    /// Every coordinate is kept in `[clamp, 1 - clamp]`.
    pub clamp: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            tol: 1e-10,
            seed: 0,
            max_sweeps: 5000,
            clamp: 1e-6,
        }
    }
}

/// Constant starting values shared by every coordinate.
pub(crate) const GRID_SEEDS: [f64; 5] = [0.2, 0.35, 0.5, 0.65, 0.8];

/// Objectives within this distance of the best are considered tied.
const TIE_TOL: f64 = 1e-9;

const GOLDEN_XTOL: f64 = 1e-9;

/// Chain moves and rewards of one state.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StateTerms<T> {
    pub down: T,
    pub up: T,
    pub rewards: [T; 3],
}

pub(crate) trait SeparableObjective<T: Scalar>: Sync {
    fn dim(&self) -> usize;

    fn states(&self) -> usize;

    /// The single state whose terms depend on coordinate `coord`.
    fn state_of(&self, coord: usize) -> usize;

    fn terms(&self, x: &[T], u: usize) -> StateTerms<T>;

    /// Maps the stationary averages of the three rewards to the objective.
    fn combine(&self, averages: [T; 3]) -> T;
}

#[derive(Debug, Clone)]
struct CachedTerms<T> {
    ln_down: T,
    ln_up: T,
    rewards: [T; 3],
}

impl<T: Scalar> CachedTerms<T> {
    fn new(t: StateTerms<T>) -> Self {
        Self {
            ln_down: t.down.ln(),
            ln_up: t.up.ln(),
            rewards: t.rewards,
        }
    }
}

struct Evaluator<'a, T, O> {
    obj: &'a O,
    cache: Vec<CachedTerms<T>>,
    log_w: Vec<T>,
}

impl<'a, T: Scalar, O: SeparableObjective<T>> Evaluator<'a, T, O> {
    fn new(obj: &'a O, x: &[T]) -> Self {
        let n = obj.states();
        let mut ev = Self {
            obj,
            cache: Vec::with_capacity(n),
            log_w: vec![T::zero(); n],
        };
        ev.reload(x);
        ev
    }

    fn reload(&mut self, x: &[T]) {
        self.cache.clear();
        for u in 0..self.obj.states() {
            self.cache.push(CachedTerms::new(self.obj.terms(x, u)));
        }
    }

    fn refresh(&mut self, x: &[T], u: usize) {
        self.cache[u] = CachedTerms::new(self.obj.terms(x, u));
    }

    fn value(&mut self) -> T {
        let n = self.cache.len();
        self.log_w[0] = T::zero();
        let mut max = T::zero();
        for u in 1..n {
            let v = self.log_w[u - 1] + self.cache[u - 1].ln_up - self.cache[u].ln_down;
            self.log_w[u] = v;
            max = max.max(v);
        }
        if max.is_nan() {
            return T::neg_infinity();
        }
        let mut total = T::zero();
        let mut acc = [T::zero(); 3];
        for u in 0..n {
            let w = (self.log_w[u] - max).exp();
            total = total + w;
            for (a, r) in acc.iter_mut().zip(self.cache[u].rewards) {
                *a = *a + w * r;
            }
        }
        let value = self.obj.combine(acc.map(|a| a / total));
        if value.is_nan() {
            T::neg_infinity()
        } else {
            value
        }
    }
}

/// Result of a single local search.
#[derive(Debug, Clone)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct LocalOptimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub sweeps: usize,
    /// Objective gain of the final sweep.
    pub last_gain: T,
}

/// Maximizes a unimodal-ish function on `[lo, hi]`.
fn golden_max<T: Scalar>(mut f: impl FnMut(T) -> T, lo: T, hi: T, xtol: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > xtol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

pub(crate) fn ascend<T: Scalar, O: SeparableObjective<T>>(
    obj: &O,
    start: &[T],
    config: &SearchConfig,
) -> LocalOptimum<T> {
    let lo = T::lit(config.clamp);
    let hi = T::one() - lo;
    let xtol = T::lit(GOLDEN_XTOL).max(T::epsilon() * T::lit(16.0));
    let tol = T::lit(config.tol);
    let mut x: Vec<T> = start.iter().map(|&v| v.max(lo).min(hi)).collect();
    let mut ev = Evaluator::new(obj, &x);
    let mut f = ev.value();
    let mut sweeps = 0;
    let mut last_gain = T::infinity();

    while sweeps < config.max_sweeps {
        sweeps += 1;
        let f_start = f;
        let x_start = x.clone();

        for c in 0..obj.dim() {
            let s = obj.state_of(c);
            let old = x[c];
            let (best, fbest) = golden_max(
                |v| {
                    x[c] = v;
                    ev.refresh(&x, s);
                    ev.value()
                },
                lo,
                hi,
                xtol,
            );
            x[c] = if fbest > f { best } else { old };
            if fbest > f {
                f = fbest;
            }
            ev.refresh(&x, s);
        }

        // Line search along the sweep displacement, beyond the sweep end point.
        let dir: Vec<T> = x.iter().zip(&x_start).map(|(&a, &b)| a - b).collect();
        let t_max = dir
            .iter()
            .zip(&x_start)
            .filter(|(d, _)| **d != T::zero())
            .map(|(&d, &s)| {
                if d > T::zero() {
                    (hi - s) / d
                } else {
                    (lo - s) / d
                }
            })
            .fold(T::lit(8.0), T::min);
        if t_max > T::one() {
            let mut trial = x.clone();
            let mut line = |t: T| {
                for ((v, &s), &d) in trial.iter_mut().zip(&x_start).zip(&dir) {
                    *v = (s + t * d).max(lo).min(hi);
                }
                ev.reload(&trial);
                ev.value()
            };
            let (t_best, f_line) = golden_max(&mut line, T::one(), t_max, T::lit(1e-6));
            if f_line > f {
                for ((v, &s), &d) in x.iter_mut().zip(&x_start).zip(&dir) {
                    *v = (s + t_best * d).max(lo).min(hi);
                }
                f = f_line;
            }
            ev.reload(&x);
        }

        last_gain = f - f_start;
        if last_gain < tol {
            break;
        }
    }

    LocalOptimum {
        x,
        value: f,
        sweeps,
        last_gain,
    }
}

/// Evaluates the objective at `x` without searching.
#[cfg(test)]
pub(crate) fn evaluate<T: Scalar, O: SeparableObjective<T>>(obj: &O, x: &[T]) -> T {
    Evaluator::new(obj, x).value()
}

/// Grid seeds mapped through `grid`, then uniform random points in
/// `[0.05, 0.95]^dim`, `config.restarts` in total.
pub(crate) fn default_starts<T: Scalar>(
    dim: usize,
    config: &SearchConfig,
    grid: impl Fn(T) -> Vec<T>,
) -> Vec<Vec<T>> {
    let mut starts: Vec<Vec<T>> = GRID_SEEDS
        .iter()
        .take(config.restarts)
        .map(|&g| grid(T::lit(g)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    while starts.len() < config.restarts {
        starts.push(
            (0..dim)
                .map(|_| T::lit(rng.gen_range(0.05..0.95)))
                .collect(),
        );
    }
    starts
}

/// Runs one local search per start and keeps the first result within
/// `1e-9` of the best objective.
pub(crate) fn multi_start<T: Scalar, O: SeparableObjective<T>>(
    obj: &O,
    starts: &[Vec<T>],
    config: &SearchConfig,
) -> Option<LocalOptimum<T>> {
    let results: Vec<LocalOptimum<T>> = starts.par_iter().map(|s| ascend(obj, s, config)).collect();
    let best = results
        .iter()
        .map(|r| r.value)
        .fold(T::neg_infinity(), T::max);
    let tie = T::lit(TIE_TOL);
    results.into_iter().find(|r| r.value >= best - tie)
}
