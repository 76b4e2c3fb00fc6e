//! Sum-rate table across energy budgets: conventional codebooks (`p = 1/2`
//! at every level), optimized codebooks, and the outer bound.

use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{EnergyBudget, MarginalPolicy};
use crate::error::{Error, Result};
use crate::inner::{optimize_sum_rate, rates_for_policy, OptimizationResult};
use crate::outer::{optimize_outer_sum_seeded, JointStatePolicy, OuterOptimum};
use crate::search::SearchConfig;

pub const CSV_HEADER: &str = "U,sum_conventional,sum_optimized,sum_outer";

/// Gap under which the two bounds are reported as closed.
pub const CLOSURE_GAP: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget: u32,
    pub sum_conventional: f64,
    pub sum_optimized: f64,
    pub sum_outer: f64,
}

impl SweepRow {
    pub fn gap(&self) -> f64 {
        self.sum_outer - self.sum_optimized
    }
}

/// A row together with the optimizers that produced it.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub row: SweepRow,
    pub inner: OptimizationResult<f64>,
    pub outer: OuterOptimum<f64>,
}

/// Computes one row. The outer search is also started from the product law
/// of the optimized inner policy, which is feasible for the outer problem.
pub fn sweep_row(budget: EnergyBudget, search: &SearchConfig) -> Result<SweepPoint> {
    let conventional = rates_for_policy(&MarginalPolicy::uniform(budget, 0.5)?)?.sum();
    let inner = optimize_sum_rate(budget, 0.5, search)?;
    let seed = JointStatePolicy::from_marginal(&inner.policy);
    let outer = optimize_outer_sum_seeded(budget, search, &[seed])?;
    Ok(SweepPoint {
        row: SweepRow {
            budget: budget.total(),
            sum_conventional: conventional,
            sum_optimized: inner.objective,
            sum_outer: outer.objective,
        },
        inner,
        outer,
    })
}

/// Rows for `U = 1..=u_max`, ordered by `U`.
pub fn sweep(u_max: u32, search: &SearchConfig) -> Result<Vec<SweepPoint>> {
    if u_max == 0 {
        return Err(Error::EmptyBudget);
    }
    (1..=u_max)
        .into_par_iter()
        .map(|u| sweep_row(EnergyBudget::new(u)?, search))
        .collect()
}

/// Smallest budget from which every row of the table has a gap below `gap`.
/// The trivially closed `U = 1` row does not count when a later row is open.
pub fn closure_budget(rows: &[SweepRow], gap: f64) -> Option<u32> {
    let open = rows.iter().rposition(|r| r.gap() >= gap);
    let start = open.map_or(0, |i| i + 1);
    rows.get(start).map(|r| r.budget)
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6}",
            r.budget, r.sum_conventional, r.sum_optimized, r.sum_outer
        );
    }
    match closure_budget(rows, CLOSURE_GAP) {
        Some(u) => {
            let _ = writeln!(out, "# bounds within {CLOSURE_GAP:e} from U={u}");
        }
        None => {
            let _ = writeln!(
                out,
                "# bounds not within {CLOSURE_GAP:e} for any U in the table"
            );
        }
    }
    out
}

pub fn write_csv<W: Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    w.write_all(to_csv(rows).as_bytes())
}

/// Parses the CSV written by [`to_csv`]; `#` lines are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((i, _)) => {
            return Err(Error::Parse {
                line: i + 1,
                reason: "unexpected header".into(),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                reason: "empty input".into(),
            })
        }
    }
    lines
        .map(|(i, line)| {
            let bad = |reason: &str| Error::Parse {
                line: i + 1,
                reason: reason.into(),
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
            Ok(SweepRow {
                budget: fields[0].trim().parse().map_err(|_| bad("bad budget"))?,
                sum_conventional: num(fields[1])?,
                sum_optimized: num(fields[2])?,
                sum_outer: num(fields[3])?,
            })
        })
        .collect()
}
