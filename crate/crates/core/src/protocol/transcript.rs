use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One channel use: the state before transmission and both symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelUse {
    pub state: u32,
    pub x1: u8,
    pub x2: u8,
}

/// Sequence of channel uses of a two-way exchange. Node 1 receives the `x2`
/// column and node 2 the `x1` column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    total_units: u32,
    initial_state: u32,
    uses: Vec<ChannelUse>,
    final_state: u32,
}

/// Next state of node 1's energy: `(u - x1)^+ + x2`.
fn next_state(u: u32, x1: u8, x2: u8) -> u32 {
    u.saturating_sub(x1 as u32) + x2 as u32
}

fn check_use(total: u32, u: u32, x1: u8, x2: u8) -> std::result::Result<(), String> {
    if u > total {
        return Err(format!("state {u} exceeds {total} units"));
    }
    if x1 > 1 || x2 > 1 {
        return Err(format!("non-binary symbols ({x1}, {x2})"));
    }
    if x1 == 1 && u == 0 {
        return Err("node 1 sends \"1\" without energy".into());
    }
    if x2 == 1 && u == total {
        return Err("node 2 sends \"1\" without energy".into());
    }
    Ok(())
}

impl Transcript {
    pub fn new(total_units: u32, initial_state: u32) -> Result<Self> {
        if total_units == 0 {
            return Err(Error::EmptyBudget);
        }
        if initial_state > total_units {
            return Err(Error::StateOutOfRange {
                state: initial_state as usize,
                total: total_units,
            });
        }
        Ok(Self {
            total_units,
            initial_state,
            uses: Vec::new(),
            final_state: initial_state,
        })
    }

    pub fn with_capacity(total_units: u32, initial_state: u32, capacity: usize) -> Result<Self> {
        let mut t = Self::new(total_units, initial_state)?;
        t.uses.reserve(capacity);
        Ok(t)
    }

    /// Appends a channel use from the current state; rejects symbols the
    /// current energy allocation does not allow.
    pub fn push(&mut self, x1: u8, x2: u8) -> Result<()> {
        let u = self.final_state;
        check_use(self.total_units, u, x1, x2).map_err(|reason| Error::InfeasibleTranscript {
            index: self.uses.len() + 1,
            reason,
        })?;
        self.uses.push(ChannelUse { state: u, x1, x2 });
        self.final_state = next_state(u, x1, x2);
        Ok(())
    }

    pub fn total_units(&self) -> u32 {
        self.total_units
    }

    /// Node 1's energy before the first use.
    pub fn initial_state(&self) -> u32 {
        self.initial_state
    }

    /// Node 1's energy after the last use.
    pub fn final_state(&self) -> u32 {
        self.final_state
    }

    pub fn uses(&self) -> &[ChannelUse] {
        &self.uses
    }

    pub fn len(&self) -> usize {
        self.uses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uses.is_empty()
    }

    /// Re-checks energy feasibility and the state recursion at every use.
    pub fn validate(&self) -> Result<()> {
        let mut u = self.initial_state;
        for (i, c) in self.uses.iter().enumerate() {
            let fail = |reason: String| Error::InfeasibleTranscript {
                index: i + 1,
                reason,
            };
            if c.state != u {
                return Err(fail(format!(
                    "recorded state {} but recursion gives {u}",
                    c.state
                )));
            }
            check_use(self.total_units, u, c.x1, c.x2).map_err(fail)?;
            u = next_state(u, c.x1, c.x2);
        }
        if u != self.final_state {
            return Err(Error::InfeasibleTranscript {
                index: self.uses.len(),
                reason: format!("final state {} but recursion gives {u}", self.final_state),
            });
        }
        Ok(())
    }

    /// Writes one line per channel use: `i u x1 x2`, with `i` starting at 1.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, c) in self.uses.iter().enumerate() {
            writeln!(w, "{} {} {} {}", i + 1, c.state, c.x1, c.x2)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::with_capacity(self.uses.len() * 10);
        self.write_text(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Reads the format of [`Transcript::write_text`] and validates it.
    pub fn parse_text(total_units: u32, text: &str) -> Result<Self> {
        let mut uses = Vec::new();
        for (line_no, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let bad = |reason: &str| Error::Parse {
                line: line_no + 1,
                reason: reason.into(),
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad("expected `i u x1 x2`"));
            }
            let idx: usize = f[0].parse().map_err(|_| bad("bad index"))?;
            if idx != uses.len() + 1 {
                return Err(bad("indices must count up from 1"));
            }
            uses.push(ChannelUse {
                state: f[1].parse().map_err(|_| bad("bad state"))?,
                x1: f[2].parse().map_err(|_| bad("bad symbol"))?,
                x2: f[3].parse().map_err(|_| bad("bad symbol"))?,
            });
        }
        let first = uses.first().ok_or_else(|| Error::Parse {
            line: 1,
            reason: "empty transcript".into(),
        })?;
        let mut t = Self::new(total_units, first.state)?;
        for c in &uses {
            if c.state != t.final_state {
                return Err(Error::InfeasibleTranscript {
                    index: t.len() + 1,
                    reason: format!(
                        "recorded state {} but recursion gives {}",
                        c.state, t.final_state
                    ),
                });
            }
            t.push(c.x1, c.x2)?;
        }
        Ok(t)
    }
}
