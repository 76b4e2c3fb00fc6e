//! Executable strategies and their simulators.
//!
//! * [`single_unit`]: the three schemes for a single energy unit (fixed
//!   frames, a variable-length code, and bit-level time sharing).
//! * [`random_coding`]: state-multiplexed random codebooks with pointer
//!   multiplexing, random padding, and occupancy-set decoding, plus a Monte
//!   Carlo estimate of their error probability.
//! * [`transcript`]: channel-use records with a feasibility validator and a
//!   plain-text export.

pub mod random_coding;
pub mod single_unit;
pub mod transcript;

use serde::{Deserialize, Serialize};

pub use random_coding::{
    build_codebooks, monte_carlo_error, random_trial, run_trial, run_trial_with_transcript,
    CodebookSet, CodingParams, CollisionCheck, EventCounts, Message, MessageTuple,
    MonteCarloReport, TrialOutcome,
};
pub use single_unit::{
    naive_frame_rate, optimal_timeshare_random, optimal_timeshare_sim, variable_length_exchange,
    variable_length_sim, SingleUnitRun,
};
pub use transcript::{ChannelUse, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Node {
    One,
    Two,
}

impl Node {
    pub fn index(self) -> usize {
        match self {
            Node::One => 0,
            Node::Two => 1,
        }
    }

    pub fn other(self) -> Node {
        match self {
            Node::One => Node::Two,
            Node::Two => Node::One,
        }
    }
}

impl std::fmt::Display for Node {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}
