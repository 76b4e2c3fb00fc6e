use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability {value} is outside [0, 1]")]
    ProbabilityOutOfRange { value: f64 },

    #[error("distribution sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("energy budget must be at least one unit")]
    EmptyBudget,

    #[error("node {node} transmits \"1\" with probability {value} while holding no energy")]
    ZeroEnergyViolation { node: u8, value: f64 },

    #[error("policy has {got} entries, expected {expected}")]
    PolicyLength { expected: usize, got: usize },

    #[error("energy chain is not irreducible: state {state} cannot be left or entered")]
    NotIrreducible { state: usize },

    #[error("state {state} is outside [0, {total}]")]
    StateOutOfRange { state: usize, total: u32 },

    #[error("frame size {0} is not a power of two >= 2")]
    InvalidFrameSize(u64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "occupancy margin {epsilon} exhausts state {state} (stationary mass {mass:.6}); \
         raise the blocklength or lower epsilon"
    )]
    MarginExhausted {
        state: usize,
        mass: f64,
        epsilon: f64,
    },

    #[error("infeasible transcript at channel use {index}: {reason}")]
    InfeasibleTranscript { index: usize, reason: String },

    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}
