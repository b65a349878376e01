use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SojournError {
    #[error("invalid network: {0}")]
    InvalidSpec(String),
    #[error("negative or non-finite rate: {0}")]
    NegativeRate(String),
    #[error("routing row {row} sums to {sum} > 1")]
    RowSumExceedsOne { row: usize, sum: f64 },
    #[error("no exogenous arrivals: the network is never fed")]
    NoExogenousArrivals,
    #[error("routing matrix has spectral radius {radius} >= 1: customers never leave")]
    NonInvertibleRouting { radius: f64 },
    #[error("network is unstable: node {node} has traffic intensity {rho}")]
    UnstableNetwork { node: usize, rho: f64 },
    #[error("network is not acyclic")]
    NotAcyclic,
    #[error("network does not satisfy the overtake-free moment condition")]
    NotOvertakeFree,
    #[error("network is not a tandem series")]
    NotTandem,
    #[error("path visits node {0} more than once")]
    RepeatedNode(usize),
    #[error("path is not realizable: {0}")]
    UnreachablePath(String),
    #[error("node index {node} out of range for a {nodes}-node network")]
    NodeOutOfRange { node: usize, nodes: usize },
    #[error("probability {0} outside [0, 1)")]
    InvalidProbability(f64),
    #[error("truncation cap must be at least 1")]
    CapTooSmall,
    #[error("uniformization rate {alpha} is below the maximal outflow {max_outflow}")]
    AlphaTooSmall { alpha: f64, max_outflow: f64 },
    #[error("randomized chain did not reach the stopping mass after {jumps} jumps")]
    NoConvergence { jumps: usize },
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("simulation exceeded {0} events")]
    MaxEventsExceeded(u64),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("state space of {0} states is too large")]
    StateSpaceTooLarge(u128),
}

pub type Result<T> = std::result::Result<T, SojournError>;
