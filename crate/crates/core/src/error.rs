use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("link {0} appears more than once")]
    DuplicateLink(usize),

    #[error("link {link} references node {node}, but the graph has {nodes} nodes")]
    DanglingEndpoint { link: usize, node: usize, nodes: usize },

    #[error("link {0} is a self-loop")]
    SelfLoopLink(usize),

    #[error("invalid conflict edge ({0}, {1})")]
    InvalidConflictEdge(usize, usize),

    #[error("graph has {links} links; exact analysis is capped at {cap}")]
    EnumerationCap { links: usize, cap: usize },

    #[error("state space has {states} states; {what} is capped at {cap}")]
    StateSpaceTooLarge {
        what: &'static str,
        states: usize,
        cap: usize,
    },

    #[error("schedule has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("schedule {0} is not an independent set")]
    NotIndependent(String),

    #[error("queue length {q_l} exceeds q_max {q_max}")]
    QueueAboveMax { q_l: u64, q_max: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid decision distribution: {0}")]
    InvalidDecisionDistribution(String),

    #[error("kernel is not reversible (detailed-balance residual {0:e})")]
    NotReversible(f64),

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("unsupported weight kind for {0}")]
    UnsupportedKind(&'static str),

    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    #[error("arrival rate {rate} on link {link} is not in [0, 1)")]
    ArrivalRate { link: usize, rate: f64 },

    #[error("trace has no max-weight oracle samples")]
    MissingOracle,

    #[error("empty trace")]
    EmptyTrace,
}
