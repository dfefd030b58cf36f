use thiserror::Error;

pub type Result<T> = std::result::Result<T, FpdError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpdError {
    #[error("state/action space must be non-empty (got |S|={n_states}, |A|={n_actions})")]
    EmptySpace { n_states: usize, n_actions: usize },

    #[error("{what}: expected {expected} entries, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{what} slice (prev state {prev_state}, action {action:?}) sums to {sum}, not 1")]
    NonStochastic {
        what: &'static str,
        prev_state: usize,
        action: Option<usize>,
        sum: f64,
    },

    #[error("{what} has invalid entry {value} at prev state {prev_state}, action {action:?}")]
    NegativeEntry {
        what: &'static str,
        prev_state: usize,
        action: Option<usize>,
        value: f64,
    },

    #[error("{kind} index {index} out of range (size {size})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        size: usize,
    },

    #[error("trajectory is not chain consistent at step {step}")]
    BrokenChain { step: usize },

    #[error("ideal model gives zero weight to every admissible action in state {state}")]
    DegenerateIdeal { state: usize },

    #[error("ideal joint model has no positive cell usable here")]
    AllZeroIdeal,

    #[error("horizon must be at least 1")]
    ZeroHorizon,

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("canned ideal {kind} needs |S| = 3, got {n_states}")]
    WrongSize { kind: &'static str, n_states: usize },

    #[error("record must contain at least one step")]
    EmptyRecord,

    #[error("i/o: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),
}

impl From<std::io::Error> for FpdError {
    fn from(e: std::io::Error) -> Self {
        FpdError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for FpdError {
    fn from(e: serde_json::Error) -> Self {
        FpdError::Format(e.to_string())
    }
}

impl From<csv::Error> for FpdError {
    fn from(e: csv::Error) -> Self {
        FpdError::Io(e.to_string())
    }
}
