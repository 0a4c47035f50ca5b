use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid formation offsets: {0}")]
    InvalidFormation(String),

    /// No pinned agent, or some agent cannot reach a pinned one.
    #[error("graph is not connected to the leader: {0}")]
    NotLeaderConnected(String),

    #[error("non-positive inertia on channel {channel}: {value}")]
    NonPositiveInertia { channel: usize, value: f64 },

    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),

    #[error("attitude singularity: pitch {pitch} rad outside the admissible band{}", where_(.agent, .t))]
    AttitudeSingularity {
        pitch: f64,
        agent: Option<usize>,
        t: Option<f64>,
    },

    #[error("fuzzy activation degenerate (non-finite input)")]
    DegenerateActivation,

    #[error("invalid exponents: gamma = {gamma} must be in (0,1), iota = {iota} must exceed 1")]
    InvalidExponents { gamma: f64, iota: f64 },

    #[error("switching gain {beta} does not dominate the disturbance bound {bound}")]
    GainViolation { beta: f64, bound: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

fn where_(agent: &Option<usize>, t: &Option<f64>) -> String {
    match (agent, t) {
        (Some(a), Some(t)) => format!(" (agent {}, t = {t} s)", a + 1),
        (Some(a), None) => format!(" (agent {})", a + 1),
        (None, Some(t)) => format!(" (t = {t} s)"),
        (None, None) => String::new(),
    }
}

impl Error {
    /// Attach the offending agent and time to an attitude singularity.
    pub fn at(self, agent_idx: usize, time: f64) -> Self {
        match self {
            Error::AttitudeSingularity { pitch, .. } => Error::AttitudeSingularity {
                pitch,
                agent: Some(agent_idx),
                t: Some(time),
            },
            other => other,
        }
    }
}
