use thiserror::Error;

/// Errors shared across the simulation and closed-form modules.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented bound.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// The live population exceeded the configured cap.
    #[error("population explosion: {particles} particles at time {time:.6}")]
    Explosion { particles: usize, time: f64 },

    /// The event budget was exhausted before the horizon.
    #[error("event budget exceeded: {events} events at time {time:.6}")]
    EventBudget { events: u64, time: f64 },

    /// A series failed to converge within its term cap.
    #[error("series did not converge within {max_terms} terms (q = {q})")]
    SeriesDivergence { q: f64, max_terms: usize },

    /// Every replicate went extinct; the ratio estimator is undefined.
    #[error("degenerate estimate: all {reps} replicates extinct")]
    DegenerateEstimate { reps: usize },

    /// A functional id was not found in the Radon-Nikodym registry.
    #[error("unknown functional id: {0}")]
    UnknownFunctional(String),
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
