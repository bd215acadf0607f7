use std::fmt;

use softarm::dynamics::SimState;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("simulation diverged at t = {t} s: {reason}\nlast valid state: {last}")]
    Divergence { t: f64, reason: String, last: StateDump },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            SimError::Validation(_) => 3,
            SimError::Divergence { .. } => 4,
            SimError::Io { .. } => 1,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

/// Printable copy of the last state that integrated cleanly.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDump(pub SimState);

impl fmt::Display for StateDump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.0;
        write!(
            f,
            "t = {} s, q = {:?}, qd = {:?}",
            s.t,
            s.q.as_vector().as_slice(),
            s.qd.as_vector().as_slice()
        )
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
