//! Error type shared by all simulator layers.

use std::fmt;

/// Errors raised by scenario handling, network solving, and measurements.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// A scenario file could not be parsed (message carries line/position).
    Parse(String),
    /// A scenario violated a documented invariant.
    Validation(String),
    /// The requested topology is a descriptor only and cannot be simulated.
    NotImplemented(String),
    /// The nodal matrix became singular; carries the name of the floating node.
    SingularSystem { node: String },
    /// The diode conduction fixed point did not settle within the iteration cap.
    ConductionFixedPoint { iterations: usize },
    /// A time step failed after all retries.
    StepFailure { time: f64, detail: String },
    /// A measurement could not be taken from the trace.
    Measurement(String),
    /// Efficiency is undefined because the window saw no input energy.
    UndefinedEfficiency,
    /// An event bracket did not contain a predicate change.
    NoSignChange { t_lo: f64, t_hi: f64 },
    /// A trace channel name was not recognized.
    UnknownChannel(String),
    /// File I/O failed (message carries the path and the OS error).
    Io(String),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Parse(msg) => write!(f, "scenario parse error: {msg}"),
            SimError::Validation(msg) => write!(f, "scenario validation error: {msg}"),
            SimError::NotImplemented(msg) => write!(f, "not implemented: {msg}"),
            SimError::SingularSystem { node } => {
                write!(f, "singular nodal system: node '{node}' is floating")
            }
            SimError::ConductionFixedPoint { iterations } => write!(
                f,
                "diode conduction fixed point did not converge in {iterations} iterations"
            ),
            SimError::StepFailure { time, detail } => {
                write!(f, "step failure at t = {time:.9e} s: {detail}")
            }
            SimError::Measurement(msg) => write!(f, "measurement error: {msg}"),
            SimError::UndefinedEfficiency => {
                write!(f, "efficiency undefined: no input energy in window")
            }
            SimError::NoSignChange { t_lo, t_hi } => write!(
                f,
                "event bracket [{t_lo:.9e}, {t_hi:.9e}] contains no predicate change"
            ),
            SimError::UnknownChannel(name) => write!(f, "unknown trace channel '{name}'"),
            SimError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for SimError {}

pub type Result<T> = std::result::Result<T, SimError>;
