//! Error classification: every library failure maps onto one of the three
//! exit-code classes.

use std::fmt;

use stirap::analytic::AnalyticError;
use stirap::berry::BerryError;
use stirap::experiments::ExperimentError;
use stirap::propagate::PropagateError;
use stirap::pulses::PulseError;
use stirap::splitop::SplitOpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl ErrorClass {
    fn token(&self) -> &'static str {
        match self {
            Self::Validation => "validation",
            Self::Numerical => "numerical",
            Self::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn validation(message: String) -> Self {
        Self { class: ErrorClass::Validation, message }
    }

    pub fn numerical(message: String) -> Self {
        Self { class: ErrorClass::Numerical, message }
    }

    pub fn io(message: String) -> Self {
        Self { class: ErrorClass::Io, message }
    }

    pub fn exit_code(&self) -> u8 {
        match self.class {
            ErrorClass::Validation => 1,
            ErrorClass::Numerical => 2,
            ErrorClass::Io => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // single line, machine-parsable
        let flat = self.message.replace('\n', " ");
        write!(f, "error: {}: {}", self.class.token(), flat)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<PulseError> for CliError {
    fn from(e: PulseError) -> Self {
        let class = match &e {
            PulseError::InvalidParameter(_) | PulseError::SchemeInvariantViolation { .. } => {
                ErrorClass::Validation
            }
            PulseError::AngleUndefined { .. } | PulseError::AreaNotConverged => {
                ErrorClass::Numerical
            }
        };
        Self { class, message: e.to_string() }
    }
}

impl From<AnalyticError> for CliError {
    fn from(e: AnalyticError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<PropagateError> for CliError {
    fn from(e: PropagateError) -> Self {
        match e {
            PropagateError::NormDriftExceeded { .. } => Self::numerical(e.to_string()),
            PropagateError::Pulse(p) => p.into(),
            _ => Self::validation(e.to_string()),
        }
    }
}

impl From<BerryError> for CliError {
    fn from(e: BerryError) -> Self {
        match e {
            BerryError::OverlapVanished { .. } => Self::numerical(e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}

impl From<SplitOpError> for CliError {
    fn from(e: SplitOpError) -> Self {
        match e {
            SplitOpError::PacketClipped { .. } | SplitOpError::PhaseIllDefined { .. } => {
                Self::numerical(e.to_string())
            }
            SplitOpError::Io(io) => io.into(),
            SplitOpError::Pulse(p) => p.into(),
            _ => Self::validation(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Propagate(p) => p.into(),
            ExperimentError::Analytic(a) => a.into(),
            ExperimentError::Pulse(p) => p.into(),
            ExperimentError::Io(io) => io.into(),
            _ => Self::validation(e.to_string()),
        }
    }
}
