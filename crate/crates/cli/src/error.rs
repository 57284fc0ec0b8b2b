use digitfreq_core::digitkit::DigitError;
use digitfreq_core::fractal::FractalError;
use digitfreq_core::measures::MeasureError;
use digitfreq_core::mixing::MixingError;
use digitfreq_core::nonconv::NonconvError;
use digitfreq_core::observables::ObservableError;
use digitfreq_core::schedules::ScheduleError;
use thiserror::Error;

/// Failures of a run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Parse(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("resource cap: {0}")]
    Cap(String),
    #[error("replay mismatch: {0}")]
    Mismatch(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Mismatch(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn digit_is_cap(e: &DigitError) -> bool {
    matches!(e, DigitError::BufferCap { .. })
}

fn observable_is_cap(e: &ObservableError) -> bool {
    matches!(e, ObservableError::CapExceeded { .. })
}

fn classify(cap: bool, message: String) -> CliError {
    if cap {
        CliError::Cap(message)
    } else {
        CliError::Validation(message)
    }
}

impl From<ScheduleError> for CliError {
    fn from(e: ScheduleError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<DigitError> for CliError {
    fn from(e: DigitError) -> Self {
        classify(digit_is_cap(&e), e.to_string())
    }
}

impl From<ObservableError> for CliError {
    fn from(e: ObservableError) -> Self {
        classify(observable_is_cap(&e), e.to_string())
    }
}

impl From<NonconvError> for CliError {
    fn from(e: NonconvError) -> Self {
        let cap = match &e {
            NonconvError::Digit(d) => digit_is_cap(d),
            NonconvError::Observable(o) => observable_is_cap(o),
            _ => false,
        };
        classify(cap, e.to_string())
    }
}

impl From<MixingError> for CliError {
    fn from(e: MixingError) -> Self {
        let cap = match &e {
            MixingError::CapExceeded { .. } => true,
            MixingError::Observable(o) => observable_is_cap(o),
            _ => false,
        };
        classify(cap, e.to_string())
    }
}

impl From<FractalError> for CliError {
    fn from(e: FractalError) -> Self {
        let cap = match &e {
            FractalError::Budget { .. } => true,
            FractalError::Digit(d) => digit_is_cap(d),
            _ => false,
        };
        classify(cap, e.to_string())
    }
}
