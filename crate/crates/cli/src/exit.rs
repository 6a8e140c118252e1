use std::process::ExitCode;

use fidvr_core::Error;

/// Process exit codes. The numbers are part of the command-line contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    /// Unreadable, malformed or inconsistent input.
    Input = 2,
    /// Divergence, singular systems, collapse or a missing estimate.
    Numerical = 3,
    /// Infeasible plan or failed fit.
    Infeasible = 4,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s as u8)
    }
}

fn core_status(e: &Error) -> Status {
    match e {
        Error::InvalidInput(_) | Error::NotEnoughData(_) | Error::Io(_) | Error::Json(_) => Status::Input,
        Error::Diverged { .. }
        | Error::Singular(_)
        | Error::NeverTrips(_)
        | Error::NoRecoveryEstimate(_)
        | Error::Collapsed { .. } => Status::Numerical,
        Error::Infeasible { .. } | Error::FitFailed(_) => Status::Infeasible,
    }
}

/// Exit status for an error, from the first recognised cause in its chain.
pub fn classify(e: &anyhow::Error) -> Status {
    for cause in e.chain() {
        if let Some(c) = cause.downcast_ref::<Error>() {
            return core_status(c);
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return Status::Input;
        }
    }
    Status::Numerical
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn codes_follow_the_error_class() {
        let input: anyhow::Error = Error::InvalidInput("x".into()).into();
        assert_eq!(classify(&input), Status::Input);
        let diverged: anyhow::Error = Error::Diverged { iterations: 3, last_step: 1.0 }.into();
        assert_eq!(classify(&diverged), Status::Numerical);
        let fit: anyhow::Error = Error::FitFailed("x".into()).into();
        assert_eq!(classify(&fit), Status::Infeasible);
    }

    #[test]
    fn context_does_not_hide_the_cause() {
        let r: Result<(), Error> = Err(Error::Infeasible { max_achievable: vec![] });
        let e = r.context("planning").unwrap_err();
        assert_eq!(classify(&e), Status::Infeasible);
        let io: Result<String, std::io::Error> = std::fs::read_to_string("/nonexistent/file");
        assert_eq!(classify(&io.context("reading").unwrap_err()), Status::Input);
    }
}
