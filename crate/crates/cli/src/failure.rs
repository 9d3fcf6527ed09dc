use std::fmt;
use std::path::Path;

use isoforge_core::{Error, ErrorKind};

/// A job failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub code: i32,
    pub reason: String,
}

impl Failure {
    pub fn parse(reason: impl Into<String>) -> Self {
        Failure {
            kind: "parse",
            code: 2,
            reason: reason.into(),
        }
    }

    pub fn precondition(reason: impl Into<String>) -> Self {
        Failure {
            kind: "precondition",
            code: 3,
            reason: reason.into(),
        }
    }

    pub fn verification(reason: impl Into<String>) -> Self {
        Failure {
            kind: "verification",
            code: 1,
            reason: reason.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::precondition(format!("{}: {e}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e.kind() {
            ErrorKind::Parse => Failure::parse(e.to_string()),
            ErrorKind::Precondition => Failure::precondition(e.to_string()),
            ErrorKind::NonConvergence => Failure {
                kind: "nonconvergence",
                code: 4,
                reason: e.to_string(),
            },
        }
    }
}

impl fmt::Display for Failure {
    /// `error kind=<kind> code=<code>: <reason>` on a single line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let reason: String = self.reason.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error kind={} code={}: {}", self.kind, self.code, reason)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(Failure::from(Error::Parse("x".into())).code, 2);
        assert_eq!(Failure::from(Error::Precondition("x".into())).code, 3);
        assert_eq!(Failure::from(Error::FoldedCell { i: 1, j: 2 }).code, 3);
        let cap = Error::IterationCap {
            rounds: 5,
            lower: 0.5,
            upper: 0.7,
        };
        assert_eq!(Failure::from(cap).code, 4);
        assert_eq!(Failure::verification("x").code, 1);
    }

    #[test]
    fn reason_is_one_line() {
        let f = Failure::precondition("first\nsecond   third");
        assert_eq!(f.to_string(), "error kind=precondition code=3: first second third");
    }
}
