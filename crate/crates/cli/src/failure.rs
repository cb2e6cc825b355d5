use std::fmt;

/// A command failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            kind: "invalid_input",
            message: message.into(),
        }
    }

    pub fn partition(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "partition_violation",
            message: message.into(),
        }
    }

    /// One JSON object for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind, "code": self.code, "message": self.message }
        })
        .to_string()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (exit {}): {}", self.kind, self.code, self.message)
    }
}

impl From<dinseg::Error> for Failure {
    fn from(e: dinseg::Error) -> Self {
        use dinseg::Error;
        let kind = match &e {
            Error::NonFiniteLoss { .. } => {
                return Self {
                    code: 3,
                    kind: "non_finite_loss",
                    message: e.to_string(),
                }
            }
            Error::Io { .. } => "io",
            Error::Format { .. } | Error::Json(_) => "format",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::Shape(_) | Error::UnsupportedDimension(_) => "shape",
            Error::InvalidArgument(_) | Error::Undefined(_) => "invalid_input",
        };
        Self {
            code: 1,
            kind,
            message: e.to_string(),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;
