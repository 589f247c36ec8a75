//! Report envelope, failures and exit codes.

use serde::Serialize;
use serde_json::Value;

use flatmaj::Error;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: &str = "1.0.0";

pub const EXIT_OK: u8 = 0;
pub const EXIT_SELFTEST: u8 = 1;
pub const EXIT_HYPOTHESIS: u8 = 2;
pub const EXIT_MALFORMED: u8 = 3;
pub const EXIT_UNDETERMINED: u8 = 4;

pub fn report_schema_version() -> &'static str {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn malformed(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_MALFORMED,
            kind: "malformed",
            message: msg.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match e {
            Error::Malformed(_) => (EXIT_MALFORMED, "malformed"),
            Error::NormalizationMismatch { .. } => (EXIT_MALFORMED, "normalization_mismatch"),
            Error::Diverges(_) => (EXIT_MALFORMED, "diverges"),
            Error::Hypothesis(_) => (EXIT_HYPOTHESIS, "hypothesis"),
            Error::Infeasible(_) => (EXIT_HYPOTHESIS, "infeasible"),
            Error::DimensionCap { .. } => (EXIT_UNDETERMINED, "dimension_cap"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

/// Outcome of a subcommand: the result document, the criterion it instantiates,
/// and the exit code.
pub struct Outcome {
    pub criterion: &'static str,
    pub result: Value,
    pub code: u8,
}

impl Outcome {
    pub fn ok(criterion: &'static str, result: impl Serialize) -> Self {
        Outcome {
            criterion,
            result: serde_json::to_value(result).expect("report values serialize"),
            code: EXIT_OK,
        }
    }

    pub fn with_code(mut self, code: u8) -> Self {
        self.code = code;
        self
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    criterion: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorBody<'a>>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: &'a str,
}

pub fn render(command: &str, config: &RunConfig, outcome: &Result<Outcome, Failure>) -> String {
    let env = match outcome {
        Ok(o) => Envelope {
            schema: report_schema_version(),
            command,
            config,
            criterion: Some(o.criterion),
            result: Some(&o.result),
            error: None,
        },
        Err(f) => Envelope {
            schema: report_schema_version(),
            command,
            config,
            criterion: None,
            result: None,
            error: Some(ErrorBody {
                kind: f.kind,
                message: &f.message,
            }),
        },
    };
    let mut text = serde_json::to_string_pretty(&env).expect("report serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(Failure::from(Error::Malformed("x".into())).code, EXIT_MALFORMED);
        assert_eq!(Failure::from(Error::Hypothesis("x".into())).code, EXIT_HYPOTHESIS);
        assert_eq!(Failure::from(Error::DimensionCap { dim: 9, cap: 4 }).code, EXIT_UNDETERMINED);
    }

    #[test]
    fn envelope_carries_schema_and_config() {
        let cfg = RunConfig::default();
        let text = render("rate", &cfg, &Ok(Outcome::ok("rates", serde_json::json!({"rate": 1.0}))));
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema"], SCHEMA_VERSION);
        let back: RunConfig = serde_json::from_value(v["config"].clone()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(v["result"]["rate"], 1.0);
    }
}
