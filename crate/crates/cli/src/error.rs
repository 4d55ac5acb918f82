// SPDX-License-Identifier: Apache-2.0

use qorlens_core::evalx::EvalError;
use qorlens_core::graphio::DataError;
use qorlens_core::models::ModelError;
use qorlens_core::training::TrainError;
use qorlens_core::verilog::VerilogError;
use serde_json::{json, Value};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// A failure, classified by exit code. Rendered as one JSON line on stderr.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Verilog(VerilogError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) | CliError::Verilog(_) => EXIT_DATA,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CliError::Usage(m) => json!({"error": "usage", "message": m}),
            CliError::Data(m) => json!({"error": "data", "message": m}),
            CliError::Verilog(e) => json!({
                "error": "data",
                "category": e.category(),
                "line": e.span.line,
                "col": e.span.col,
                "message": e.message,
            }),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<VerilogError> for CliError {
    fn from(e: VerilogError) -> Self {
        CliError::Verilog(e)
    }
}
