use std::path::Path;
use std::time::Instant;

use multicausal::format::FormatError;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::Context;

pub const EXIT_YES: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_NO: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent input (exit 2).
    Invalid(String),
    /// A size guard refused the computation (exit 4).
    Resource(String),
    /// Anything else, including failed writes (exit 1).
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Resource(_) => 4,
            CliError::Failed(_) => EXIT_FAILED,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Resource(m) => write!(f, "resource limit: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text + "\n").map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
}

/// A check performed by a subcommand, named by the statement it instantiates.
pub fn check(statement: &str, passed: bool, detail: Value) -> Value {
    json!({ "statement": statement, "passed": passed, "detail": detail })
}

/// Collects report fields and emits them with the seed and wall time.
pub struct Report {
    command: &'static str,
    start: Instant,
    fields: Map<String, Value>,
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Report {
            command,
            start: Instant::now(),
            fields: Map::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.fields.insert(key.to_string(), v);
    }

    /// Writes the report to `--report` or standard output.
    pub fn emit(mut self, ctx: &Context) -> Result<(), CliError> {
        self.fields.insert("command".into(), json!(self.command));
        self.fields.insert("seed".into(), json!(ctx.seed));
        self.fields.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        self.fields
            .insert("wall_time_s".into(), json!(self.start.elapsed().as_secs_f64()));
        let value = Value::Object(self.fields);
        match &ctx.report {
            Some(path) => write_json(path, &value),
            None => {
                println!("{}", serde_json::to_string_pretty(&value).expect("report serializes"));
                Ok(())
            }
        }
    }
}
