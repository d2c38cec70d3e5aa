use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::paramspace::{ConfigError, Configuration, ParameterSpace};

/// One requested execution of the target.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunSpec {
    pub config: Configuration,
    pub instance: String,
    pub seed: u64,
}

impl RunSpec {
    pub fn new(config: Configuration, instance: impl Into<String>, seed: u64) -> Self {
        RunSpec {
            config,
            instance: instance.into(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Success,
    Timeout,
    Crash,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Success => "SUCCESS",
            Outcome::Timeout => "TIMEOUT",
            Outcome::Crash => "CRASH",
        })
    }
}

/// How the target process ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Code(i32),
    Signal(i32),
}

/// A finished, classified run. Immutable once produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub spec: RunSpec,
    pub outcome: Outcome,
    /// CPU seconds (user + system).
    pub measured: f64,
    /// Self-reported metric, when the scenario reads one.
    pub reported: Option<f64>,
    pub exit: ExitStatus,
    pub wall: f64,
    /// Seconds since the Unix epoch at completion.
    pub timestamp: f64,
    /// Concurrency limit in force when the run executed.
    pub load: usize,
}

impl RunResult {
    /// Runtime charged to a successful run: the reported metric when present,
    /// CPU time otherwise.
    pub fn runtime(&self) -> f64 {
        self.reported.unwrap_or(self.measured)
    }
}

/// Serialized form of a [`RunResult`]: one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    /// Free-form label of the configuration (e.g. a validation row id).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub config: String,
    pub instance: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub measured: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported: Option<f64>,
    pub exit: ExitStatus,
    pub wall: f64,
    pub timestamp: f64,
    pub load: usize,
}

impl RunRecord {
    pub fn from_result(result: &RunResult, label: Option<&str>) -> Self {
        RunRecord {
            label: label.map(str::to_string),
            config: result.spec.config.canonical(),
            instance: result.spec.instance.clone(),
            seed: result.spec.seed,
            outcome: result.outcome,
            measured: result.measured,
            reported: result.reported,
            exit: result.exit,
            wall: result.wall,
            timestamp: result.timestamp,
            load: result.load,
        }
    }

    pub fn into_result(self, space: &ParameterSpace) -> Result<RunResult, LogError> {
        for v in [self.measured, self.wall, self.timestamp].into_iter().chain(self.reported) {
            if !v.is_finite() || v < 0.0 {
                return Err(LogError::Invalid(format!("negative or non-finite number {v}")));
            }
        }
        let config = space.parse_config(&self.config)?;
        Ok(RunResult {
            spec: RunSpec::new(config, self.instance, self.seed),
            outcome: self.outcome,
            measured: self.measured,
            reported: self.reported,
            exit: self.exit,
            wall: self.wall,
            timestamp: self.timestamp,
            load: self.load,
        })
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("run log line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("run log: {0}")]
    Config(#[from] ConfigError),
    #[error("run log: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parse one line of a run log.
pub fn parse_record(line: &str) -> Result<RunRecord, serde_json::Error> {
    serde_json::from_str(line)
}

/// Append records to a writer, one per line.
pub fn write_records<W: Write>(mut out: W, records: &[RunRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Read every record of a run log, skipping blank lines.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<RunRecord>, LogError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line).map_err(|source| LogError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paramspace::parse_space;

    #[test]
    fn record_round_trip() {
        let space = parse_space("x integer [0, 9] [3]\nm real [0.1, 10] [1.5] log").unwrap();
        let result = RunResult {
            spec: RunSpec::new(space.default_config(), "bench.js", 17),
            outcome: Outcome::Timeout,
            measured: 60.02,
            reported: None,
            exit: ExitStatus::Signal(15),
            wall: 61.5,
            timestamp: 1.7e9,
            load: 8,
        };
        let mut buf = Vec::new();
        write_records(&mut buf, &[RunRecord::from_result(&result, Some("default"))]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains(r#""outcome":"TIMEOUT""#));
        assert!(text.contains(r#""config":"m=1.5 x=3""#));
        let back = read_records(text.as_bytes()).unwrap();
        assert_eq!(back[0].label.as_deref(), Some("default"));
        assert_eq!(back[0].clone().into_result(&space).unwrap(), result);
    }

    #[test]
    fn bad_lines() {
        let space = parse_space("x integer [0, 9] [3]").unwrap();
        assert!(matches!(read_records("{}\n".as_bytes()), Err(LogError::Json { line: 1, .. })));
        let rec = r#"{"config":"x=12","instance":"i","seed":0,"outcome":"SUCCESS","measured":1.0,"exit":{"code":0},"wall":1.0,"timestamp":0.0,"load":1}"#;
        let r = parse_record(rec).unwrap();
        assert!(matches!(r.into_result(&space), Err(LogError::Config(_))));
        let neg = rec.replace("x=12", "x=1").replace(r#""measured":1.0"#, r#""measured":-1.0"#);
        assert!(matches!(parse_record(&neg).unwrap().into_result(&space), Err(LogError::Invalid(_))));
    }
}
