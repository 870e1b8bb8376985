use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::MethodSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("no records")]
    NoRecords,
    #[error("corrupt record on line {line}: {message}")]
    CorruptRecord { line: usize, message: String },
    #[error("line {line}: schema version {version} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersionUnsupported { line: usize, version: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One (proportion, replicate, method) outcome.
///
/// Ranks hold feature names, most important first. A failed trial keeps its
/// coordinates and an `error` message; its metric fields are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub schema_version: u32,
    pub dataset: String,
    pub method: MethodSpec,
    pub proportion: f64,
    pub proportion_index: usize,
    pub replicate: usize,
    pub seed: u64,
    pub n_sample: usize,
    pub f1: Option<f64>,
    pub global_rank: Option<Vec<String>>,
    pub local_ranks: Option<Vec<Vec<String>>>,
    pub error: Option<String>,
    /// Seconds spent on the trial; never serialized so records stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

pub fn write_records<W: Write>(mut out: W, records: &[TrialRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<TrialRecord>, RecordError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |e: serde_json::Error| RecordError::CorruptRecord {
            line: line_no,
            message: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(corrupt)?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(RecordError::SchemaVersionUnsupported {
                    line: line_no,
                    version: v,
                })
            }
            None => {
                return Err(RecordError::CorruptRecord {
                    line: line_no,
                    message: "missing schema_version".into(),
                })
            }
        }
        records.push(serde_json::from_value(value).map_err(corrupt)?);
    }
    if records.is_empty() {
        return Err(RecordError::NoRecords);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> TrialRecord {
        TrialRecord {
            schema_version: SCHEMA_VERSION,
            dataset: "toy".into(),
            method: MethodSpec::ForestShap,
            proportion: 0.3,
            proportion_index: 2,
            replicate: 7,
            seed: u64::MAX - 3,
            n_sample: 21,
            f1: Some(0.1 + 0.2),
            global_rank: Some(vec!["b".into(), "a".into()]),
            local_ranks: Some(vec![vec!["a".into(), "b".into()]]),
            error: None,
            wall_time: 1.5,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[sample(), sample()]).unwrap();
        let back = read_records(&buf[..]).unwrap();
        let mut expected = sample();
        expected.wall_time = 0.0;
        assert_eq!(back, vec![expected.clone(), expected]);
        assert!(!String::from_utf8(buf).unwrap().contains("wall"));
    }

    #[test]
    fn reports_bad_input() {
        assert!(matches!(read_records(&b""[..]), Err(RecordError::NoRecords)));

        let mut buf = Vec::new();
        write_records(&mut buf, &[sample(), sample()]).unwrap();
        buf.truncate(buf.len() - 10);
        assert!(matches!(
            read_records(&buf[..]),
            Err(RecordError::CorruptRecord { line: 2, .. })
        ));

        let line = serde_json::to_string(&sample()).unwrap().replace(
            "\"schema_version\":1",
            "\"schema_version\":9",
        );
        assert!(matches!(
            read_records(line.as_bytes()),
            Err(RecordError::SchemaVersionUnsupported { line: 1, version: 9 })
        ));
    }
}
