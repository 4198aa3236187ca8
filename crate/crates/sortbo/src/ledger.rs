//! JSON Lines persistence for run histories.
//!
//! One object per line, tagged by `kind` (record, proposal or failure) and
//! stamped with a schema number. Lines are appended as the run produces them,
//! so a crashed run leaves a readable prefix.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::ExperimentRecord;
use crate::optimizer::{FailureEntry, LedgerEvent, Proposal};

pub const LEDGER_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("ledger file `{0}` already exists; overwriting must be requested explicitly")]
    AlreadyExists(PathBuf),
    #[error("ledger line {line}: {source}")]
    Malformed { line: usize, source: serde_json::Error },
    #[error("ledger line {line}: unsupported schema {found}, expected {LEDGER_SCHEMA}")]
    UnsupportedSchema { line: usize, found: u32 },
    #[error(transparent)]
    Serialize(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One serialized ledger line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LedgerLine {
    Record {
        schema: u32,
        #[serde(flatten)]
        record: ExperimentRecord,
    },
    Proposal {
        schema: u32,
        #[serde(flatten)]
        proposal: Proposal,
    },
    Failure {
        schema: u32,
        #[serde(flatten)]
        failure: FailureEntry,
    },
}

impl LedgerLine {
    fn schema(&self) -> u32 {
        match self {
            LedgerLine::Record { schema, .. }
            | LedgerLine::Proposal { schema, .. }
            | LedgerLine::Failure { schema, .. } => *schema,
        }
    }
}

impl From<&LedgerEvent<'_>> for LedgerLine {
    fn from(event: &LedgerEvent<'_>) -> Self {
        match event {
            LedgerEvent::Record(r) => {
                LedgerLine::Record { schema: LEDGER_SCHEMA, record: (*r).clone() }
            }
            LedgerEvent::Proposal(p) => {
                LedgerLine::Proposal { schema: LEDGER_SCHEMA, proposal: (*p).clone() }
            }
            LedgerEvent::Failure(f) => {
                LedgerLine::Failure { schema: LEDGER_SCHEMA, failure: (*f).clone() }
            }
        }
    }
}

/// Streams ledger lines to a file as a run produces them.
pub struct LedgerWriter {
    out: BufWriter<File>,
}

impl LedgerWriter {
    /// Opens a fresh ledger file. Refuses to clobber an existing one unless
    /// `overwrite` is set.
    pub fn create(path: &Path, overwrite: bool) -> Result<Self, LedgerError> {
        if !overwrite && path.exists() {
            return Err(LedgerError::AlreadyExists(path.to_path_buf()));
        }
        Ok(Self { out: BufWriter::new(File::create(path)?) })
    }

    pub fn append(&mut self, event: &LedgerEvent<'_>) -> Result<(), LedgerError> {
        let line = serde_json::to_string(&LedgerLine::from(event))?;
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn append_record(&mut self, record: &ExperimentRecord) -> Result<(), LedgerError> {
        self.append(&LedgerEvent::Record(record))
    }

    pub fn flush(&mut self) -> Result<(), LedgerError> {
        Ok(self.out.flush()?)
    }
}

/// A parsed ledger file, split by line kind with file order preserved within
/// each kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LedgerFile {
    pub records: Vec<ExperimentRecord>,
    pub proposals: Vec<Proposal>,
    pub failures: Vec<FailureEntry>,
}

pub fn read_ledger(path: &Path) -> Result<LedgerFile, LedgerError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = LedgerFile::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LedgerLine = serde_json::from_str(&line)
            .map_err(|source| LedgerError::Malformed { line: idx + 1, source })?;
        if parsed.schema() != LEDGER_SCHEMA {
            return Err(LedgerError::UnsupportedSchema { line: idx + 1, found: parsed.schema() });
        }
        match parsed {
            LedgerLine::Record { record, .. } => out.records.push(record),
            LedgerLine::Proposal { proposal, .. } => out.proposals.push(proposal),
            LedgerLine::Failure { failure, .. } => out.failures.push(failure),
        }
    }
    Ok(out)
}
