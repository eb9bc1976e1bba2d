//! Errors, exit codes, config hashing and file output.

use std::io::Write;
use std::path::Path;

use catfuse::grouplasso::GroupLassoError;
use catfuse::model_io::ModelIoError;
use catfuse::partition::PartitionError;
use catfuse::pdmr::PdmrError;
use catfuse::schema::SchemaError;
use catfuse::simbench::SimError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Convergence(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Convergence(_) => "convergence",
            CliError::Input(_) => "input",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<GroupLassoError> for CliError {
    fn from(e: GroupLassoError) -> Self {
        match e {
            GroupLassoError::NoConvergence { .. } => CliError::Convergence(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<PartitionError> for CliError {
    fn from(e: PartitionError) -> Self {
        match e {
            PartitionError::RankDeficient { .. } | PartitionError::Overparameterized { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<PdmrError> for CliError {
    fn from(e: PdmrError) -> Self {
        match e {
            PdmrError::GroupLasso(g) => g.into(),
            PdmrError::Partition(p) => p.into(),
            PdmrError::AllLambdasFailed(_) => CliError::Convergence(e.to_string()),
            PdmrError::InvalidCriterion(_) | PdmrError::AllInfeasible => CliError::Input(e.to_string()),
            PdmrError::NotScreened(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<ModelIoError> for CliError {
    fn from(e: ModelIoError) -> Self {
        match e {
            ModelIoError::Partition(p) => p.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Coverage(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

/// Hash of the resolved options plus the bytes of every input file; paths
/// and thread counts do not enter.
pub fn config_hash<T: Serialize>(command: &str, args: &T, inputs: &[&[u8]]) -> Result<String, CliError> {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(serde_json::to_vec(args)?);
    for bytes in inputs {
        h.update(Sha256::digest(bytes));
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Comment line heading every CSV output.
pub fn header_line(seed: Option<u64>, hash: &str) -> String {
    match seed {
        Some(s) => format!("# catfuse {VERSION} seed={s} config={hash}\n"),
        None => format!("# catfuse {VERSION} config={hash}\n"),
    }
}

pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Internal(e.to_string()))
        }
    }
}

/// CSV body into a byte buffer.
pub fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        fill(&mut w)?;
        w.flush().map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(buf)
}
