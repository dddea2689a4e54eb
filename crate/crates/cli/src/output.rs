use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use treesample_core::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_CAPACITY: i32 = 4;
pub const EXIT_CHECK: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Core(Error),
    Io(PathBuf, io::Error),
    /// A computed self-check did not hold.
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Core(Error::CapExceeded { .. }) => EXIT_CAPACITY,
            CliError::Core(
                Error::BalanceViolation { .. } | Error::InternalInvariantViolation(_) | Error::NoConvergence { .. },
            ) => EXIT_CHECK,
            CliError::Core(_) => EXIT_VALIDATION,
            CliError::Io(..) => 1,
            CliError::Check(_) => EXIT_CHECK,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Validation(msg) | CliError::Check(msg) => f.write_str(msg),
            CliError::Core(Error::CapExceeded { m, cap }) => write!(
                f,
                "m = {m} exceeds the exhaustive cap of {cap}; use a smaller m or the sampler for larger instances"
            ),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(path, e) => write!(f, "{}: {e}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
}

/// Destination for a command's data: a directory (with a manifest) or stdout.
pub struct Sink {
    dir: Option<PathBuf>,
    files: Vec<OutputFile>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> CliResult<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| CliError::Io(d.clone(), e))?;
        }
        Ok(Sink { dir, files: Vec::new() })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                fs::write(&path, bytes).map_err(|e| CliError::Io(path, e))?;
                self.record(name, bytes);
            }
            None => {
                let mut out = io::stdout().lock();
                out.write_all(bytes)
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::Io("<stdout>".into(), e))?;
            }
        }
        Ok(())
    }

    /// Registers a file already written to the output directory.
    pub fn record(&mut self, name: &str, bytes: &[u8]) {
        self.files.push(OutputFile {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn record_hash(&mut self, name: &str, sha256: String) {
        self.files.push(OutputFile {
            name: name.to_string(),
            sha256,
        });
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Command line after the program name.
    pub args: Vec<String>,
    /// Flag values after defaults and parameter-set lookup.
    pub resolved: serde_json::Value,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputFile>,
}

pub const MANIFEST_NAME: &str = "manifest.json";
