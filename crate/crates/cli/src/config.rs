use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use simplexdyn::payoff::MatrixFile;
use simplexdyn::PayoffMatrix;

use crate::failure::Failure;

pub const VERSION: &str = env!("SIMPLEXDYN_VERSION");

/// A parsed configuration together with what every artifact records about it.
pub struct Loaded<T> {
    pub config: T,
    pub echo: Value,
    /// SHA-256 of the canonical (key-sorted, whitespace-free) JSON.
    pub hash: String,
    /// Relative paths inside the config resolve against this directory.
    pub base: PathBuf,
}

impl<T> Loaded<T> {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn provenance(&self, command: &str, seed: Option<u64>) -> Provenance {
        Provenance {
            command: command.to_string(),
            version: VERSION.to_string(),
            config_sha256: self.hash.clone(),
            seed,
            config: self.echo.clone(),
        }
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    let echo: Value = serde_json::from_str(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    let canonical = serde_json::to_vec(&echo).expect("a parsed value serializes");
    let hash = format!("{:x}", Sha256::digest(&canonical));
    let config = T::deserialize(&echo).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, echo, hash, base })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub config: Value,
}

/// A payoff matrix given inline as rows or as the path of a matrix file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    File(PathBuf),
}

impl MatrixSpec {
    pub fn load<T>(&self, ctx: &Loaded<T>) -> Result<PayoffMatrix, Failure> {
        match self {
            MatrixSpec::Rows(rows) => PayoffMatrix::from_rows(rows).map_err(Failure::setup),
            MatrixSpec::File(p) => {
                let path = ctx.resolve(p);
                let text = fs::read_to_string(&path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
                let file: MatrixFile =
                    serde_json::from_str(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
                PayoffMatrix::from_file(&file).map_err(Failure::setup)
            }
        }
    }
}

pub fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir.display(), e))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::io(path.display(), e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifacts serialize");
    bytes.push(b'\n');
    write(path, &bytes)
}
