//! Output sinks. Files are written to a temporary sibling and renamed into
//! place, so a failed run never leaves a truncated file behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use super::CliError;

/// Where a command's single output goes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sink {
    Stdout,
    File(PathBuf),
}

impl Sink {
    /// `None` and `-` both mean standard output.
    pub fn from_arg(path: Option<&Path>) -> Self {
        match path {
            None => Sink::Stdout,
            Some(p) if p.as_os_str() == "-" => Sink::Stdout,
            Some(p) => Sink::File(p.to_path_buf()),
        }
    }

    pub fn write(&self, bytes: &[u8]) -> Result<(), CliError> {
        match self {
            Sink::Stdout => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::input(format!("cannot write to standard output: {e}")))
            }
            Sink::File(path) => write_atomic(path, bytes),
        }
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = stage(path, bytes)?;
    commit(tmp, path)
}

/// Writes several files, renaming none of them into place unless every
/// temporary file was written successfully.
pub fn write_all_atomic(files: &[(PathBuf, Vec<u8>)]) -> Result<(), CliError> {
    let staged = files
        .iter()
        .map(|(path, bytes)| stage(path, bytes))
        .collect::<Result<Vec<_>, _>>()?;
    for (tmp, (path, _)) in staged.into_iter().zip(files) {
        commit(tmp, path)?;
    }
    Ok(())
}

fn write_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::input(format!("cannot write {}: {e}", path.display()))
}

fn stage(path: &Path, bytes: &[u8]) -> Result<NamedTempFile, CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| write_error(path, e))?;
    tmp.write_all(bytes).map_err(|e| write_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| write_error(path, e))?;
    Ok(tmp)
}

fn commit(tmp: NamedTempFile, path: &Path) -> Result<(), CliError> {
    tmp.persist(path).map(|_| ()).map_err(|e| write_error(path, e.error))
}
