//! Input opening and all-or-nothing output files.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{CliError, Result};

/// Path `-` means standard input / output.
pub fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn open_or_stdin(path: Option<&Path>) -> Result<Box<dyn BufRead>> {
    match path {
        Some(p) if !is_stdio(p) => Ok(Box::new(open(p)?)),
        _ => Ok(Box::new(BufReader::new(io::stdin().lock()))),
    }
}

/// Fails with an io error naming the first input that does not exist.
pub fn require_inputs<'a, I: IntoIterator<Item = &'a Path>>(paths: I) -> Result<()> {
    for path in paths {
        if !is_stdio(path) && !path.is_file() {
            return Err(CliError::Io {
                path: path.to_owned(),
                source: io::Error::new(io::ErrorKind::NotFound, "input file not found"),
            });
        }
    }
    Ok(())
}

/// Writes through `f` into a temporary file next to `path` and renames it
/// into place only if `f` succeeds.
pub fn write_atomic<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let io_err = |source: io::Error| CliError::Io {
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_owned(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io_err)?;
    let tmp = temp_file(&dir).map_err(io_err)?;
    {
        let mut writer = BufWriter::new(tmp.as_file());
        f(&mut writer)?;
        writer.flush().map_err(io_err)?;
    }
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

#[cfg(unix)]
fn temp_file(dir: &Path) -> io::Result<NamedTempFile> {
    use std::os::unix::fs::PermissionsExt;
    tempfile::Builder::new()
        .prefix(".wikilink-")
        .permissions(std::fs::Permissions::from_mode(0o644))
        .tempfile_in(dir)
}

#[cfg(not(unix))]
fn temp_file(dir: &Path) -> io::Result<NamedTempFile> {
    tempfile::Builder::new().prefix(".wikilink-").tempfile_in(dir)
}

/// Atomic file output, or plain stdout for `None` / `-`.
pub fn write_to<F>(path: Option<&Path>, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(p) if !is_stdio(p) => write_atomic(p, f),
        _ => {
            let stdout = io::stdout();
            let mut lock = BufWriter::new(stdout.lock());
            f(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}
