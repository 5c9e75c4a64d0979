use std::io::Write;
use std::path::Path;

use crate::{CliError, CliResult};

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| CliError::Runtime(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn require_file(flag: &str, path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{flag}: no such file {}", path.display())))
    }
}

pub fn require_dir(flag: &str, path: &Path) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{flag}: no such directory {}", path.display())))
    }
}

/// Encodes `img` in the format implied by `path`'s extension.
pub fn encode_image(img: &dfm::ImageBuffer, path: &Path) -> CliResult<Vec<u8>> {
    let format =
        image::ImageFormat::from_path(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut bytes = std::io::Cursor::new(Vec::new());
    dfm::io::to_dynamic(img)
        .write_to(&mut bytes, format)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(bytes.into_inner())
}
