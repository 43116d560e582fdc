use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::{CliError, CliResult};

pub(crate) fn read_config(path: Option<&Path>, command: &str) -> CliResult<toml::Table> {
    let path = path.ok_or_else(|| CliError::Config(format!("{command}: --config PATH is required")))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("config: cannot read `{}`: {e}", path.display())))?;
    text.parse::<toml::Table>().map_err(|e| CliError::Config(format!("config: `{}`: {e}", path.display())))
}

pub(crate) fn decode<T: DeserializeOwned>(table: toml::Table, path: Option<&Path>) -> CliResult<T> {
    let name = path.map_or_else(|| "<config>".to_string(), |p| p.display().to_string());
    table.try_into().map_err(|e| CliError::Config(format!("config: `{name}`: {e}")))
}

pub(crate) fn ensure_dir(dir: &Path) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("output: cannot create `{}`: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

/// Writes `path` through a temporary file in the same directory that is
/// renamed into place once complete.
pub fn write_atomic<F>(path: &Path, fill: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let err = |e: std::io::Error| CliError::Runtime(format!("output: `{}`: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush().map_err(err)?;
    }
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_atomic(path, |w| {
        w.write_all(text.as_bytes()).map_err(|e| CliError::Runtime(format!("output: `{}`: {e}", path.display())))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_text(&path, "first version, longer").unwrap();
        write_text(&path, "second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        let failed = write_atomic(&path, |_| Err(CliError::Runtime("boom".into())));
        assert!(failed.is_err());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn missing_config_names_path() {
        let err = read_config(Some(Path::new("/no/such/file.toml")), "run").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("/no/such/file.toml"));
    }
}
