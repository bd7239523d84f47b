//! Plain-text manifests: one entry per line, blank lines and `#` comments
//! skipped, relative paths resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

fn entries(path: &Path) -> Result<(PathBuf, Vec<(usize, String)>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    Ok((base, lines))
}

fn resolve(base: &Path, entry: &str) -> PathBuf {
    let p = Path::new(entry);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// One path per line.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let (base, lines) = entries(path.as_ref())?;
    Ok(lines.iter().map(|(_, l)| resolve(&base, l)).collect())
}

/// Two paths per line, separated by a tab, or by whitespace when the line
/// has no tab.
pub fn read_pair_manifest(path: impl AsRef<Path>) -> Result<Vec<(PathBuf, PathBuf)>> {
    let path = path.as_ref();
    let (base, lines) = entries(path)?;
    lines
        .iter()
        .map(|(n, l)| {
            let parts: Vec<&str> = if l.contains('\t') {
                l.split('\t').map(str::trim).filter(|s| !s.is_empty()).collect()
            } else {
                l.split_whitespace().collect()
            };
            match parts.as_slice() {
                [a, b] => Ok((resolve(&base, a), resolve(&base, b))),
                _ => Err(Error::Config(format!(
                    "{}:{n}: expected a reference and a degraded path",
                    path.display()
                ))),
            }
        })
        .collect()
}
