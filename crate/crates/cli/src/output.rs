//! Output files are staged next to their destination and renamed into place
//! only after every output of a command has been produced.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::failure::Failure;

pub struct Staged {
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn new() -> Self {
        Self { files: Vec::new() }
    }

    pub fn add(&mut self, path: &Path, bytes: &[u8]) -> Result<(), Failure> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).map_err(Failure::write(path))?;
        tmp.write_all(bytes).map_err(Failure::write(path))?;
        tmp.as_file().sync_all().map_err(Failure::write(path))?;
        self.files.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub fn commit(self) -> Result<(), Failure> {
        for (tmp, path) in self.files {
            tmp.persist(&path).map_err(|e| Failure::write(&path)(e.error))?;
        }
        Ok(())
    }
}

pub fn write_one(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let mut staged = Staged::new();
    staged.add(path, bytes)?;
    staged.commit()
}
