//! Guards an output directory against concurrent runs.

use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use sse_core::Error;

pub const LOCK_NAME: &str = ".sse.lock";

/// Held for the lifetime of a command; the file is removed on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let path = dir.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "`{}` is locked by another run; remove {} if that run is gone",
                dir.display(),
                path.display()
            ))
            .into()),
            Err(e) => Err(Error::Io { path, source: e }.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_acquire_fails_until_release() {
        let dir = std::env::temp_dir().join(format!("sse-lock-{}", std::process::id()));
        let first = DirLock::acquire(&dir).unwrap();
        assert!(DirLock::acquire(&dir).is_err());
        drop(first);
        let again = DirLock::acquire(&dir).unwrap();
        drop(again);
        fs::remove_dir_all(&dir).unwrap();
    }
}
