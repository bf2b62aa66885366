//! Crash-safe file replacement and the single-writer lock.

use std::ffi::OsString;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name: OsString = path.file_name().map(OsString::from).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// Contents written to a temporary sibling, not yet visible at the target path.
///
/// Dropping it without [`Staged::commit`] removes the temporary file and
/// leaves the target untouched.
#[derive(Debug)]
pub struct Staged {
    temp: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl Staged {
    pub fn temp_path(&self) -> &Path {
        &self.temp
    }

    pub fn commit(mut self) -> io::Result<()> {
        fs::rename(&self.temp, &self.target)?;
        self.committed = true;
        if let Some(dir) = self.target.parent().filter(|d| !d.as_os_str().is_empty()) {
            // Directory fsync is best-effort; not every platform allows opening one.
            if let Ok(d) = File::open(dir) {
                let _ = d.sync_all();
            }
        }
        Ok(())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_file(&self.temp);
        }
    }
}

pub fn stage(path: impl AsRef<Path>, contents: &[u8]) -> io::Result<Staged> {
    let target = path.as_ref().to_path_buf();
    let temp = sibling(&target, &format!(".tmp.{}", std::process::id()));
    let staged = Staged { temp, target, committed: false };
    let mut f = File::create(&staged.temp)?;
    f.write_all(contents)?;
    f.sync_all()?;
    Ok(staged)
}

/// Replaces `path` by write-to-temporary, fsync, rename.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> io::Result<()> {
    stage(path, contents)?.commit()
}

/// Exclusive advisory lock held as `<path>.lock` for the guard's lifetime.
#[derive(Debug)]
pub struct LockFile {
    path: PathBuf,
}

impl LockFile {
    pub fn acquire(guarded: impl AsRef<Path>) -> io::Result<Self> {
        let path = sibling(guarded.as_ref(), ".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(io::Error::new(
                e.kind(),
                format!("{} exists: another advisory cycle is running (remove it if stale)", path.display()),
            )),
            Err(e) => Err(e),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Drop for LockFile {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("kb.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn uncommitted_stage_leaves_old_version() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("kb.json");
        write_atomic(&p, b"old").unwrap();
        let staged = stage(&p, b"new").unwrap();
        assert_eq!(fs::read(staged.temp_path()).unwrap(), b"new");
        assert_eq!(fs::read(&p).unwrap(), b"old");
        drop(staged);
        assert_eq!(fs::read(&p).unwrap(), b"old");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("kb.json");
        let lock = LockFile::acquire(&p).unwrap();
        assert!(lock.path().exists());
        let err = LockFile::acquire(&p).unwrap_err();
        assert_eq!(err.kind(), io::ErrorKind::AlreadyExists);
        drop(lock);
        assert!(LockFile::acquire(&p).is_ok());
    }
}
