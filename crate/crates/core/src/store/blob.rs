use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fingerprint::{checksum128, Checksum128};
use crate::ingest::MediaKind;
use crate::{Error, Result};

/// Reference to a stored media payload.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlobRef {
    pub checksum: Checksum128,
    pub size_bytes: u64,
    pub media_kind: MediaKind,
}

impl BlobRef {
    /// Path relative to the dataset root: `blobs/<first 2 hex>/<hex>`.
    pub fn relative_path(&self) -> String {
        blob_relative_path(&self.checksum)
    }
}

fn blob_relative_path(checksum: &Checksum128) -> String {
    let hex = checksum.to_hex();
    format!("blobs/{}/{}", &hex[..2], hex)
}

/// Content-addressed payload store rooted at a dataset directory.
#[derive(Clone, Debug)]
pub struct BlobStore {
    root: PathBuf,
}

impl BlobStore {
    /// Blobs live under `<dataset>/blobs`; nothing is created until the
    /// first write.
    pub fn open(dataset_dir: impl Into<PathBuf>) -> Self {
        BlobStore {
            root: dataset_dir.into(),
        }
    }

    pub fn path_of(&self, checksum: &Checksum128) -> PathBuf {
        self.root.join(blob_relative_path(checksum))
    }

    pub fn contains(&self, checksum: &Checksum128) -> bool {
        self.path_of(checksum).is_file()
    }

    /// Stores `payload`. Storing bytes that are already present is a no-op
    /// returning the same reference.
    pub fn put_blob(&self, payload: &[u8], media_kind: MediaKind) -> Result<BlobRef> {
        let blob = BlobRef {
            checksum: checksum128(payload),
            size_bytes: payload.len() as u64,
            media_kind,
        };
        let path = self.path_of(&blob.checksum);
        if path.is_file() {
            return Ok(blob);
        }
        let dir = path.parent().expect("blob path has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tmp = dir.join(format!(".{}.tmp", blob.checksum));
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(payload).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(blob)
    }

    pub fn get_blob(&self, blob: &BlobRef) -> Result<Vec<u8>> {
        self.get_by_checksum(&blob.checksum)
    }

    /// Reads a payload and re-verifies its checksum.
    pub fn get_by_checksum(&self, checksum: &Checksum128) -> Result<Vec<u8>> {
        let path = self.path_of(checksum);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::NotFound(format!("blob {checksum}")))
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        let actual = checksum128(&bytes);
        if actual != *checksum {
            return Err(Error::Corruption {
                checksum: checksum.to_hex(),
                actual: actual.to_hex(),
            });
        }
        Ok(bytes)
    }

    /// Number of blob files on disk.
    pub fn count_files(&self) -> Result<usize> {
        let dir = self.root.join("blobs");
        if !dir.exists() {
            return Ok(0);
        }
        let mut n = 0;
        for entry in walkdir::WalkDir::new(&dir) {
            let entry = entry.map_err(|e| Error::io(&dir, e.into()))?;
            if entry.file_type().is_file() && !entry.file_name().to_string_lossy().starts_with('.') {
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}
