//! On-disk formats: checkpoints, teacher posteriors, feature dumps,
//! manifests and run configuration.

mod binary;
pub mod checkpoint;
pub mod config;
pub mod feature_dump;
pub mod manifest;
pub mod posterior;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, TrainingMeta, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::RunConfig;
pub use feature_dump::{read_feature_dump, FeatureDump, FeatureDumpWriter};
pub use manifest::{Manifest, ManifestMode, ManifestRow, RowTarget};
pub use posterior::{encode_posteriors, load_posteriors, read_posteriors, write_posteriors, POSTERIOR_MAGIC};

/// Writes `bytes` to a sibling temp file and renames it over `path`, so an
/// interrupted write never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile_in(dir, path)?;
    tmp.1.write_all(bytes).map_err(|e| Error::io(&tmp.0, e))?;
    tmp.1.sync_all().map_err(|e| Error::io(&tmp.0, e))?;
    drop(tmp.1);
    std::fs::rename(&tmp.0, path).map_err(|e| Error::io(path, e))
}

fn tempfile_in(dir: &Path, target: &Path) -> Result<(std::path::PathBuf, std::fs::File)> {
    let stem = target.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{stem}.{}.tmp", std::process::id()));
    let file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    Ok((tmp, file))
}
