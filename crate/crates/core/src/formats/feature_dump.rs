//! Feature dumps: a header naming the layer and dimension, then one record
//! per window until end of file.
//!
//! ```text
//! "SNFD"  u32 version (1)  u32 len, utf8 layer  u32 dim
//! per record:  u32 len, utf8 window id, dim × f32
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::binary::{Reader, Writer};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const FEATURE_MAGIC: [u8; 4] = *b"SNFD";
pub const FEATURE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDump {
    pub layer: String,
    pub dim: usize,
    pub records: Vec<(String, Vec<f32>)>,
}

fn header(layer: &str, dim: usize) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(&FEATURE_MAGIC);
    w.u32(FEATURE_VERSION);
    w.str(layer)?;
    w.len(dim)?;
    Ok(w.buf)
}

fn record(id: &str, values: &[f32]) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.str(id)?;
    w.f32s(values);
    Ok(w.buf)
}

impl FeatureDump {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = header(&self.layer, self.dim)?;
        for (id, values) in &self.records {
            if values.len() != self.dim {
                return Err(Error::ShapeMismatch {
                    dimension: "feature dimension",
                    expected: self.dim,
                    actual: values.len(),
                });
            }
            out.extend(record(id, values)?);
        }
        Ok(out)
    }
}

/// Streams records to a temp file that is renamed into place by `finish`.
pub struct FeatureDumpWriter {
    path: PathBuf,
    tmp: PathBuf,
    out: BufWriter<File>,
    layer: String,
    dim: usize,
    records: usize,
}

impl FeatureDumpWriter {
    pub fn create(path: &Path, layer: &str, dim: usize) -> Result<Self> {
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("features");
        let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(&header(layer, dim)?).map_err(|e| Error::io(&tmp, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            tmp,
            out,
            layer: layer.to_string(),
            dim,
            records: 0,
        })
    }

    pub fn write(&mut self, feature: &FeatureVector) -> Result<()> {
        if feature.values.len() != self.dim {
            return Err(Error::ShapeMismatch {
                dimension: "feature dimension",
                expected: self.dim,
                actual: feature.values.len(),
            });
        }
        if feature.source_layer != self.layer {
            return Err(Error::InvalidArgument(format!(
                "feature from `{}` written to a `{}` dump",
                feature.source_layer, self.layer
            )));
        }
        self.out
            .write_all(&record(&feature.window_id, &feature.values)?)
            .map_err(|e| Error::io(&self.tmp, e))?;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn finish(self) -> Result<()> {
        let file = self
            .out
            .into_inner()
            .map_err(|e| Error::io(&self.tmp, e.into_error()))?;
        file.sync_all().map_err(|e| Error::io(&self.tmp, e))?;
        drop(file);
        std::fs::rename(&self.tmp, &self.path).map_err(|e| Error::io(&self.path, e))
    }
}

pub fn decode_feature_dump(bytes: &[u8]) -> Result<FeatureDump> {
    let mut r = Reader::new(bytes);
    let magic: [u8; 4] = r.array("magic")?;
    if magic != FEATURE_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != FEATURE_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let layer = r.str("layer name")?;
    let dim = r.u32("dimension")? as usize;
    let mut records = Vec::new();
    while r.remaining() > 0 {
        let id = r.str("window id")?;
        let values = r.f32s(dim, "feature values")?;
        records.push((id, values));
    }
    Ok(FeatureDump { layer, dim, records })
}

pub fn read_feature_dump(path: &Path) -> Result<FeatureDump> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_dump(&bytes)
}
