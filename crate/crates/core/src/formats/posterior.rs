//! Teacher posterior files.
//!
//! ```text
//! "SNTP"               magic
//! u32                  version (1)
//! u32                  clip count
//! per clip:  u32 len, utf8 clip id, u32 T, T × (1000 object + 401 scene) f32
//! ```
//!
//! Every object block and every scene block must be non-negative and sum
//! to 1 within 1e-3.

use std::path::Path;

use super::binary::{Reader, Writer};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::network::HeadSplit;
use crate::training::TeacherPosterior;

pub const POSTERIOR_MAGIC: [u8; 4] = *b"SNTP";
pub const POSTERIOR_VERSION: u32 = 1;
pub const NORMALIZATION_TOLERANCE: f64 = 1e-3;

/// Rejects negative or non-finite entries and blocks whose sum is off by
/// more than [`NORMALIZATION_TOLERANCE`].
pub fn validate_posterior(p: &TeacherPosterior, split: &HeadSplit) -> Result<()> {
    if p.classes != split.total() {
        return Err(Error::ShapeMismatch {
            dimension: "posterior classes",
            expected: split.total(),
            actual: p.classes,
        });
    }
    for t in 0..p.timesteps {
        let row = p.timestep(t);
        for (block, range) in ["object", "scene"].into_iter().zip(split.heads()) {
            let values = &row[range];
            if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Malformed(format!(
                    "clip `{}` timestep {t}: {block} block has negative or non-finite probabilities",
                    p.clip_id
                )));
            }
            let sum: f64 = values.iter().map(|&v| v as f64).sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::NotNormalized {
                    clip: p.clip_id.clone(),
                    timestep: t,
                    block,
                    sum,
                });
            }
        }
    }
    Ok(())
}

pub fn encode_posteriors(clips: &[TeacherPosterior]) -> Result<Vec<u8>> {
    let split = HeadSplit::default();
    let mut w = Writer::default();
    w.bytes(&POSTERIOR_MAGIC);
    w.u32(POSTERIOR_VERSION);
    w.len(clips.len())?;
    for c in clips {
        validate_posterior(c, &split)?;
        w.str(&c.clip_id)?;
        w.len(c.timesteps)?;
        w.f32s(&c.probs);
    }
    Ok(w.buf)
}

pub fn read_posteriors(bytes: &[u8]) -> Result<Vec<TeacherPosterior>> {
    let split = HeadSplit::default();
    let mut r = Reader::new(bytes);
    let magic: [u8; 4] = r.array("magic")?;
    if magic != POSTERIOR_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != POSTERIOR_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = r.u32("clip count")? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let id = r.str("clip id")?;
        let steps = r.u32("timestep count")? as usize;
        let n = steps
            .checked_mul(split.total())
            .ok_or_else(|| Error::Malformed("timestep count overflows".into()))?;
        let probs = r.f32s(n, "probabilities")?;
        let p = TeacherPosterior::new(id, steps, split.total(), probs)?;
        validate_posterior(&p, &split)?;
        out.push(p);
    }
    if r.remaining() != 0 {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after the last clip",
            r.remaining()
        )));
    }
    Ok(out)
}

pub fn write_posteriors(path: &Path, clips: &[TeacherPosterior]) -> Result<()> {
    write_atomic(path, &encode_posteriors(clips)?)
}

pub fn load_posteriors(path: &Path) -> Result<Vec<TeacherPosterior>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_posteriors(&bytes)
}
