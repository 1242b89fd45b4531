use std::ops::Range;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor3};

pub const OBJECT_CLASSES: usize = 1000;
pub const SCENE_CLASSES: usize = 401;
pub const OUTPUT_CLASSES: usize = OBJECT_CLASSES + SCENE_CLASSES;

/// Partition of the output channels into per-teacher heads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadSplit {
    pub object_range: Range<usize>,
    pub scene_range: Range<usize>,
}

impl Default for HeadSplit {
    /// Objects in channels `[0, 1000)`, scenes in `[1000, 1401)`.
    fn default() -> Self {
        Self {
            object_range: 0..OBJECT_CLASSES,
            scene_range: OBJECT_CLASSES..OUTPUT_CLASSES,
        }
    }
}

impl HeadSplit {
    /// Object head first, then scene head, covering `[0, objects + scenes)`.
    pub fn new(objects: usize, scenes: usize) -> Result<Self> {
        if objects == 0 || scenes == 0 {
            return Err(Error::InvalidArgument("each head needs at least one class".into()));
        }
        Ok(Self {
            object_range: 0..objects,
            scene_range: objects..objects + scenes,
        })
    }

    pub fn total(&self) -> usize {
        self.scene_range.end
    }

    pub fn heads(&self) -> [Range<usize>; 2] {
        [self.object_range.clone(), self.scene_range.clone()]
    }
}

/// Splits a `(batch, objects + scenes, T)` output into `(object, scene)` logits.
pub fn split_heads<T: Real>(output: &Tensor3<T>, split: &HeadSplit) -> Result<(Tensor3<T>, Tensor3<T>)> {
    if output.channels() != split.total() {
        return Err(Error::ShapeMismatch {
            dimension: "output channels",
            expected: split.total(),
            actual: output.channels(),
        });
    }
    Ok((
        output.channel_slice(split.object_range.start, split.object_range.end)?,
        output.channel_slice(split.scene_range.start, split.scene_range.end)?,
    ))
}
