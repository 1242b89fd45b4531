//! CSV manifests pairing audio files with teacher posteriors or labels.
//!
//! The header row selects the mode: `audio,teacher` for distillation or
//! `audio,label` for labeled data. Relative paths resolve against the
//! manifest's directory.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestMode {
    Distill,
    Labeled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowTarget {
    Teacher(PathBuf),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub audio: PathBuf,
    pub target: RowTarget,
}

impl ManifestRow {
    /// Recording id: the audio file stem.
    pub fn id(&self) -> String {
        recording_id(&self.audio)
    }

    pub fn label(&self) -> Option<&str> {
        match &self.target {
            RowTarget::Label(l) => Some(l),
            RowTarget::Teacher(_) => None,
        }
    }
}

pub fn recording_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub mode: ManifestMode,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    /// Parses manifest text; paths are joined onto `base` when relative.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Manifest(format!("unreadable header: {e}")))?
            .clone();
        let cols: Vec<&str> = headers.iter().collect();
        let mode = match cols.as_slice() {
            ["audio", "teacher"] => ManifestMode::Distill,
            ["audio", "label"] => ManifestMode::Labeled,
            other => {
                return Err(Error::Manifest(format!(
                    "header must be `audio,teacher` or `audio,label`, found `{}`",
                    other.join(",")
                )))
            }
        };
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Manifest(format!("line {line}: {e}")))?;
            let (audio, second) = match (rec.get(0), rec.get(1)) {
                (Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => (a, b),
                _ => return Err(Error::Manifest(format!("line {line}: expected two non-empty fields"))),
            };
            let target = match mode {
                ManifestMode::Distill => RowTarget::Teacher(resolve(second)),
                ManifestMode::Labeled => RowTarget::Label(second.to_string()),
            };
            rows.push(ManifestRow {
                audio: resolve(audio),
                target,
            });
        }
        if rows.is_empty() {
            return Err(Error::Manifest("no rows".into()));
        }
        Ok(Self { mode, rows })
    }

    /// Loads a manifest and checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let manifest = Self::parse(&text, base)?;
        for row in &manifest.rows {
            let mut paths = vec![&row.audio];
            if let RowTarget::Teacher(t) = &row.target {
                paths.push(t);
            }
            for p in paths {
                if !p.exists() {
                    return Err(Error::Manifest(format!(
                        "referenced file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        Ok(manifest)
    }
}
