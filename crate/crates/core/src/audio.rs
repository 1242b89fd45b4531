//! WAV decoding, preprocessing to the network's input convention, and
//! fixed-length excerpt windows.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

pub const TARGET_RATE: u32 = 22_050;
/// Amplitude bound of preprocessed audio.
pub const TARGET_RANGE: f32 = 256.0;
pub const DEFAULT_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    /// Interleaved when `channels > 1`.
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub channels: u16,
    /// Nominal amplitude bound: 1 after decoding, 256 after preprocessing.
    pub range: f32,
}

impl Waveform {
    pub fn mono(samples: Vec<f32>, sample_rate: u32, range: f32) -> Self {
        Self {
            samples,
            sample_rate,
            channels: 1,
            range,
        }
    }

    /// Samples per channel.
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels.max(1) as usize
    }

    pub fn duration_seconds(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }
}

fn wav_error(err: hound::Error) -> Error {
    let (field, message) = match err {
        hound::Error::FormatError(m) => ("header", m.to_string()),
        hound::Error::Unsupported => ("format", "unsupported sample format".to_string()),
        hound::Error::InvalidSampleFormat => ("format", "invalid sample format".to_string()),
        hound::Error::TooWide => ("bits_per_sample", "sample width too large".to_string()),
        hound::Error::UnfinishedSample => ("data", "data chunk ends inside a sample".to_string()),
        hound::Error::IoError(e) => ("data", e.to_string()),
    };
    Error::Wav { field, message }
}

/// Decodes 16-bit PCM or 32-bit float WAV bytes into samples in `[-1, 1]`.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    let mut reader = hound::WavReader::new(Cursor::new(bytes)).map_err(wav_error)?;
    let spec = reader.spec();
    if !(1..=2).contains(&spec.channels) {
        return Err(Error::Wav {
            field: "channels",
            message: format!("{} channels (expected 1 or 2)", spec.channels),
        });
    }
    let samples: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_error)?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_error)?,
        (format, bits) => {
            return Err(Error::Wav {
                field: "format",
                message: format!("{bits}-bit {format:?} samples are not supported (PCM-16 or float-32 only)"),
            })
        }
    };
    let expected = reader.len() as usize;
    if samples.len() != expected {
        return Err(Error::Wav {
            field: "data",
            message: format!("data chunk holds {} of {expected} declared samples", samples.len()),
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("wav samples"));
    }
    Ok(Waveform {
        samples,
        sample_rate: spec.sample_rate,
        channels: spec.channels,
        range: 1.0,
    })
}

pub fn load_wav(path: &Path) -> Result<Waveform> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

/// Encodes samples in `[-1, 1]` as 16-bit PCM WAV bytes.
pub fn encode_wav_pcm16(samples: &[f32], sample_rate: u32, channels: u16) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec).map_err(wav_error)?;
        for &s in samples {
            let v = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            writer.write_sample(v).map_err(wav_error)?;
        }
        writer.finalize().map_err(wav_error)?;
    }
    Ok(cursor.into_inner())
}

fn downmix(w: &Waveform) -> Vec<f32> {
    let c = w.channels.max(1) as usize;
    if c == 1 {
        return w.samples.clone();
    }
    w.samples
        .chunks_exact(c)
        .map(|frame| frame.iter().sum::<f32>() / c as f32)
        .collect()
}

/// Linear-interpolation resampling; the identity at equal rates.
pub fn resample_linear(samples: &[f32], from_rate: u32, to_rate: u32) -> Vec<f32> {
    if from_rate == to_rate || samples.len() < 2 {
        return samples.to_vec();
    }
    let ratio = from_rate as f64 / to_rate as f64;
    let out_len = ((samples.len() as f64 / ratio).round() as usize).max(1);
    let last = samples.len() - 1;
    (0..out_len)
        .map(|i| {
            let x = i as f64 * ratio;
            let j = (x.floor() as usize).min(last);
            let frac = (x - j as f64).min(1.0);
            let a = samples[j] as f64;
            let b = samples[(j + 1).min(last)] as f64;
            (a + (b - a) * frac) as f32
        })
        .collect()
}

/// Mono, 22,050 Hz, amplitudes rescaled from the nominal range to `±256`.
/// No mean subtraction.
pub fn preprocess(w: &Waveform) -> Result<Waveform> {
    if w.samples.is_empty() {
        return Err(Error::Empty("waveform"));
    }
    if !(w.range > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "waveform range must be positive, got {}",
            w.range
        )));
    }
    let mono = downmix(w);
    let gain = TARGET_RANGE / w.range;
    let samples = resample_linear(&mono, w.sample_rate, TARGET_RATE)
        .into_iter()
        .map(|v| (v * gain).clamp(-TARGET_RANGE, TARGET_RANGE))
        .collect();
    Ok(Waveform::mono(samples, TARGET_RATE, TARGET_RANGE))
}

/// Window length in samples for `seconds` at `sample_rate`.
pub fn window_samples(seconds: f64, sample_rate: u32) -> Result<usize> {
    let n = (seconds * sample_rate as f64).round();
    if !(seconds > 0.0) || !seconds.is_finite() || n < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "window length must be positive, got {seconds} s"
        )));
    }
    Ok(n as usize)
}

/// Start offsets of windows of `win` samples over `len` samples with the
/// given hop; the last window is right-aligned to cover the tail.
pub fn window_starts(len: usize, win: usize, hop: usize) -> Vec<usize> {
    if len <= win {
        return vec![0];
    }
    let mut starts: Vec<usize> = (0..=len - win).step_by(hop.max(1)).collect();
    if starts.last().is_some_and(|&s| s + win < len) {
        starts.push(len - win);
    }
    starts
}

/// Overlapping excerpts of exactly `window_seconds` each. A recording
/// shorter than one window yields a single window zero-padded on the right.
pub fn extract_windows(w: &Waveform, window_seconds: f64, overlap_fraction: f64) -> Result<Vec<Vec<f32>>> {
    if w.channels != 1 {
        return Err(Error::InvalidArgument(
            "windows are cut from mono audio; preprocess first".into(),
        ));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidArgument(format!(
            "overlap must lie in [0, 1), got {overlap_fraction}"
        )));
    }
    let win = window_samples(window_seconds, w.sample_rate)?;
    let hop = ((win as f64 * (1.0 - overlap_fraction)).round() as usize).max(1);
    let s = &w.samples;
    Ok(window_starts(s.len(), win, hop)
        .into_iter()
        .map(|start| {
            let end = (start + win).min(s.len());
            let mut out = s[start..end].to_vec();
            out.resize(win, 0.0);
            out
        })
        .collect())
}
