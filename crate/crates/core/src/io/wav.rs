//! 16-bit mono PCM WAV files.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::{Error, Result};

/// Decoded mono audio with samples in `[-1, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WavFile {
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

impl WavFile {
    pub fn new(sample_rate: u32, samples: Vec<f32>) -> Self {
        Self {
            sample_rate,
            samples,
        }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// `s / 32768`.
pub fn dequantize(s: i16) -> f32 {
    s as f32 / 32768.0
}

/// Inverse of [`dequantize`]: rounds half away from zero, then clamps.
pub fn quantize(x: f32) -> i16 {
    (x as f64 * 32768.0)
        .round()
        .clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

fn wav_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WavFile> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => wav_err(path, other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(wav_err(
            path,
            format!("unsupported channels={}, expected mono", spec.channels),
        ));
    }
    if spec.sample_format != SampleFormat::Int {
        return Err(wav_err(
            path,
            "unsupported encoding: IEEE float, expected 16-bit PCM",
        ));
    }
    if spec.bits_per_sample != 16 {
        return Err(wav_err(
            path,
            format!(
                "unsupported bits_per_sample={}, expected 16",
                spec.bits_per_sample
            ),
        ));
    }
    let declared = reader.len() as usize;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(dequantize))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_err(path, format!("truncated or corrupt payload: {e}")))?;
    if samples.len() != declared {
        return Err(wav_err(
            path,
            format!(
                "truncated payload: header declares {declared} samples, found {}",
                samples.len()
            ),
        ));
    }
    Ok(WavFile {
        sample_rate: spec.sample_rate,
        samples,
    })
}

pub fn write_wav(path: impl AsRef<Path>, wav: &WavFile) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: wav.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => wav_err(path, other.to_string()),
    };
    let mut w = WavWriter::create(path, spec).map_err(to_err)?;
    {
        let mut iw = w.get_i16_writer(wav.samples.len() as u32);
        for &s in &wav.samples {
            iw.write_sample(quantize(s));
        }
        iw.flush().map_err(to_err)?;
    }
    w.finalize().map_err(to_err)
}
