//! 16-bit mono PCM WAV files.

use std::path::Path;

use crate::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

const SCALE: f64 = 32768.0;

fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::format(path, other.to_string()),
    }
}

/// Reads a mono 16-bit PCM file as samples in `[-1, 1)` and its rate.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32)> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::format(
            path,
            format!("expected mono audio, found {} channels", spec.channels),
        ));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::format(
            path,
            format!(
                "expected 16-bit PCM, found {} bit {:?}",
                spec.bits_per_sample, spec.sample_format
            ),
        ));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_err(path, e))?;
    if samples.is_empty() {
        return Err(Error::format(path, "file holds no samples"));
    }
    Ok((samples, spec.sample_rate))
}

/// [`read_wav`] that refuses anything but 16 kHz unless `force` is set.
pub fn read_wav_16k(path: impl AsRef<Path>, force: bool) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let (samples, rate) = read_wav(path)?;
    if rate != SAMPLE_RATE {
        if !force {
            return Err(Error::format(
                path,
                format!("sample rate is {rate} Hz, the model expects {SAMPLE_RATE} Hz"),
            ));
        }
        log::warn!(
            "{}: processing {rate} Hz audio as if it were {SAMPLE_RATE} Hz",
            path.display()
        );
    }
    Ok(samples)
}

/// Quantizes one sample, clamping to `[-1, 1)`.
pub fn quantize(x: f64) -> i16 {
    let v = (x * SCALE).round();
    if v.is_nan() {
        0
    } else {
        v.clamp(-SCALE, SCALE - 1.0) as i16
    }
}

pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &s in samples {
        w.write_sample(quantize(s)).map_err(|e| wav_err(path, e))?;
    }
    w.finalize().map_err(|e| wav_err(path, e))
}
