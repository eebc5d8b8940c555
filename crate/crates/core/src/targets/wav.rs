//! RIFF WAV input through `hound`.

use std::io::Read;

use crate::error::{Error, Result};

/// Planar samples scaled to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub rate: u32,
    pub channels: Vec<Vec<f64>>,
}

fn hound_err(e: hound::Error) -> Error {
    match e {
        // opening happens outside hound, so read failures here mean a short or
        // mangled file
        hound::Error::IoError(io) => Error::Format(format!("unreadable WAV data: {io}")),
        other => Error::Format(other.to_string()),
    }
}

/// 16/24-bit integer or 32-bit float PCM, mono or stereo, at least 8 kHz.
pub fn read_wav<R: Read>(reader: R) -> Result<Audio> {
    let mut wav = hound::WavReader::new(reader).map_err(hound_err)?;
    let spec = wav.spec();
    if !(1..=2).contains(&spec.channels) {
        return Err(Error::Format(format!("{} channels; only mono and stereo are supported", spec.channels)));
    }
    if spec.sample_rate < 8_000 {
        return Err(Error::Format(format!("sample rate {} Hz is below 8 kHz", spec.sample_rate)));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = (1i64 << (bits - 1)) as f64;
            wav.samples::<i32>().map(|s| s.map(|v| v as f64 / scale)).collect::<Result<_, _>>().map_err(hound_err)?
        }
        (hound::SampleFormat::Float, 32) => {
            wav.samples::<f32>().map(|s| s.map(f64::from)).collect::<Result<_, _>>().map_err(hound_err)?
        }
        (fmt, bits) => return Err(Error::Format(format!("unsupported sample layout: {bits}-bit {fmt:?}"))),
    };
    let n = spec.channels as usize;
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n); n];
    for (i, v) in interleaved.into_iter().enumerate() {
        channels[i % n].push(v);
    }
    Ok(Audio { rate: spec.sample_rate, channels })
}

pub fn read_wav_file(path: &std::path::Path) -> Result<Audio> {
    read_wav(std::io::BufReader::new(std::fs::File::open(path)?))
}
