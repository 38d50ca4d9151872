//! Little-endian RIFF WAV reader/writer: 16-bit PCM and 32-bit IEEE float,
//! any channel count (the pipeline uses mono and stereo). No resampling:
//! rate mismatches are the caller's error to surface.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use mixclust_core::dsp::Waveform;

use crate::error::{AppError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

/// Deinterleaved audio.
#[derive(Clone, Debug, PartialEq)]
pub struct WavContent {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl WavContent {
    pub fn mono(w: &Waveform) -> Self {
        WavContent {
            channels: vec![w.samples.clone()],
            sample_rate: w.sample_rate,
        }
    }

    pub fn stereo(left: &Waveform, right: &Waveform) -> Self {
        assert_eq!(left.len(), right.len());
        assert_eq!(left.sample_rate, right.sample_rate);
        WavContent {
            channels: vec![left.samples.clone(), right.samples.clone()],
            sample_rate: left.sample_rate,
        }
    }

    pub fn frames(&self) -> usize {
        self.channels.first().map_or(0, |c| c.len())
    }

    pub fn channel_waveform(&self, index: usize) -> Option<Waveform> {
        self.channels
            .get(index)
            .map(|c| Waveform::new(c.clone(), self.sample_rate))
    }
}

pub fn write_wav(path: &Path, content: &WavContent, format: SampleFormat) -> Result<()> {
    let channels = content.channels.len();
    if channels == 0 {
        return Err(AppError::Input("cannot write a zero-channel WAV".into()));
    }
    let frames = content.frames();
    if content.channels.iter().any(|c| c.len() != frames) {
        return Err(AppError::Input("channel lengths disagree".into()));
    }
    let (bits, fmt_code): (u16, u16) = match format {
        SampleFormat::Pcm16 => (16, 1),
        SampleFormat::Float32 => (32, 3),
    };
    let block_align = channels as u16 * bits / 8;
    let byte_rate = content.sample_rate * block_align as u32;
    let data_len = frames * block_align as usize;

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&fmt_code.to_le_bytes());
    out.extend_from_slice(&(channels as u16).to_le_bytes());
    out.extend_from_slice(&content.sample_rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    for frame in 0..frames {
        for ch in &content.channels {
            let v = ch[frame];
            match format {
                SampleFormat::Pcm16 => {
                    let s = (v.clamp(-1.0, 1.0) * 32767.0).round() as i16;
                    out.extend_from_slice(&s.to_le_bytes());
                }
                SampleFormat::Float32 => {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn read_wav(path: &Path) -> Result<WavContent> {
    let bytes = fs::read(path)?;
    let bad = |msg: &str| AppError::Input(format!("{}: {msg}", path.display()));
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("not a RIFF/WAVE file"));
    }
    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // code, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = (pos + 8 + len).min(bytes.len());
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                let code = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((code, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = pos + 8 + len + (len & 1);
    }
    let (code, channels, rate, bits) = fmt.ok_or_else(|| bad("missing fmt chunk"))?;
    let data = data.ok_or_else(|| bad("missing data chunk"))?;
    if channels == 0 {
        return Err(bad("zero channels"));
    }
    let bytes_per_sample = (bits / 8) as usize;
    let block = channels as usize * bytes_per_sample;
    if block == 0 || data.len() % block != 0 {
        return Err(bad("data chunk length is not a whole number of frames"));
    }
    let frames = data.len() / block;
    let mut out = vec![Vec::with_capacity(frames); channels as usize];
    match (code, bits) {
        (1, 16) => {
            for frame in 0..frames {
                for (c, ch) in out.iter_mut().enumerate() {
                    let off = frame * block + c * 2;
                    let s = i16::from_le_bytes(data[off..off + 2].try_into().unwrap());
                    ch.push(s as f64 / 32767.0);
                }
            }
        }
        (3, 32) => {
            for frame in 0..frames {
                for (c, ch) in out.iter_mut().enumerate() {
                    let off = frame * block + c * 4;
                    let s = f32::from_le_bytes(data[off..off + 4].try_into().unwrap());
                    ch.push(s as f64);
                }
            }
        }
        _ => {
            return Err(bad(&format!(
                "unsupported format: code {code}, {bits} bits (need 16-bit PCM or 32-bit float)"
            )))
        }
    }
    Ok(WavContent {
        channels: out,
        sample_rate: rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 / n as f64) * 1.6 - 0.8).collect()
    }

    #[test]
    fn float32_round_trip_is_lossless_at_f32_precision() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let content = WavContent {
            channels: vec![ramp(100), ramp(100).iter().map(|v| -v).collect()],
            sample_rate: 16000,
        };
        write_wav(&path, &content, SampleFormat::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 16000);
        assert_eq!(back.channels.len(), 2);
        for (a, b) in content.channels[0].iter().zip(back.channels[0].iter()) {
            assert_eq!(*a as f32, *b as f32);
        }
    }

    #[test]
    fn pcm16_round_trip_is_close() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let content = WavContent {
            channels: vec![ramp(64)],
            sample_rate: 8000,
        };
        write_wav(&path, &content, SampleFormat::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        for (a, b) in content.channels[0].iter().zip(back.channels[0].iter()) {
            assert!((a - b).abs() < 1.0 / 32000.0);
        }
    }

    #[test]
    fn garbage_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"not a wav at all").unwrap();
        assert!(read_wav(&path).is_err());
    }

    #[test]
    fn writes_are_byte_identical() {
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.wav");
        let b = dir.path().join("b.wav");
        let content = WavContent {
            channels: vec![ramp(333)],
            sample_rate: 16000,
        };
        write_wav(&a, &content, SampleFormat::Float32).unwrap();
        write_wav(&b, &content, SampleFormat::Float32).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}
