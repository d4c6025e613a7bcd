//! Codec degradation for the T03 condition.
//!
//! A codec is either one of the built-in telephony round trips (G.711 μ-law
//! and A-law at 8 kHz, GSM-style 8 kHz band limiting, 8-bit PCM) or an
//! external program run through argv templates. External templates may use
//! `{input}`, `{output}`, `{encoded}` and `{bitrate}`; `{input}` is a 16-bit
//! WAV at the clip's rate and `{output}` must be a WAV the commands leave
//! behind. Every round trip returns 16 kHz audio with the input's duration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::audio::{load_audio, quantize_i16, save_wav, Waveform};
use crate::error::{Error, Result};
use crate::features::SAMPLE_RATE;

use super::manifest::{ClipRecord, Partition};
use super::validate::T03_CODECS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinCodec {
    /// Passes audio through untouched; for tests.
    Identity,
    /// G.711 μ-law at 8 kHz (64 kbit/s).
    Mulaw,
    /// G.711 A-law at 8 kHz (64 kbit/s).
    Alaw,
    /// 300–3400 Hz telephone band at 8 kHz, 16-bit.
    Narrowband,
    /// 8-bit linear PCM at 16 kHz.
    Pcm8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CodecSpec {
    Builtin {
        builtin: BuiltinCodec,
    },
    External {
        commands: Vec<Vec<String>>,
        bitrate: String,
        #[serde(default = "default_encoded_ext")]
        encoded_ext: String,
    },
}

fn default_encoded_ext() -> String {
    "bin".into()
}

/// Codec tag → specification, loaded from JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CodecRegistry {
    pub codecs: BTreeMap<String, CodecSpec>,
}

fn external(commands: &[&[&str]], bitrate: &str, ext: &str) -> CodecSpec {
    CodecSpec::External {
        commands: commands
            .iter()
            .map(|argv| argv.iter().map(|s| s.to_string()).collect())
            .collect(),
        bitrate: bitrate.into(),
        encoded_ext: ext.into(),
    }
}

impl CodecRegistry {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Four telephony codecs that need no external programs.
    pub fn builtin() -> Self {
        let codecs = [
            ("g711u", BuiltinCodec::Mulaw),
            ("g711a", BuiltinCodec::Alaw),
            ("narrowband", BuiltinCodec::Narrowband),
            ("pcm8", BuiltinCodec::Pcm8),
        ]
        .into_iter()
        .map(|(tag, builtin)| (tag.to_string(), CodecSpec::Builtin { builtin }))
        .collect();
        Self { codecs }
    }

    /// Four common telephony/streaming codecs through `ffmpeg`. The choice
    /// of codecs and bitrates is a default, not a reproduction of any
    /// published setup.
    pub fn ffmpeg_defaults() -> Self {
        let round_trip = |codec: &str, ext: &str, extra: &[&str]| {
            let mut enc = vec!["ffmpeg", "-y", "-loglevel", "error", "-i", "{input}", "-c:a", codec, "-b:a", "{bitrate}"];
            enc.extend_from_slice(extra);
            enc.push("{encoded}");
            let enc: Vec<String> = enc.into_iter().map(String::from).collect();
            let dec: Vec<String> = ["ffmpeg", "-y", "-loglevel", "error", "-i", "{encoded}", "-ar", "16000", "-ac", "1", "{output}"]
                .into_iter()
                .map(String::from)
                .collect();
            (enc, dec, ext.to_string())
        };
        let mut codecs = BTreeMap::new();
        for (tag, codec, bitrate, ext, extra) in [
            ("mp3", "libmp3lame", "64k", "mp3", &[][..]),
            ("aac", "aac", "64k", "m4a", &[][..]),
            ("opus", "libopus", "24k", "ogg", &[][..]),
            ("amr-nb", "libopencore_amrnb", "12.2k", "amr", &["-ar", "8000", "-ac", "1"][..]),
        ] {
            let (enc, dec, ext) = round_trip(codec, ext, extra);
            let enc: Vec<&str> = enc.iter().map(String::as_str).collect();
            let dec: Vec<&str> = dec.iter().map(String::as_str).collect();
            codecs.insert(tag.to_string(), external(&[&enc, &dec], bitrate, &ext));
        }
        Self { codecs }
    }

    pub fn get(&self, tag: &str) -> Result<&CodecSpec> {
        self.codecs.get(tag).ok_or_else(|| Error::CodecUnavailable {
            codec: tag.into(),
            reason: "not in the codec configuration".into(),
        })
    }

    pub fn tags(&self) -> Vec<String> {
        self.codecs.keys().cloned().collect()
    }
}

/// Round-trips `w` through the codec named `tag`.
pub fn codec_augment(w: &Waveform, tag: &str, registry: &CodecRegistry) -> Result<Waveform> {
    w.ensure_non_empty()?;
    let out = match registry.get(tag)? {
        CodecSpec::Builtin { builtin: BuiltinCodec::Identity } => return Ok(w.clone()),
        CodecSpec::Builtin { builtin } => builtin_round_trip(w, *builtin)?,
        CodecSpec::External { commands, bitrate, encoded_ext } => external_round_trip(w, tag, commands, bitrate, encoded_ext)?,
    };
    let target = (w.len() as u64 * SAMPLE_RATE as u64 / w.sample_rate as u64) as usize;
    Ok(out.pad_or_trim(target))
}

fn builtin_round_trip(w: &Waveform, codec: BuiltinCodec) -> Result<Waveform> {
    let narrow = |w: &Waveform| w.resampled(8000);
    let coded = match codec {
        BuiltinCodec::Identity => w.clone(),
        BuiltinCodec::Mulaw => {
            let mut n = narrow(w)?;
            n.samples.iter_mut().for_each(|s| *s = ulaw_to_linear(linear_to_ulaw(quantize_i16(*s))) as f32 / 32768.0);
            n
        }
        BuiltinCodec::Alaw => {
            let mut n = narrow(w)?;
            n.samples.iter_mut().for_each(|s| *s = alaw_to_linear(linear_to_alaw(quantize_i16(*s))) as f32 / 32768.0);
            n
        }
        BuiltinCodec::Narrowband => {
            let mut n = narrow(w)?;
            highpass_300(&mut n.samples, n.sample_rate);
            n.samples.iter_mut().for_each(|s| *s = quantize_i16(*s) as f32 / 32768.0);
            n
        }
        BuiltinCodec::Pcm8 => {
            let mut n = w.clone();
            n.samples.iter_mut().for_each(|s| *s = (*s * 128.0).round().clamp(-128.0, 127.0) / 128.0);
            n
        }
    };
    coded.resampled(SAMPLE_RATE)
}

/// Second-order Butterworth high-pass at 300 Hz (bilinear transform).
fn highpass_300(x: &mut [f32], sample_rate: u32) {
    let k = (std::f64::consts::PI * 300.0 / sample_rate as f64).tan();
    let norm = 1.0 / (1.0 + std::f64::consts::SQRT_2 * k + k * k);
    let (b0, b1, b2) = (norm, -2.0 * norm, norm);
    let a1 = 2.0 * (k * k - 1.0) * norm;
    let a2 = (1.0 - std::f64::consts::SQRT_2 * k + k * k) * norm;
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for s in x.iter_mut() {
        let x0 = *s as f64;
        let y0 = b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        (x2, x1, y2, y1) = (x1, x0, y1, y0);
        *s = y0 as f32;
    }
}

const ULAW_BIAS: i32 = 0x84;
const ULAW_CLIP: i32 = 32635;

pub fn linear_to_ulaw(sample: i16) -> u8 {
    let mut s = sample as i32;
    let sign = if s < 0 {
        s = -s;
        0x80
    } else {
        0
    };
    s = s.min(ULAW_CLIP) + ULAW_BIAS;
    let mut exponent = 7;
    let mut mask = 0x4000;
    while s & mask == 0 && exponent > 0 {
        exponent -= 1;
        mask >>= 1;
    }
    let mantissa = (s >> (exponent + 3)) & 0x0F;
    !(sign | (exponent << 4) | mantissa) as u8
}

pub fn ulaw_to_linear(code: u8) -> i16 {
    let u = !code as i32;
    let exponent = (u >> 4) & 0x07;
    let mantissa = u & 0x0F;
    let magnitude = (((mantissa << 3) + ULAW_BIAS) << exponent) - ULAW_BIAS;
    if u & 0x80 != 0 {
        -magnitude as i16
    } else {
        magnitude as i16
    }
}

const ALAW_SEGMENT_END: [i32; 8] = [0x1F, 0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF];

pub fn linear_to_alaw(sample: i16) -> u8 {
    let mut pcm = (sample as i32) >> 3;
    let mask = if pcm >= 0 {
        0xD5
    } else {
        pcm = -pcm - 1;
        0x55
    };
    let Some(seg) = ALAW_SEGMENT_END.iter().position(|&end| pcm <= end) else {
        return (0x7F ^ mask) as u8;
    };
    let mantissa = if seg < 2 { (pcm >> 1) & 0x0F } else { (pcm >> seg) & 0x0F };
    (((seg as i32) << 4 | mantissa) ^ mask) as u8
}

pub fn alaw_to_linear(code: u8) -> i16 {
    let a = (code ^ 0x55) as i32;
    let mut t = (a & 0x0F) << 4;
    let seg = (a & 0x70) >> 4;
    match seg {
        0 => t += 8,
        1 => t += 0x108,
        _ => {
            t += 0x108;
            t <<= seg - 1;
        }
    }
    if a & 0x80 != 0 {
        t as i16
    } else {
        -t as i16
    }
}

fn external_round_trip(w: &Waveform, tag: &str, commands: &[Vec<String>], bitrate: &str, ext: &str) -> Result<Waveform> {
    let unavailable = |reason: String| Error::CodecUnavailable {
        codec: tag.into(),
        reason,
    };
    let dir = tempfile::tempdir().map_err(|e| unavailable(format!("temporary directory: {e}")))?;
    let input = dir.path().join("input.wav");
    let output = dir.path().join("output.wav");
    let encoded = dir.path().join(format!("encoded.{ext}"));
    save_wav(&input, w)?;
    let fill = |arg: &str| {
        arg.replace("{input}", &input.to_string_lossy())
            .replace("{output}", &output.to_string_lossy())
            .replace("{encoded}", &encoded.to_string_lossy())
            .replace("{bitrate}", bitrate)
    };
    for argv in commands {
        let Some((program, args)) = argv.split_first() else {
            return Err(unavailable("empty command".into()));
        };
        let result = Command::new(fill(program))
            .args(args.iter().map(|a| fill(a)))
            .output()
            .map_err(|e| unavailable(format!("cannot run `{program}`: {e}")))?;
        if !result.status.success() {
            return Err(unavailable(format!(
                "`{program}` exited with {}: {}",
                result.status,
                String::from_utf8_lossy(&result.stderr).trim()
            )));
        }
    }
    load_audio(&output, SAMPLE_RATE).map_err(|e| unavailable(format!("decoded output unreadable: {e}")))
}

/// One T03 record per (T02 clip, codec), with audio paths under `out_dir`.
pub fn build_t03(t02: &[ClipRecord], codecs: &[String], out_dir: &Path) -> Result<Vec<ClipRecord>> {
    if codecs.len() != T03_CODECS {
        return Err(Error::Config(format!(
            "T03 needs exactly {T03_CODECS} codecs, {} configured",
            codecs.len()
        )));
    }
    let mut out = Vec::with_capacity(t02.len() * codecs.len());
    for r in t02 {
        if r.partition != Partition::T02 {
            return Err(Error::Config(format!("clip `{}` is in {}, not T02", r.clip_id, r.partition)));
        }
        for codec in codecs {
            let clip_id = format!("{}__{codec}", r.clip_id);
            out.push(ClipRecord {
                path: t03_path(out_dir, &clip_id),
                clip_id,
                partition: Partition::T03,
                codec: Some(codec.clone()),
                ..r.clone()
            });
        }
    }
    Ok(out)
}

fn t03_path(out_dir: &Path, clip_id: &str) -> PathBuf {
    out_dir.join(format!("{clip_id}.wav"))
}
