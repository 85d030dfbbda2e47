//! Audio ingestion, framing, segmentation and synthetic test signals.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest frame the embedding estimators accept.
pub const MIN_FRAME_LEN: usize = 32;

/// Sample rate used for generated signals.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Number of RK4 steps discarded before Lorenz96 output starts.
const LORENZ96_TRANSIENT: usize = 1000;

/// A mono sample sequence with its rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
    source_id: String,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        Ok(Signal {
            samples,
            sample_rate,
            source_id: source_id.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// A contiguous run of samples cut from a [`Signal`].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    samples: Vec<f64>,
    start_sample: usize,
    frame_index: usize,
}

impl Frame {
    pub fn new(samples: Vec<f64>, start_sample: usize, frame_index: usize) -> Result<Self> {
        if samples.len() < MIN_FRAME_LEN {
            return Err(Error::Parameter(format!(
                "frame has {} samples, need at least {MIN_FRAME_LEN}",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Parameter("frame contains non-finite samples".into()));
        }
        Ok(Frame {
            samples,
            start_sample,
            frame_index,
        })
    }

    /// A standalone frame (start 0, index 0).
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Frame::new(samples, 0, 0)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_sample(&self) -> usize {
        self.start_sample
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }
}

/// A group of consecutive frames covering `[start_time, end_time)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub frames: Vec<Frame>,
    pub start_sample: usize,
    pub end_sample: usize,
    pub start_time: f64,
    pub end_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub frame_ms: f64,
    pub hop_ms: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec {
            frame_ms: 20.0,
            hop_ms: 10.0,
        }
    }
}

impl FrameSpec {
    /// Frame length and hop in samples at `sample_rate`.
    pub fn in_samples(&self, sample_rate: u32) -> Result<(usize, usize)> {
        if !(self.frame_ms > 0.0) || !(self.hop_ms > 0.0) {
            return Err(Error::Parameter(
                "frame_ms and hop_ms must be positive".into(),
            ));
        }
        let len = (self.frame_ms * sample_rate as f64 / 1000.0).round() as usize;
        let hop = (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize;
        if len < MIN_FRAME_LEN {
            return Err(Error::Parameter(format!(
                "{} ms at {sample_rate} Hz gives {len} samples per frame, need at least {MIN_FRAME_LEN}",
                self.frame_ms
            )));
        }
        if hop == 0 {
            return Err(Error::Parameter("hop rounds to zero samples".into()));
        }
        Ok((len, hop))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub segment_s: f64,
    pub stride_s: f64,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        SegmentSpec {
            segment_s: 1.0,
            stride_s: 0.5,
        }
    }
}

/// Reads a 16-bit PCM WAV file, averaging channels down to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => {
            Error::io(path, io)
        }
        hound::Error::Unsupported => Error::Format(format!("{}: unsupported WAV", path.display())),
        other => Error::parse(format!("WAV header of {}", path.display()), other),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Format(format!(
            "{}: expected 16-bit integer PCM, found {:?} {}-bit",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    let channels = spec.channels.max(1) as usize;
    let raw = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<i16>, _>>()
        .map_err(|e| Error::parse(format!("WAV payload of {}", path.display()), e))?;
    let samples = raw
        .chunks_exact(channels)
        .map(|c| c.iter().map(|&s| s as f64 / 32768.0).sum::<f64>() / channels as f64)
        .collect();
    Signal::new(samples, spec.sample_rate, path.display().to_string())
}

/// Writes a signal as mono 16-bit PCM, clamping to the representable range.
pub fn write_wav(signal: &Signal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format(other.to_string()),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(to_io)?;
    for &s in &signal.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(to_io)?;
    }
    writer.finalize().map_err(to_io)
}

/// Cuts fixed-length frames at a fixed hop; a trailing partial frame is dropped.
pub fn frame_signal(sig: &Signal, spec: &FrameSpec) -> Result<Vec<Frame>> {
    let (len, hop) = spec.in_samples(sig.sample_rate)?;
    frame_range(sig.samples(), 0, len, hop)
}

fn frame_range(samples: &[f64], offset: usize, len: usize, hop: usize) -> Result<Vec<Frame>> {
    if samples.len() < len {
        return Err(Error::EmptyInput(format!(
            "{} samples is shorter than one frame of {len}",
            samples.len()
        )));
    }
    let count = (samples.len() - len) / hop + 1;
    (0..count)
        .map(|k| {
            let start = k * hop;
            Frame::new(samples[start..start + len].to_vec(), offset + start, k)
        })
        .collect()
}

/// Splits a signal into overlapping segments and frames each one.
///
/// Full-length segments are laid down at every stride. An uncovered tail
/// becomes one more segment starting at the next stride if it is at least half
/// a segment long, otherwise it is merged into the previous segment. Signals
/// shorter than one segment come back as a single whole-signal segment.
pub fn segment_signal(sig: &Signal, seg: &SegmentSpec, frame: &FrameSpec) -> Result<Vec<Segment>> {
    if !(seg.segment_s > 0.0) || !(seg.stride_s > 0.0) {
        return Err(Error::Parameter(
            "segment length and stride must be positive".into(),
        ));
    }
    if sig.is_empty() {
        return Err(Error::EmptyInput("signal has no samples".into()));
    }
    let sr = sig.sample_rate as f64;
    let seg_len = ((seg.segment_s * sr).round() as usize).max(1);
    let stride = ((seg.stride_s * sr).round() as usize).max(1);
    let total = sig.len();

    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    while start + seg_len <= total {
        spans.push((start, start + seg_len));
        start += stride;
    }
    match spans.last().copied() {
        None => spans.push((0, total)),
        Some((last_start, last_end)) if last_end < total => {
            let tail_start = last_start + stride;
            if tail_start < total && (total - tail_start) * 2 >= seg_len {
                spans.push((tail_start, total));
            } else {
                spans.last_mut().expect("non-empty").1 = total;
            }
        }
        Some(_) => {}
    }

    let (frame_len, hop) = frame.in_samples(sig.sample_rate)?;
    spans
        .into_iter()
        .map(|(s, e)| {
            Ok(Segment {
                frames: frame_range(&sig.samples[s..e], s, frame_len, hop)?,
                start_sample: s,
                end_sample: e,
                start_time: s as f64 / sr,
                end_time: e as f64 / sr,
            })
        })
        .collect()
}

/// Parameterized synthetic generators used for fixtures and oracle tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Synthetic {
    Sine { period: f64, amplitude: f64 },
    WhiteNoise { amplitude: f64 },
    /// One coordinate of a Lorenz96 system, peak-normalized to 0.9.
    Lorenz96 {
        dimension: usize,
        forcing: f64,
        dt: f64,
        component: usize,
    },
    Constant { value: f64 },
}

impl Synthetic {
    pub fn sine(period: f64) -> Self {
        Synthetic::Sine {
            period,
            amplitude: 1.0,
        }
    }

    pub fn white_noise() -> Self {
        Synthetic::WhiteNoise { amplitude: 1.0 }
    }

    pub fn lorenz96(dimension: usize, forcing: f64) -> Self {
        Synthetic::Lorenz96 {
            dimension,
            forcing,
            dt: 0.05,
            component: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Parameter(m.to_string()));
        match *self {
            Synthetic::Sine { period, amplitude } => {
                if !(period > 0.0) || !amplitude.is_finite() {
                    return bad("sine needs a positive period and finite amplitude");
                }
            }
            Synthetic::WhiteNoise { amplitude } => {
                if !amplitude.is_finite() {
                    return bad("noise amplitude must be finite");
                }
            }
            Synthetic::Lorenz96 {
                dimension,
                forcing,
                dt,
                component,
            } => {
                if dimension < 4 {
                    return bad("lorenz96 needs dimension >= 4");
                }
                if !forcing.is_finite() || !(dt > 0.0) {
                    return bad("lorenz96 needs finite forcing and positive dt");
                }
                if component >= dimension {
                    return bad("lorenz96 component out of range");
                }
            }
            Synthetic::Constant { value } => {
                if !value.is_finite() {
                    return bad("constant value must be finite");
                }
            }
        }
        Ok(())
    }
}

/// Generates `n` samples at [`DEFAULT_SAMPLE_RATE`]; identical inputs give identical output.
pub fn gen_synthetic(kind: &Synthetic, n: usize, seed: u64) -> Result<Signal> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be positive".into()));
    }
    kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = match *kind {
        Synthetic::Sine { period, amplitude } => (0..n)
            .map(|i| amplitude * (std::f64::consts::TAU * i as f64 / period).sin())
            .collect(),
        Synthetic::WhiteNoise { amplitude } => (0..n)
            .map(|_| amplitude * rng.gen_range(-1.0..1.0))
            .collect(),
        Synthetic::Lorenz96 {
            dimension,
            forcing,
            dt,
            component,
        } => {
            let mut x: Vec<f64> = (0..dimension)
                .map(|_| forcing + rng.gen_range(-0.01..0.01))
                .collect();
            let mut out = Vec::with_capacity(n);
            for step in 0..LORENZ96_TRANSIENT + n {
                rk4_step(&mut x, forcing, dt);
                if step >= LORENZ96_TRANSIENT {
                    out.push(x[component]);
                }
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parameter("lorenz96 integration diverged".into()));
            }
            let peak = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if peak > 0.0 {
                out.iter_mut().for_each(|v| *v *= 0.9 / peak);
            }
            out
        }
        Synthetic::Constant { value } => vec![value; n],
    };
    Signal::new(samples, DEFAULT_SAMPLE_RATE, format!("synthetic:{kind:?}:{seed}"))
}

fn lorenz96_rhs(x: &[f64], forcing: f64, out: &mut [f64]) {
    let k = x.len();
    for i in 0..k {
        let next = x[(i + 1) % k];
        let prev = x[(i + k - 1) % k];
        let prev2 = x[(i + k - 2) % k];
        out[i] = (next - prev2) * prev - x[i] + forcing;
    }
}

fn rk4_step(x: &mut [f64], forcing: f64, dt: f64) {
    let k = x.len();
    let mut k1 = vec![0.0; k];
    let mut k2 = vec![0.0; k];
    let mut k3 = vec![0.0; k];
    let mut k4 = vec![0.0; k];
    let mut tmp = vec![0.0; k];
    lorenz96_rhs(x, forcing, &mut k1);
    for i in 0..k {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    lorenz96_rhs(&tmp, forcing, &mut k2);
    for i in 0..k {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    lorenz96_rhs(&tmp, forcing, &mut k3);
    for i in 0..k {
        tmp[i] = x[i] + dt * k3[i];
    }
    lorenz96_rhs(&tmp, forcing, &mut k4);
    for i in 0..k {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}
