//! Deterministic fixture files: reference signals and a small three-class
//! corpus with distinct amplitude/frequency dynamics per class.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::EXTERNAL_FEATURE_LEN;
use crate::manifest::{Manifest, ManifestEntry};
use crate::signal::{gen_synthetic, write_wav, Signal, Synthetic, DEFAULT_SAMPLE_RATE};

pub const CORPUS_LABELS: [&str; 3] = ["neutral", "angry", "sad"];

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureOptions {
    pub seed: u64,
    /// Length of each reference signal.
    pub signal_seconds: f64,
    pub speakers: usize,
    pub utterances_per_speaker: usize,
    pub utterance_seconds: f64,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        FixtureOptions {
            seed: 7,
            signal_seconds: 3.0,
            speakers: 4,
            utterances_per_speaker: 20,
            utterance_seconds: 1.0,
        }
    }
}

/// Paths of everything written.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSet {
    pub signals_manifest: PathBuf,
    pub sine: PathBuf,
    pub noise: PathBuf,
    pub lorenz96: PathBuf,
    pub constant: PathBuf,
    pub corpus_manifest: PathBuf,
    pub corpus_external: PathBuf,
    pub corpus_size: usize,
}

fn samples_for(seconds: f64) -> Result<usize> {
    let n = (seconds * DEFAULT_SAMPLE_RATE as f64).round();
    if !(n >= 1.0) {
        return Err(Error::Parameter(format!("duration {seconds} s is too short")));
    }
    Ok(n as usize)
}

fn entry(path: &str, id: &str, speaker: &str, session: &str, label: &str) -> ManifestEntry {
    ManifestEntry {
        path: PathBuf::from(path),
        utterance_id: id.into(),
        speaker_id: speaker.into(),
        session_id: session.into(),
        label: label.into(),
    }
}

fn write_manifest(m: &Manifest, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    m.write(std::io::BufWriter::new(file))
}

/// One corpus utterance.
///
/// Every class shares a speaker-specific pitch; the classes differ in how the
/// tone evolves: `neutral` is a steady harmonic tone with slow loudness
/// change, `angry` has fast deep vibrato and rough amplitude, and `sad` is a
/// weak tone buried in broadband noise.
pub fn corpus_utterance(class: usize, speaker: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = DEFAULT_SAMPLE_RATE as f64;
    let f0 = [180.0, 230.0, 290.0, 350.0][speaker % 4] * (1.0 + 0.15 * (speaker / 4) as f64)
        * rng.gen_range(0.95..1.05);
    let phase0 = rng.gen_range(0.0..TAU);
    let gain = rng.gen_range(0.5..0.8);
    let mut phase = phase0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sr;
        let (freq, amp, noise) = match class {
            0 => (f0, 1.0 + 0.2 * (TAU * 2.0 * t).sin(), 0.01),
            1 => (
                f0 * (1.0 + 0.3 * (TAU * 7.0 * t).sin()),
                1.0 + 0.5 * (TAU * 23.0 * t).sin(),
                0.05,
            ),
            _ => (f0 * 0.8, 0.3, 0.6),
        };
        phase += TAU * freq / sr;
        let tone = phase.sin() + 0.5 * (2.0 * phase).sin() + 0.25 * (3.0 * phase).sin();
        out.push(amp * tone + noise * rng.gen_range(-1.0..1.0));
    }
    let peak = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    out.iter_mut().for_each(|v| *v *= gain * 0.9 / peak);
    out
}

/// Writes the reference signals under `dir/signals` and the corpus under
/// `dir/corpus`, each with a manifest.
pub fn write_fixture_set(dir: impl AsRef<Path>, opts: &FixtureOptions) -> Result<FixtureSet> {
    let dir = dir.as_ref();
    if opts.speakers < 2 || opts.utterances_per_speaker < 3 {
        return Err(Error::Parameter(
            "corpus needs at least 2 speakers and 3 utterances each".into(),
        ));
    }
    let signals = dir.join("signals");
    let corpus = dir.join("corpus");
    for d in [&signals, &corpus] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    let n = samples_for(opts.signal_seconds)?;
    let refs: [(&str, Synthetic); 4] = [
        (
            "sine",
            Synthetic::Sine {
                period: 64.0,
                amplitude: 0.9,
            },
        ),
        ("noise", Synthetic::WhiteNoise { amplitude: 0.9 }),
        ("lorenz96", Synthetic::lorenz96(36, 8.0)),
        ("constant", Synthetic::Constant { value: 0.25 }),
    ];
    let mut manifest = Manifest::default();
    for (k, (name, kind)) in refs.iter().enumerate() {
        let sig = gen_synthetic(kind, n, opts.seed.wrapping_add(k as u64))?;
        let file = format!("{name}.wav");
        write_wav(&sig, signals.join(&file))?;
        // the constant file is for plot export only
        if *name != "constant" {
            manifest.entries.push(entry(&file, name, "ref", "ref", name));
        }
    }
    let signals_manifest = signals.join("manifest.csv");
    write_manifest(&manifest, &signals_manifest)?;

    let n = samples_for(opts.utterance_seconds)?;
    let mut corpus_manifest = Manifest::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let ext_path = corpus.join("external.csv");
    let ext_file = std::fs::File::create(&ext_path).map_err(|e| Error::io(&ext_path, e))?;
    let mut ext = std::io::BufWriter::new(ext_file);
    let io = |e| Error::io(&ext_path, e);
    write!(ext, "utterance_id").map_err(io)?;
    for k in 0..EXTERNAL_FEATURE_LEN {
        write!(ext, ",ext{k}").map_err(io)?;
    }
    writeln!(ext).map_err(io)?;
    for spk in 0..opts.speakers {
        let speaker = format!("spk{spk:02}");
        let session = format!("sess{}", spk / 2);
        for u in 0..opts.utterances_per_speaker {
            let class = u % CORPUS_LABELS.len();
            let id = format!("{speaker}_u{u:02}");
            let seed = opts.seed.wrapping_mul(1_000_003) ^ ((spk as u64) << 20 | u as u64);
            let sig = Signal::new(corpus_utterance(class, spk, n, seed), DEFAULT_SAMPLE_RATE, &id)?;
            let file = format!("{id}.wav");
            write_wav(&sig, corpus.join(&file))?;
            corpus_manifest
                .entries
                .push(entry(&file, &id, &speaker, &session, CORPUS_LABELS[class]));
            write!(ext, "{id}").map_err(io)?;
            for _ in 0..EXTERNAL_FEATURE_LEN {
                write!(ext, ",{:?}", rng.gen_range(-1.0f64..1.0)).map_err(io)?;
            }
            writeln!(ext).map_err(io)?;
        }
    }
    ext.flush().map_err(io)?;
    let corpus_manifest_path = corpus.join("manifest.csv");
    write_manifest(&corpus_manifest, &corpus_manifest_path)?;

    Ok(FixtureSet {
        signals_manifest,
        sine: signals.join("sine.wav"),
        noise: signals.join("noise.wav"),
        lorenz96: signals.join("lorenz96.wav"),
        constant: signals.join("constant.wav"),
        corpus_manifest: corpus_manifest_path,
        corpus_external: ext_path,
        corpus_size: corpus_manifest.len(),
    })
}
