//! Command-line front end. `main` only forwards to [`run`].

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{config_keys, Config};
use crate::error::{Error, Result};
use crate::eval::{run_protocol, Dataset, FoldPlanKind, NormScheme};
use crate::features::{
    fuse_table, read_table_csv, read_table_jsonl, rqa_feature_names, write_table, ExternalFeatures,
    FeatureTable, FeatureVector, OutputFormat,
};
use crate::fixtures::{write_fixture_set, FixtureOptions};
use crate::manifest::{Manifest, ManifestEntry};
use crate::pipeline::{analyze_frame, segment_features, utterance_features};
use crate::recurrence::{EpsilonCriterion, Norm};
use crate::rqa::RqaVector;
use crate::signal::{frame_signal, load_wav};

pub const THREADS_ENV: &str = "RECURREX_THREADS";

/// Success.
pub const EXIT_OK: u8 = 0;
/// Some or all inputs failed to process.
pub const EXIT_FAILURE: u8 = 1;
/// Bad usage or configuration.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "recurrex",
    version,
    about = "Recurrence-quantification features for speech",
    after_help = "Any config key can also be given as a flag of the same dotted name, \
                  e.g. --recurrence.rr 0.1 or --signal.frame_ms=25."
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, KEY=VALUE (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Worker threads (beats RECURREX_THREADS and the config file).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Utterance,
    Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Protocol {
    /// Speaker-dependent k-fold over utterances.
    Sd5,
    /// Leave one speaker out.
    Si,
    /// Leave one session out, test and tune speakers swapped.
    Loso,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract RQA feature vectors for every file in a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Output file; `-` writes to stdout.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Utterance)]
        mode: Mode,
        /// csv or jsonl; defaults to output.format, or jsonl for a .jsonl path.
        #[arg(long)]
        format: Option<OutputFormat>,
        /// External feature CSV to prepend to every row.
        #[arg(long)]
        fuse: Option<PathBuf>,
    },
    /// Write the recurrence plot of one frame as PGM plus a JSON sidecar.
    RpExport {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        frame: usize,
        #[arg(long)]
        out: PathBuf,
        /// Sidecar path; defaults to the output path with a .json extension.
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Cross-validate a logistic-regression classifier on feature files.
    Evaluate {
        /// Feature files (CSV or JSONL); rows are concatenated.
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = Protocol::Sd5)]
        protocol: Protocol,
        /// ps_n, pf_n or g_n; defaults to eval.norm.
        #[arg(long)]
        norm: Option<NormScheme>,
        /// External feature CSV fused in front of the features.
        #[arg(long)]
        fuse: Option<PathBuf>,
        /// Stratify k-fold assignment by label.
        #[arg(long)]
        stratify: bool,
        /// Report path; `-` or omitted writes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic fixture set.
    GenFixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        speakers: Option<usize>,
        #[arg(long)]
        utterances: Option<usize>,
        #[arg(long)]
        utterance_seconds: Option<f64>,
        #[arg(long)]
        signal_seconds: Option<f64>,
    },
}

/// Rewrites `--section.key value` and `--section.key=value` into `--set`.
fn expand_dotted_flags(args: Vec<OsString>) -> Vec<OsString> {
    let keys = config_keys();
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(s) = arg.to_str().and_then(|s| s.strip_prefix("--")) else {
            out.push(arg);
            continue;
        };
        let (name, inline) = match s.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (s, None),
        };
        if !name.contains('.') || !keys.iter().any(|k| k == name) {
            out.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => Some(v),
            None => it.next().and_then(|v| v.into_string().ok()),
        };
        out.push("--set".into());
        out.push(format!("{name}={}", value.unwrap_or_default()).into());
    }
    out
}

/// Config from defaults, then the file, then the flags.
fn build_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| match e {
            Error::Io { .. } => Error::Config(format!("cannot read config: {e}")),
            other => other,
        })?,
        None => Config::default(),
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        cfg.threads = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}='{v}' is not a thread count")))?;
    }
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{o}' is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parses arguments and runs one command; returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = expand_dotted_flags(args.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_FAILURE;
        }
    };
    let outcome = pool.install(|| match &cli.command {
        Command::Extract {
            manifest,
            out,
            mode,
            format,
            fuse,
        } => cmd_extract(&cfg, manifest, out, *mode, *format, fuse.as_deref()),
        Command::RpExport {
            wav,
            frame,
            out,
            sidecar,
        } => cmd_rp_export(&cfg, wav, *frame, out, sidecar.as_deref()),
        Command::Evaluate {
            features,
            manifest,
            protocol,
            norm,
            fuse,
            stratify,
            out,
        } => cmd_evaluate(
            &cfg,
            features,
            manifest,
            *protocol,
            *norm,
            fuse.as_deref(),
            *stratify,
            out.as_deref(),
        ),
        Command::GenFixtures {
            out,
            seed,
            speakers,
            utterances,
            utterance_seconds,
            signal_seconds,
        } => {
            let d = FixtureOptions::default();
            let opts = FixtureOptions {
                seed: seed.unwrap_or(d.seed),
                speakers: speakers.unwrap_or(d.speakers),
                utterances_per_speaker: utterances.unwrap_or(d.utterances_per_speaker),
                utterance_seconds: utterance_seconds.unwrap_or(d.utterance_seconds),
                signal_seconds: signal_seconds.unwrap_or(d.signal_seconds),
            };
            write_fixture_set(out, &opts)
                .map(|set| {
                    println!(
                        "wrote reference signals ({}) and a {}-utterance corpus ({})",
                        set.signals_manifest.display(),
                        set.corpus_size,
                        set.corpus_manifest.display()
                    );
                    EXIT_OK
                })
                .map_err(|e| match e {
                    Error::Parameter(m) => Error::Config(m),
                    other => other,
                })
        }
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Index { .. } => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn create(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(std::io::stdout().lock()));
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(Box::new(std::io::BufWriter::new(f)))
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

fn extract_one(cfg: &Config, entry: &ManifestEntry, mode: Mode) -> Result<Vec<FeatureVector>> {
    let sig = load_wav(&entry.path)?;
    let analysis = cfg.frame_analysis();
    match mode {
        Mode::Utterance => Ok(vec![utterance_features(
            &sig,
            &cfg.frame_spec(),
            &analysis,
            entry.meta(),
        )?]),
        Mode::Segment => segment_features(
            &sig,
            &cfg.segment_spec(),
            &cfg.frame_spec(),
            &analysis,
            entry.meta(),
        ),
    }
}

fn cmd_extract(
    cfg: &Config,
    manifest: &Path,
    out: &Path,
    mode: Mode,
    format: Option<OutputFormat>,
    fuse: Option<&Path>,
) -> Result<u8> {
    let manifest = Manifest::read(manifest).map_err(|e| Error::Config(format!("manifest: {e}")))?;
    if manifest.is_empty() {
        return Err(Error::Config("manifest lists no files".into()));
    }
    let external = fuse
        .map(|p| ExternalFeatures::read_csv(p).map_err(|e| Error::Config(format!("fusion file: {e}"))))
        .transpose()?;
    let format = format.unwrap_or(if is_jsonl(out) {
        OutputFormat::Jsonl
    } else {
        cfg.output.format
    });

    // results come back in manifest order whatever finishes first
    let results: Vec<Result<Vec<FeatureVector>>> = manifest
        .entries
        .par_iter()
        .map(|e| {
            log::info!("extracting {}", e.path.display());
            extract_one(cfg, e, mode)
        })
        .collect();
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (entry, res) in manifest.entries.iter().zip(results) {
        match res {
            Ok(r) => rows.extend(r),
            Err(e) => {
                log::warn!("skipping {} ({}): {e}", entry.utterance_id, entry.path.display());
                failed.push(entry.utterance_id.clone());
            }
        }
    }
    if rows.is_empty() {
        eprintln!("all {} files failed", manifest.len());
        return Ok(EXIT_FAILURE);
    }
    let mut table = FeatureTable {
        names: rqa_feature_names(),
        rows,
    };
    if let Some(ext) = &external {
        table = fuse_table(&table, ext)?;
    }
    let mut w = create(out)?;
    write_table(&table, format, &mut w)?;
    w.flush().map_err(|e| Error::io(out, e))?;
    eprintln!(
        "{} rows x {} features from {} of {} files",
        table.rows.len(),
        table.width(),
        manifest.len() - failed.len(),
        manifest.len()
    );
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("{} failed: {}", failed.len(), failed.join(", "));
        Ok(EXIT_FAILURE)
    }
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    source: String,
    frame_index: usize,
    start_sample: usize,
    frame_len: usize,
    tau: usize,
    m: usize,
    degenerate: bool,
    size: usize,
    norm: Norm,
    criterion: EpsilonCriterion,
    epsilon: f64,
    recurrence_rate: f64,
    measures: &'a RqaVector,
}

fn cmd_rp_export(cfg: &Config, wav: &Path, frame: usize, out: &Path, sidecar: Option<&Path>) -> Result<u8> {
    let sig = load_wav(wav)?;
    let frames = frame_signal(&sig, &cfg.frame_spec())?;
    let f = frames.get(frame).ok_or(Error::Index {
        index: frame,
        len: frames.len(),
    })?;
    let analysis = cfg.frame_analysis();
    let a = analyze_frame(f, &analysis)?;
    std::fs::write(out, a.plot.to_pgm()).map_err(|e| Error::io(out, e))?;
    let side = Sidecar {
        source: wav.display().to_string(),
        frame_index: frame,
        start_sample: f.start_sample(),
        frame_len: f.len(),
        tau: a.params.tau,
        m: a.params.m,
        degenerate: a.params.diagnostics.degenerate,
        size: a.plot.size(),
        norm: analysis.norm,
        criterion: analysis.criterion,
        epsilon: a.plot.epsilon(),
        recurrence_rate: a.plot.recurrence_rate(),
        measures: &a.measures,
    };
    let side_path = sidecar
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.with_extension("json"));
    let text = serde_json::to_string_pretty(&side).map_err(|e| Error::parse("sidecar", e))?;
    std::fs::write(&side_path, text + "\n").map_err(|e| Error::io(&side_path, e))?;
    println!(
        "frame {frame}: {}x{} plot, tau={} m={} eps={:.6} RR={:.4} DET={:.4}",
        a.plot.size(),
        a.plot.size(),
        a.params.tau,
        a.params.m,
        a.plot.epsilon(),
        a.plot.recurrence_rate(),
        a.measures.det
    );
    Ok(EXIT_OK)
}

fn read_features(path: &Path) -> Result<FeatureTable> {
    if is_jsonl(path) {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let rows = read_table_jsonl(BufReader::new(f))?;
        let width = rows.first().map_or(0, |r| r.values.len());
        let names = if width == crate::features::RQA_FEATURE_LEN {
            rqa_feature_names()
        } else {
            (0..width).map(|k| format!("f{k}")).collect()
        };
        Ok(FeatureTable { names, rows })
    } else {
        read_table_csv(path)
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    cfg: &Config,
    features: &[PathBuf],
    manifest: &Path,
    protocol: Protocol,
    norm: Option<NormScheme>,
    fuse: Option<&Path>,
    stratify: bool,
    out: Option<&Path>,
) -> Result<u8> {
    let manifest = Manifest::read(manifest).map_err(|e| Error::Config(format!("manifest: {e}")))?;
    let mut table: Option<FeatureTable> = None;
    for p in features {
        let t = read_features(p)?;
        match &mut table {
            None => table = Some(t),
            Some(acc) => {
                if acc.names != t.names {
                    return Err(Error::Parameter(format!(
                        "{} has different feature columns",
                        p.display()
                    )));
                }
                acc.rows.extend(t.rows);
            }
        }
    }
    let mut table = table.ok_or_else(|| Error::Config("no feature files given".into()))?;
    if let Some(p) = fuse {
        table = fuse_table(&table, &ExternalFeatures::read_csv(p)?)?;
    }
    manifest.annotate(&mut table)?;
    let ds = Dataset::from_table(&table)?;
    let kind = match protocol {
        Protocol::Sd5 => FoldPlanKind::KFold {
            k: cfg.eval.folds,
            seed: cfg.eval.seed,
            stratify: stratify || cfg.eval.stratify,
        },
        Protocol::Si => FoldPlanKind::LeaveOneSpeakerOut,
        Protocol::Loso => FoldPlanKind::LosoSession,
    };
    let scheme = norm.unwrap_or(cfg.eval.norm);
    let report = run_protocol(&ds, kind, scheme, &cfg.eval.grid, &cfg.logreg())?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::parse("report", e))? + "\n";
    match out {
        Some(p) if p != Path::new("-") => {
            std::fs::write(p, json).map_err(|e| Error::io(p, e))?;
            print!("{}", report.summary_table());
        }
        _ => {
            print!("{json}");
            eprint!("{}", report.summary_table());
        }
    }
    Ok(EXIT_OK)
}
