//! TOML configuration with dotted-key overrides.
//!
//! Every key can be set in a file or by a `--<section>.<key>=<value>` flag;
//! flags win over the file, the file wins over the defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{AmiSettings, EmbeddingSettings, FnnSettings};
use crate::error::{Error, Result};
use crate::eval::{LogRegSettings, NormScheme};
use crate::features::OutputFormat;
use crate::pipeline::FrameAnalysisConfig;
use crate::recurrence::{EpsilonCriterion, Norm};
use crate::rqa::RqaOptions;
use crate::signal::{FrameSpec, SegmentSpec};

/// Only layout 1 (measures then deltas, 18 functionals each) exists.
pub const FEATURE_LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub segment_s: f64,
    pub stride_s: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            frame_ms: 20.0,
            hop_ms: 10.0,
            segment_s: 1.0,
            stride_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// 0 means a quarter of the frame length.
    pub max_lag: usize,
    pub bins: usize,
    pub ami_window: usize,
    pub max_m: usize,
    pub r_tol: f64,
    pub a_tol: f64,
    pub fnn_threshold: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        let a = AmiSettings::default();
        let f = FnnSettings::default();
        EmbeddingConfig {
            max_lag: 0,
            bins: a.bins,
            ami_window: a.window,
            max_m: f.max_m,
            r_tol: f.r_tol,
            a_tol: f.a_tol,
            fnn_threshold: f.fnn_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    FixedValue,
    FixedRr,
    SigmaRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecurrenceConfig {
    pub norm: Norm,
    pub criterion: CriterionKind,
    /// Target recurrence rate for `fixed_rr`.
    pub rr: f64,
    /// Threshold for `fixed_value`.
    pub epsilon: f64,
    /// Multiple of the frame standard deviation for `sigma_ratio`.
    pub sigma_ratio: f64,
}

impl Default for RecurrenceConfig {
    fn default() -> Self {
        RecurrenceConfig {
            norm: Norm::Manhattan,
            criterion: CriterionKind::FixedRr,
            rr: 0.15,
            epsilon: 0.15,
            sigma_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RqaConfig {
    pub exclude_loi: bool,
}

impl Default for RqaConfig {
    fn default() -> Self {
        RqaConfig { exclude_loi: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub layout_version: u32,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            layout_version: FEATURE_LAYOUT_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub seed: u64,
    pub folds: usize,
    pub stratify: bool,
    pub norm: NormScheme,
    pub grid: Vec<f64>,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let lr = LogRegSettings::default();
        EvalConfig {
            seed: 0,
            folds: 5,
            stratify: false,
            norm: NormScheme::PerFold,
            grid: crate::eval::DEFAULT_C_GRID.to_vec(),
            max_iter: lr.max_iter,
            tol: lr.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Worker pool size; 0 picks the available parallelism.
    pub threads: usize,
    pub signal: SignalConfig,
    pub embedding: EmbeddingConfig,
    pub recurrence: RecurrenceConfig,
    pub rqa: RqaConfig,
    pub features: FeaturesConfig,
    pub output: OutputConfig,
    pub eval: EvalConfig,
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Sets one dotted key, e.g. `("embedding.max_lag", "80")`.
    ///
    /// The value is read as a TOML literal, falling back to a bare string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut doc = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = parse_literal(value);
        let mut node = &mut doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("'{key}' is not a config key")))?;
            if i + 1 == parts.len() {
                if !table.contains_key(*part) {
                    return Err(Error::Config(format!("unknown config key '{key}'")));
                }
                table.insert(part.to_string(), parsed.clone());
                break;
            }
            node = table
                .get_mut(*part)
                .ok_or_else(|| Error::Config(format!("unknown config section in '{key}'")))?;
        }
        let updated: Config = doc
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}={value}: {e}")))?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.signal;
        if !(s.frame_ms > 0.0 && s.hop_ms > 0.0 && s.segment_s > 0.0 && s.stride_s > 0.0) {
            return Err(Error::Config("signal durations must be positive".into()));
        }
        if s.segment_s * 1000.0 < s.frame_ms {
            return Err(Error::Config("segment must hold at least one frame".into()));
        }
        self.embedding_settings()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.criterion()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.features.layout_version != FEATURE_LAYOUT_VERSION {
            return Err(Error::Config(format!(
                "unsupported features.layout_version {}",
                self.features.layout_version
            )));
        }
        let e = &self.eval;
        if e.folds < 2 {
            return Err(Error::Config("eval.folds must be at least 2".into()));
        }
        if e.grid.is_empty() || e.grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::Config("eval.grid must hold positive values".into()));
        }
        if e.max_iter == 0 || !(e.tol > 0.0) {
            return Err(Error::Config("eval.max_iter and eval.tol must be positive".into()));
        }
        Ok(())
    }

    pub fn frame_spec(&self) -> FrameSpec {
        FrameSpec {
            frame_ms: self.signal.frame_ms,
            hop_ms: self.signal.hop_ms,
        }
    }

    pub fn segment_spec(&self) -> SegmentSpec {
        SegmentSpec {
            segment_s: self.signal.segment_s,
            stride_s: self.signal.stride_s,
        }
    }

    pub fn embedding_settings(&self) -> EmbeddingSettings {
        let e = &self.embedding;
        EmbeddingSettings {
            ami: AmiSettings {
                max_lag: (e.max_lag > 0).then_some(e.max_lag),
                bins: e.bins,
                window: e.ami_window,
            },
            fnn: FnnSettings {
                max_m: e.max_m,
                r_tol: e.r_tol,
                a_tol: e.a_tol,
                fnn_threshold: e.fnn_threshold,
            },
        }
    }

    pub fn criterion(&self) -> EpsilonCriterion {
        let r = &self.recurrence;
        match r.criterion {
            CriterionKind::FixedValue => EpsilonCriterion::FixedValue(r.epsilon),
            CriterionKind::FixedRr => EpsilonCriterion::FixedRr(r.rr),
            CriterionKind::SigmaRatio => EpsilonCriterion::SigmaRatio(r.sigma_ratio),
        }
    }

    pub fn frame_analysis(&self) -> FrameAnalysisConfig {
        FrameAnalysisConfig {
            embedding: self.embedding_settings(),
            norm: self.recurrence.norm,
            criterion: self.criterion(),
            rqa: RqaOptions {
                exclude_loi: self.rqa.exclude_loi,
            },
        }
    }

    pub fn logreg(&self) -> LogRegSettings {
        LogRegSettings {
            max_iter: self.eval.max_iter,
            tol: self.eval.tol,
        }
    }
}

fn parse_literal(value: &str) -> toml::Value {
    let wrapped = format!("v = {value}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.into()),
    }
}

/// Every settable dotted key, for flag generation and help text.
pub fn config_keys() -> Vec<String> {
    fn walk(prefix: &str, v: &toml::Value, out: &mut Vec<String>) {
        match v {
            toml::Value::Table(t) => {
                for (k, child) in t {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, child, out);
                }
            }
            _ => out.push(prefix.to_string()),
        }
    }
    let mut out = Vec::new();
    walk("", &toml::Value::try_from(Config::default()).expect("serializes"), &mut out);
    out
}
