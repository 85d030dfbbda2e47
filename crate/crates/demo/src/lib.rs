//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every exported function returns a JSON string; the plain-Rust versions
//! underneath are what the native tests exercise.

use recurrex::embedding::{embed, estimate_embedding};
use recurrex::fixtures::corpus_utterance;
use recurrex::pipeline::{analyze_frame, FrameAnalysisConfig};
use recurrex::recurrence::{EpsilonCriterion, Norm};
use recurrex::rqa::RqaVector;
use recurrex::signal::{frame_signal, gen_synthetic, Frame, FrameSpec, Signal, Synthetic, DEFAULT_SAMPLE_RATE};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Signal names offered by the page.
pub const SIGNALS: [&str; 6] = ["sine", "noise", "lorenz96", "neutral", "angry", "sad"];

/// Longest signal the page may request, in seconds.
const MAX_SECONDS: f64 = 5.0;

fn err(e: impl ToString) -> String {
    e.to_string()
}

/// `n` samples of a named signal.
pub fn make_signal(name: &str, n: usize, seed: u64) -> Result<Signal, String> {
    let synth = match name {
        "sine" => Some(Synthetic::sine(64.0)),
        "noise" => Some(Synthetic::white_noise()),
        "lorenz96" => Some(Synthetic::lorenz96(36, 8.0)),
        _ => None,
    };
    if let Some(kind) = synth {
        return gen_synthetic(&kind, n, seed).map_err(err);
    }
    let class = ["neutral", "angry", "sad"]
        .iter()
        .position(|c| *c == name)
        .ok_or_else(|| format!("unknown signal '{name}'"))?;
    Signal::new(corpus_utterance(class, 0, n, seed), DEFAULT_SAMPLE_RATE, name).map_err(err)
}

fn analysis_config(norm: &str, rr: f64) -> Result<FrameAnalysisConfig, String> {
    let criterion = EpsilonCriterion::FixedRr(rr);
    criterion.validate().map_err(err)?;
    Ok(FrameAnalysisConfig {
        norm: norm.parse::<Norm>().map_err(err)?,
        criterion,
        ..FrameAnalysisConfig::default()
    })
}

fn measures_json(m: &RqaVector) -> Value {
    let a = m.to_array();
    Value::Object(
        RqaVector::NAMES
            .iter()
            .zip(a)
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect(),
    )
}

fn first_frame(name: &str, seed: u64) -> Result<Frame, String> {
    let sig = make_signal(name, FrameSpec::default().in_samples(DEFAULT_SAMPLE_RATE).map_err(err)?.0, seed)?;
    Ok(frame_signal(&sig, &FrameSpec::default()).map_err(err)?.remove(0))
}

/// Recurrence plot of one 20 ms frame, row-major as 0/1, plus its measures.
pub fn plot_frame(name: &str, seed: u64, norm: &str, rr: f64) -> Result<Value, String> {
    let frame = first_frame(name, seed)?;
    let a = analyze_frame(&frame, &analysis_config(norm, rr)?).map_err(err)?;
    let size = a.plot.size();
    let mut cells = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            cells.push(a.plot.get(i, j) as u8);
        }
    }
    Ok(json!({
        "size": size,
        "tau": a.params.tau,
        "m": a.params.m,
        "epsilon": a.plot.epsilon(),
        "cells": cells,
        "measures": measures_json(&a.measures),
    }))
}

/// AMI curve, FNN fractions and a two-dimensional delay projection.
pub fn embedding_view(name: &str, seed: u64) -> Result<Value, String> {
    let frame = first_frame(name, seed)?;
    let p = estimate_embedding(&frame, &Default::default()).map_err(err)?;
    let lag = p.tau.min(frame.len() - 1);
    let proj = embed(&frame, &recurrex::embedding::EmbeddingParams { m: 2, tau: lag, ..p.clone() })
        .map_err(err)?;
    let points: Vec<[f64; 2]> = proj.points().map(|q| [q[0], q[1]]).collect();
    Ok(json!({
        "tau": p.tau,
        "m": p.m,
        "ami": p.diagnostics.ami_curve,
        "fnn": p.diagnostics.fnn_fractions,
        "samples": frame.samples(),
        "projection": points,
    }))
}

/// Frame-by-frame measures over a longer stretch of signal.
pub fn measures_over_time(name: &str, seconds: f64, seed: u64, rr: f64) -> Result<Value, String> {
    if !(seconds > 0.0 && seconds <= MAX_SECONDS) {
        return Err(format!("duration must lie in (0, {MAX_SECONDS}] s"));
    }
    let cfg = analysis_config("manhattan", rr)?;
    let sig = make_signal(name, (seconds * DEFAULT_SAMPLE_RATE as f64) as usize, seed)?;
    let frames = frame_signal(&sig, &FrameSpec::default()).map_err(err)?;
    let mut series: Vec<Vec<f64>> = (0..RqaVector::LEN).map(|_| Vec::with_capacity(frames.len())).collect();
    for f in &frames {
        let m = analyze_frame(f, &cfg).map_err(err)?.measures.to_array();
        for (s, v) in series.iter_mut().zip(m) {
            s.push(v);
        }
    }
    let hop = FrameSpec::default().hop_ms / 1000.0;
    Ok(json!({
        "times": (0..frames.len()).map(|k| k as f64 * hop).collect::<Vec<_>>(),
        "series": RqaVector::NAMES.iter().zip(series).map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = plotFrame)]
pub fn plot_frame_js(name: &str, seed: u32, norm: &str, rr: f64) -> Result<String, JsError> {
    to_js(plot_frame(name, seed as u64, norm, rr))
}

#[wasm_bindgen(js_name = embeddingView)]
pub fn embedding_view_js(name: &str, seed: u32) -> Result<String, JsError> {
    to_js(embedding_view(name, seed as u64))
}

#[wasm_bindgen(js_name = measuresOverTime)]
pub fn measures_over_time_js(name: &str, seconds: f64, seed: u32, rr: f64) -> Result<String, JsError> {
    to_js(measures_over_time(name, seconds, seed as u64, rr))
}
