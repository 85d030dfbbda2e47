//! Frame -> embedding -> recurrence plot -> measures, and the utterance and
//! segment aggregations built on top of it.

use rayon::prelude::*;

use crate::embedding::{embed, estimate_embedding, EmbeddingDiagnostics, EmbeddingParams, EmbeddingSettings};
use crate::error::{Error, Result};
use crate::features::{aggregate, FeatureMeta, FeatureVector, FrameAttributeSequence};
use crate::recurrence::{recurrence_plot_for, EpsilonCriterion, Norm, RecurrencePlot};
use crate::rqa::{rqa_measures, RqaOptions, RqaVector};
use crate::signal::{frame_signal, segment_signal, Frame, FrameSpec, SegmentSpec, Signal};

/// Everything needed to turn one frame into measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameAnalysisConfig {
    pub embedding: EmbeddingSettings,
    pub norm: Norm,
    pub criterion: EpsilonCriterion,
    pub rqa: RqaOptions,
}

impl Default for FrameAnalysisConfig {
    fn default() -> Self {
        FrameAnalysisConfig {
            embedding: EmbeddingSettings::default(),
            norm: Norm::Manhattan,
            criterion: EpsilonCriterion::FixedRr(0.15),
            rqa: RqaOptions { exclude_loi: true },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnalysis {
    pub params: EmbeddingParams,
    pub plot: RecurrencePlot,
    pub measures: RqaVector,
}

/// Runs one frame through the whole chain.
///
/// A constant frame cannot be embedded; it gets `tau = m = 1` and the
/// all-ones plot over its samples, so frame counts stay stable.
pub fn analyze_frame(frame: &Frame, cfg: &FrameAnalysisConfig) -> Result<FrameAnalysis> {
    let params = match estimate_embedding(frame, &cfg.embedding) {
        Ok(p) => p,
        Err(Error::DegenerateFrame(_)) => return Ok(degenerate(frame, cfg)),
        Err(e) => return Err(e),
    };
    let traj = embed(frame, &params)?;
    let plot = match recurrence_plot_for(&traj, cfg.norm, cfg.criterion) {
        Ok(p) => p,
        Err(Error::DegenerateDistances) => RecurrencePlot::all_ones(traj.len()),
        Err(e) => return Err(e),
    };
    let measures = rqa_measures(&plot, &cfg.rqa);
    Ok(FrameAnalysis {
        params,
        plot,
        measures,
    })
}

fn degenerate(frame: &Frame, cfg: &FrameAnalysisConfig) -> FrameAnalysis {
    let plot = RecurrencePlot::all_ones(frame.len());
    FrameAnalysis {
        params: EmbeddingParams {
            tau: 1,
            m: 1,
            diagnostics: EmbeddingDiagnostics {
                degenerate: true,
                ..Default::default()
            },
        },
        measures: rqa_measures(&plot, &cfg.rqa),
        plot,
    }
}

pub fn frame_measures(frame: &Frame, cfg: &FrameAnalysisConfig) -> Result<RqaVector> {
    analyze_frame(frame, cfg).map(|a| a.measures)
}

/// Measures for every frame, in frame order; frames run in parallel.
pub fn sequence_measures(frames: &[Frame], cfg: &FrameAnalysisConfig) -> Result<Vec<RqaVector>> {
    frames.par_iter().map(|f| frame_measures(f, cfg)).collect()
}

/// One 432-value vector for the whole signal.
pub fn utterance_features(
    sig: &Signal,
    frame: &FrameSpec,
    cfg: &FrameAnalysisConfig,
    meta: FeatureMeta,
) -> Result<FeatureVector> {
    let frames = frame_signal(sig, frame)?;
    let seq = FrameAttributeSequence::from_rqa(&sequence_measures(&frames, cfg)?)?;
    aggregate(&seq, meta)
}

/// One 432-value vector per segment, with `segment_index` set.
pub fn segment_features(
    sig: &Signal,
    segment: &SegmentSpec,
    frame: &FrameSpec,
    cfg: &FrameAnalysisConfig,
    meta: FeatureMeta,
) -> Result<Vec<FeatureVector>> {
    let segments = segment_signal(sig, segment, frame)?;
    // measures are per frame; overlapping segments share frames at identical
    // offsets but recomputing keeps segments independent
    segments
        .iter()
        .enumerate()
        .map(|(k, seg)| {
            let seq = FrameAttributeSequence::from_rqa(&sequence_measures(&seg.frames, cfg)?)?;
            aggregate(
                &seq,
                FeatureMeta {
                    segment_index: Some(k),
                    ..meta.clone()
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{gen_synthetic, Synthetic};

    #[test]
    fn constant_frame_gives_forced_vector() {
        let f = Frame::from_samples(vec![0.25; 320]).unwrap();
        let a = analyze_frame(&f, &FrameAnalysisConfig::default()).unwrap();
        assert!(a.params.diagnostics.degenerate);
        assert_eq!(a.plot.size(), 320);
        assert_eq!(a.measures.rr, 1.0);
        assert_eq!(a.measures.lam, 1.0);
        assert_eq!(a.measures.tt, 320.0);
    }

    #[test]
    fn frame_chain_matches_dense_route() {
        use crate::recurrence::{pairwise_distances, recurrence_plot, select_epsilon};
        let sig = gen_synthetic(&Synthetic::white_noise(), 320, 5).unwrap();
        let f = Frame::from_samples(sig.samples().to_vec()).unwrap();
        let cfg = FrameAnalysisConfig::default();
        let a = analyze_frame(&f, &cfg).unwrap();
        let traj = embed(&f, &a.params).unwrap();
        let d = pairwise_distances(&traj, cfg.norm).unwrap();
        let eps = select_epsilon(&d, cfg.criterion).unwrap();
        assert_eq!(eps, a.plot.epsilon());
        let rp = recurrence_plot(&d, eps).unwrap();
        assert_eq!(rp.bits(), a.plot.bits());
    }

    #[test]
    fn segment_rows_carry_index() {
        let sig = gen_synthetic(&Synthetic::sine(64.0), 32_000, 0).unwrap();
        let rows = segment_features(
            &sig,
            &SegmentSpec::default(),
            &FrameSpec::default(),
            &FrameAnalysisConfig::default(),
            FeatureMeta::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        for (k, r) in rows.iter().enumerate() {
            assert_eq!(r.meta.segment_index, Some(k));
            assert_eq!(r.values.len(), 432);
        }
    }
}
