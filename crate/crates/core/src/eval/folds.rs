use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FoldPlanKind {
    /// Seeded random partition of utterances into `k` test sets.
    KFold { k: usize, seed: u64, stratify: bool },
    /// One fold per speaker.
    LeaveOneSpeakerOut,
    /// Per session, one speaker tests while the other tunes, then the roles swap.
    LosoSession,
}

/// Row indices of one fold. The three sets are disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub name: String,
    pub train: Vec<usize>,
    pub tune: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub kind: FoldPlanKind,
    pub folds: Vec<Fold>,
}

/// Rows grouped by a key, keys in first-appearance order.
fn group_rows<'a>(keys: impl Iterator<Item = &'a str>) -> Vec<(String, Vec<usize>)> {
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.enumerate() {
        rows.entry(k.to_string())
            .or_insert_with(|| {
                order.push(k.to_string());
                Vec::new()
            })
            .push(i);
    }
    order
        .into_iter()
        .map(|k| {
            let r = rows.remove(&k).expect("grouped");
            (k, r)
        })
        .collect()
}

fn rows_of(groups: &[(String, Vec<usize>)], pick: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut out: Vec<usize> = groups
        .iter()
        .enumerate()
        .filter(|(g, _)| pick(*g))
        .flat_map(|(_, (_, r))| r.iter().copied())
        .collect();
    out.sort_unstable();
    out
}

pub fn make_folds(ds: &Dataset, kind: FoldPlanKind) -> Result<FoldPlan> {
    let folds = match kind {
        FoldPlanKind::KFold { k, seed, stratify } => kfold(ds, k, seed, stratify)?,
        FoldPlanKind::LeaveOneSpeakerOut => leave_one_speaker_out(ds)?,
        FoldPlanKind::LosoSession => loso_session(ds)?,
    };
    Ok(FoldPlan { kind, folds })
}

/// Utterances (all their segment rows together) are dealt into `k` groups.
/// Fold `f` tests on group `f`, tunes on group `f + 1`, trains on the rest.
fn kfold(ds: &Dataset, k: usize, seed: u64, stratify: bool) -> Result<Vec<Fold>> {
    let utts = group_rows(ds.meta.iter().map(|m| m.utterance_id.as_str()));
    if k < 2 {
        return Err(Error::Protocol("k-fold needs k >= 2".into()));
    }
    if utts.len() < k {
        return Err(Error::Protocol(format!(
            "{} utterances cannot fill {k} folds",
            utts.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; utts.len()];
    if stratify {
        let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (u, (_, rows)) in utts.iter().enumerate() {
            by_label.entry(ds.y[rows[0]]).or_default().push(u);
        }
        let mut next = 0;
        for members in by_label.values_mut() {
            members.shuffle(&mut rng);
            for &u in members.iter() {
                assignment[u] = next % k;
                next += 1;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..utts.len()).collect();
        order.shuffle(&mut rng);
        // contiguous near-equal chunks
        for (pos, &u) in order.iter().enumerate() {
            assignment[u] = pos * k / utts.len();
        }
    }
    Ok((0..k)
        .map(|f| {
            let tune_f = (f + 1) % k;
            Fold {
                name: format!("fold{f}"),
                test: rows_of(&utts, |u| assignment[u] == f),
                tune: rows_of(&utts, |u| assignment[u] == tune_f),
                train: rows_of(&utts, |u| assignment[u] != f && assignment[u] != tune_f),
            }
        })
        .collect())
}

/// Speakers sorted by id; fold `s` tests on speaker `s` and tunes on the next
/// speaker when at least three exist, otherwise the tune set is empty.
fn leave_one_speaker_out(ds: &Dataset) -> Result<Vec<Fold>> {
    let mut speakers = group_rows(ds.meta.iter().map(|m| m.speaker_id.as_str()));
    speakers.sort_by(|a, b| a.0.cmp(&b.0));
    let n = speakers.len();
    if n < 2 {
        return Err(Error::Protocol("leave-one-speaker-out needs at least 2 speakers".into()));
    }
    Ok((0..n)
        .map(|s| {
            let tune_s = if n >= 3 { Some((s + 1) % n) } else { None };
            Fold {
                name: format!("speaker={}", speakers[s].0),
                test: rows_of(&speakers, |g| g == s),
                tune: rows_of(&speakers, |g| Some(g) == tune_s),
                train: rows_of(&speakers, |g| g != s && Some(g) != tune_s),
            }
        })
        .collect())
}

fn loso_session(ds: &Dataset) -> Result<Vec<Fold>> {
    let mut sessions: BTreeMap<&str, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
    for (i, m) in ds.meta.iter().enumerate() {
        sessions
            .entry(m.session_id.as_str())
            .or_default()
            .entry(m.speaker_id.as_str())
            .or_default()
            .push(i);
    }
    if sessions.len() < 2 {
        return Err(Error::Protocol("leave-one-session-out needs at least 2 sessions".into()));
    }
    let mut folds = Vec::new();
    for (session, speakers) in &sessions {
        if speakers.len() != 2 {
            let names: BTreeSet<&&str> = speakers.keys().collect();
            return Err(Error::Protocol(format!(
                "session '{session}' has {} speakers ({:?}), expected exactly 2",
                speakers.len(),
                names
            )));
        }
        let train: Vec<usize> = ds
            .meta
            .iter()
            .enumerate()
            .filter(|(_, m)| m.session_id != *session)
            .map(|(i, _)| i)
            .collect();
        let pair: Vec<(&&str, &Vec<usize>)> = speakers.iter().collect();
        for (test, tune) in [(0, 1), (1, 0)] {
            folds.push(Fold {
                name: format!("session={session},speaker={}", pair[test].0),
                train: train.clone(),
                tune: pair[tune].1.clone(),
                test: pair[test].1.clone(),
            });
        }
    }
    Ok(folds)
}
