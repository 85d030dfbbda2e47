use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recurrex::eval::{
    grid_search_c, logistic_objective, make_folds, metrics_from_predictions, run_protocol,
    train_logreg, znormalize, Dataset, FoldPlanKind, LogRegSettings, NormScheme,
};
use recurrex::features::FeatureMeta;

fn meta(utt: &str, spk: &str, sess: &str, label: &str) -> FeatureMeta {
    FeatureMeta {
        utterance_id: utt.into(),
        segment_index: None,
        speaker_id: spk.into(),
        session_id: sess.into(),
        label: label.into(),
    }
}

/// Three well separated Gaussian blobs, 4 speakers in 2 sessions.
fn blobs(per_class_speaker: usize, dim: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = ["a", "b", "c"];
    let (mut x, mut m) = (Vec::new(), Vec::new());
    for spk in 0..4 {
        for (c, label) in labels.iter().enumerate() {
            for u in 0..per_class_speaker {
                let row: Vec<f64> = (0..dim)
                    .map(|k| if k == c { 6.0 } else { 0.0 } + spk as f64 * 0.3 + rng.gen_range(-1.0..1.0))
                    .collect();
                x.push(row);
                m.push(meta(&format!("s{spk}c{c}u{u}"), &format!("s{spk}"), &format!("x{}", spk / 2), label));
            }
        }
    }
    Dataset::new(x, m).unwrap()
}

/// Objective written from the definition: mean log-loss plus ||w||^2 / (2 C n).
fn oracle_objective(x: &[Vec<f64>], t: &[f64], c: f64, p: &[f64]) -> f64 {
    let d = p.len() - 1;
    let n = x.len() as f64;
    let mut loss = 0.0;
    for (row, &ti) in x.iter().zip(t) {
        let z: f64 = row.iter().zip(&p[..d]).map(|(a, b)| a * b).sum::<f64>() + p[d];
        let prob = 1.0 / (1.0 + (-z).exp());
        loss -= ti * prob.ln() + (1.0 - ti) * (1.0 - prob).ln();
    }
    loss / n + p[..d].iter().map(|w| w * w).sum::<f64>() / (2.0 * c * n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_and_gradient_match_definition(
        x in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 2..20),
        p in prop::collection::vec(-1.0f64..1.0, 4),
        c in 0.01f64..10.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<f64> = x.iter().map(|_| rng.gen_range(0..2) as f64).collect();
        let refs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let (f, g) = logistic_objective(&refs, &t, c, &p);
        prop_assert!((f - oracle_objective(&x, &t, c, &p)).abs() < 1e-10);
        for k in 0..p.len() {
            let h = 1e-6;
            let mut a = p.clone();
            let mut b = p.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (oracle_objective(&x, &t, c, &a) - oracle_objective(&x, &t, c, &b)) / (2.0 * h);
            prop_assert!((g[k] - fd).abs() < 1e-5, "k {k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn ua_is_invariant_to_class_relabelling(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60),
        perm_seed in any::<u64>(),
    ) {
        let mut perm: Vec<usize> = (0..4).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        for i in (1..4).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().cloned().unzip();
        let a = metrics_from_predictions(&t, &p, 4);
        let tp: Vec<usize> = t.iter().map(|&v| perm[v]).collect();
        let pp: Vec<usize> = p.iter().map(|&v| perm[v]).collect();
        let b = metrics_from_predictions(&tp, &pp, 4);
        prop_assert!((a.ua - b.ua).abs() < 1e-12);
        prop_assert_eq!(a.wa, b.wa);
        // oracle: recall per present class
        let mut recalls = Vec::new();
        for k in 0..4 {
            let tot = t.iter().filter(|&&v| v == k).count();
            if tot > 0 {
                let hit = t.iter().zip(&p).filter(|(&a, &b)| a == k && b == k).count();
                recalls.push(hit as f64 / tot as f64);
            }
        }
        prop_assert!((a.ua - recalls.iter().sum::<f64>() / recalls.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn wa_is_invariant_to_row_order(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..60)) {
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().cloned().unzip();
        let a = metrics_from_predictions(&t, &p, 3);
        let b = metrics_from_predictions(
            &t.iter().rev().cloned().collect::<Vec<_>>(),
            &p.iter().rev().cloned().collect::<Vec<_>>(),
            3,
        );
        prop_assert_eq!(a, b);
    }

    #[test]
    fn per_fold_normalisation_ignores_test_rows(seed in 0u64..1000, scale in 0.5f64..100.0) {
        let ds = blobs(2, 4, seed);
        let plan = make_folds(&ds, FoldPlanKind::LeaveOneSpeakerOut).unwrap();
        let fold = &plan.folds[0];
        let a = znormalize(&ds, NormScheme::PerFold, Some(&fold.train)).unwrap();
        let mut x = ds.x.clone();
        for &i in &fold.test {
            x[i].iter_mut().for_each(|v| *v = *v * scale + 17.0);
        }
        let b = znormalize(&ds.with_x(x), NormScheme::PerFold, Some(&fold.train)).unwrap();
        for &i in fold.train.iter().chain(&fold.tune) {
            prop_assert_eq!(&a.x[i], &b.x[i]);
        }
    }
}

#[test]
fn trained_model_is_a_stationary_point() {
    let ds = blobs(3, 3, 1);
    let x: Vec<&[f64]> = ds.x.iter().map(Vec::as_slice).collect();
    let settings = LogRegSettings { max_iter: 1000, tol: 1e-8 };
    let model = train_logreg(&x, &ds.y, 3, 0.1, &settings).unwrap();
    for b in &model.binaries {
        assert!(b.converged, "class {} stopped at {}", b.class, b.grad_norm);
        let t: Vec<f64> = ds.y.iter().map(|&y| (y == b.class) as u8 as f64).collect();
        let mut p = b.weights.clone();
        p.push(b.bias);
        let (f0, g) = logistic_objective(&x, &t, 0.1, &p);
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-8);
        let xs: Vec<Vec<f64>> = ds.x.clone();
        for k in 0..p.len() {
            for h in [1e-3, -1e-3] {
                let mut q = p.clone();
                q[k] += h;
                assert!(oracle_objective(&xs, &t, 0.1, &q) >= f0 - 1e-12);
            }
        }
    }
}

#[test]
fn separable_blobs_are_classified_perfectly() {
    let ds = blobs(5, 6, 3);
    let grid = [0.01, 1.0, 30.0];
    for (kind, norm) in [
        (FoldPlanKind::KFold { k: 5, seed: 0, stratify: true }, NormScheme::Global),
        (FoldPlanKind::LeaveOneSpeakerOut, NormScheme::PerFold),
        (FoldPlanKind::LosoSession, NormScheme::PerSpeaker),
    ] {
        let r = run_protocol(&ds, kind, norm, &grid, &LogRegSettings::default()).unwrap();
        assert_eq!(r.mean_wa, 1.0, "{kind:?}");
        assert_eq!(r.mean_ua, 1.0, "{kind:?}");
        let tested: usize = r.folds.iter().map(|f| f.n_test).sum();
        assert_eq!(tested, ds.len());
    }
}

#[test]
fn grid_ties_go_to_the_smallest_c() {
    let ds = blobs(4, 3, 5);
    let plan = make_folds(&ds, FoldPlanKind::LeaveOneSpeakerOut).unwrap();
    let (c, ua) = grid_search_c(&ds, &plan.folds[0], &[30.0, 1.0, 0.001, 10.0], &LogRegSettings::default()).unwrap();
    assert_eq!(ua, 1.0);
    assert_eq!(c, 0.001);
    let (c, _) = grid_search_c(&ds, &plan.folds[0], &[0.5], &LogRegSettings::default()).unwrap();
    assert_eq!(c, 0.5);
    assert!(grid_search_c(&ds, &plan.folds[0], &[], &LogRegSettings::default()).is_err());
}

#[test]
fn protocol_is_deterministic() {
    let ds = blobs(3, 5, 9);
    let kind = FoldPlanKind::KFold { k: 4, seed: 11, stratify: false };
    let a = run_protocol(&ds, kind, NormScheme::PerFold, &[0.1, 1.0], &LogRegSettings::default()).unwrap();
    let b = run_protocol(&ds, kind, NormScheme::PerFold, &[0.1, 1.0], &LogRegSettings::default()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn session_folds_test_each_speaker_once() {
    let ds = blobs(2, 3, 2);
    let plan = make_folds(&ds, FoldPlanKind::LosoSession).unwrap();
    assert_eq!(plan.folds.len(), 4);
    let mut tested: Vec<String> = Vec::new();
    for f in &plan.folds {
        let spk: std::collections::BTreeSet<_> = f.test.iter().map(|&i| ds.meta[i].speaker_id.clone()).collect();
        assert_eq!(spk.len(), 1);
        let tune: std::collections::BTreeSet<_> = f.tune.iter().map(|&i| ds.meta[i].speaker_id.clone()).collect();
        assert_eq!(tune.len(), 1);
        // the tune speaker shares the test speaker's session
        let sess = |s: &str| ds.meta.iter().find(|m| m.speaker_id == s).unwrap().session_id.clone();
        assert_eq!(sess(tune.iter().next().unwrap()), sess(spk.iter().next().unwrap()));
        for &i in &f.train {
            assert_ne!(ds.meta[i].session_id, sess(spk.iter().next().unwrap()));
        }
        tested.extend(spk);
    }
    tested.sort();
    assert_eq!(tested, ["s0", "s1", "s2", "s3"]);
}

proptest! {
    #[test]
    fn balanced_classes_make_wa_equal_ua(pred in prop::collection::vec(0usize..3, 12)) {
        let truth: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let m = metrics_from_predictions(&truth, &pred, 3);
        prop_assert!((m.wa - m.ua).abs() < 1e-12);
    }
}
