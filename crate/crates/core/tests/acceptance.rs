//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recurrex::embedding::{embed, estimate_embedding, EmbeddingSettings};
use recurrex::eval::{
    logistic_objective, make_folds, metrics_from_predictions, znormalize, Dataset, FoldPlanKind,
    NormScheme,
};
use recurrex::features::{fuse, read_table_csv, FeatureMeta, EXTERNAL_FEATURE_LEN, RQA_FEATURE_LEN};
use recurrex::manifest::Manifest;
use recurrex::pipeline::{analyze_frame, segment_features, utterance_features, FrameAnalysisConfig};
use recurrex::recurrence::{pairwise_distances, recurrence_plot, RecurrencePlot};
use recurrex::rqa::{rqa_measures, RqaOptions};
use recurrex::signal::{frame_signal, gen_synthetic, FrameSpec, SegmentSpec, Signal, Synthetic, DEFAULT_SAMPLE_RATE};

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn within(t: Duration, limit: f64) -> Result<(), String> {
    check(t.as_secs_f64() < limit, format!("took {:.2} s, limit {limit} s", t.as_secs_f64()))
}

fn c1_rqa_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let cases = 400;
    for seed in 0..cases {
        let size = rng.gen_range(4..=12);
        let density = rng.gen_range(0.05..0.95);
        let r = common::random_symmetric(size, density, seed);
        let rp = RecurrencePlot::from_rows(&r).map_err(|e| e.to_string())?;
        for exclude_loi in [false, true] {
            let got = rqa_measures(&rp, &RqaOptions { exclude_loi }).to_array();
            let want = common::oracle_measures(&r, exclude_loi);
            for k in 0..12 {
                worst = worst.max((got[k] - want[k]).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    within(start.elapsed(), 5.0)?;
    Ok(format!("{cases} matrices x 2 LOI modes, max deviation {worst:e}, {:.2?}", start.elapsed()))
}

fn c2_analytic() -> Outcome {
    let opts = RqaOptions::default();
    let ones = rqa_measures(&RecurrencePlot::all_ones(4), &opts);
    check(
        ones.det == 0.875 && ones.lam == 1.0 && ones.tt == 4.0 && ones.rr == 1.0,
        format!("all-ones: {ones:?}"),
    )?;
    let eye: Vec<Vec<bool>> = (0..6).map(|i| (0..6).map(|j| i == j).collect()).collect();
    let id = rqa_measures(&RecurrencePlot::from_rows(&eye).map_err(|e| e.to_string())?, &opts);
    check(id.det == 1.0 && id.lam == 0.0 && id.entr_d == 0.0, format!("identity: {id:?}"))?;
    Ok("all-ones DET 0.875 LAM 1 TT 4 RR 1; identity DET 1 LAM 0 ENTR_d 0".into())
}

fn c3_fixed_rr() -> Outcome {
    let start = Instant::now();
    let cfg = FrameAnalysisConfig::default();
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let sig = gen_synthetic(&Synthetic::white_noise(), 320, 100 + seed).map_err(|e| e.to_string())?;
        let frame = frame_signal(&sig, &FrameSpec::default()).map_err(|e| e.to_string())?.remove(0);
        let a = analyze_frame(&frame, &cfg).map_err(|e| e.to_string())?;
        let m = a.plot.size() as f64;
        let rr = a.plot.recurrence_rate();
        check((rr - 0.15).abs() <= 2.0 / m, format!("frame {seed}: RR {rr} with M = {m}"))?;
        worst = worst.max((rr - 0.15).abs() * m);

        let traj = embed(&frame, &a.params).map_err(|e| e.to_string())?;
        let d = pairwise_distances(&traj, cfg.norm).map_err(|e| e.to_string())?;
        let mut last: Option<RecurrencePlot> = None;
        for k in 1..=10 {
            let rp = recurrence_plot(&d, a.plot.epsilon() * k as f64 / 5.0).map_err(|e| e.to_string())?;
            if let Some(prev) = &last {
                check(rp.recurrence_rate() >= prev.recurrence_rate(), "RR not monotone in epsilon")?;
                let nested = (0..rp.size()).all(|i| (0..rp.size()).all(|j| !prev.get(i, j) || rp.get(i, j)));
                check(nested, "plots are not nested")?;
            }
            last = Some(rp);
        }
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("50 frames, max |RR - 0.15| * M = {worst:.3}, {:.2?}", start.elapsed()))
}

fn c4_dimensions() -> Outcome {
    let cfg = FrameAnalysisConfig::default();
    let sig = gen_synthetic(&Synthetic::lorenz96(36, 8.0), DEFAULT_SAMPLE_RATE as usize * 2, 3)
        .map_err(|e| e.to_string())?;
    let utt = utterance_features(&sig, &FrameSpec::default(), &cfg, FeatureMeta::default())
        .map_err(|e| e.to_string())?;
    check(utt.values.len() == RQA_FEATURE_LEN && RQA_FEATURE_LEN == 432, "utterance width")?;
    let seg = SegmentSpec { segment_s: 1.0, stride_s: 0.5 };
    let segs = segment_features(&sig, &seg, &FrameSpec::default(), &cfg, FeatureMeta::default())
        .map_err(|e| e.to_string())?;
    check(!segs.is_empty() && segs.iter().all(|s| s.values.len() == 432), "segment width")?;
    let fused = fuse(&utt, &vec![0.5; EXTERNAL_FEATURE_LEN]);
    check(fused.values.len() == 2014, format!("fused width {}", fused.values.len()))?;
    Ok(format!("utterance 432, {} segments x 432, fused 2014", segs.len()))
}

fn mean_det_lmax(kind: &Synthetic, cfg: &FrameAnalysisConfig) -> Result<(f64, f64), String> {
    let sig = gen_synthetic(kind, 20 * 320, 5).map_err(|e| e.to_string())?;
    let frames = frame_signal(&sig, &FrameSpec::default()).map_err(|e| e.to_string())?;
    let (mut det, mut lmax) = (0.0, 0.0);
    for f in frames.iter().take(20) {
        let a = analyze_frame(f, cfg).map_err(|e| e.to_string())?;
        det += a.measures.det / 20.0;
        lmax += a.measures.l_max / 20.0;
    }
    Ok((det, lmax))
}

fn c5_discrimination() -> Outcome {
    let start = Instant::now();
    let cfg = FrameAnalysisConfig::default();
    let (ds, ls) = mean_det_lmax(&Synthetic::sine(64.0), &cfg)?;
    let (dn, ln) = mean_det_lmax(&Synthetic::white_noise(), &cfg)?;
    check(ds - dn >= 0.2, format!("DET margin {:.3}", ds - dn))?;
    check(ls > ln, format!("L_max sine {ls} <= noise {ln}"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!(
        "DET sine {ds:.3} noise {dn:.3} (margin {:.3}); L_max sine {ls:.1} noise {ln:.1}",
        ds - dn
    ))
}

fn c6_embedding() -> Outcome {
    let sig = gen_synthetic(&Synthetic::sine(64.0), 320, 0).map_err(|e| e.to_string())?;
    let frame = frame_signal(&sig, &FrameSpec::default()).map_err(|e| e.to_string())?.remove(0);
    let s = EmbeddingSettings::default();
    let p = estimate_embedding(&frame, &s).map_err(|e| e.to_string())?;
    check((12..=20).contains(&p.tau), format!("tau {}", p.tau))?;
    check(p.m == 2 || p.m == 3, format!("m {}", p.m))?;
    let q = estimate_embedding(&frame, &s).map_err(|e| e.to_string())?;
    check(p == q, "re-run differs")?;
    Ok(format!("tau {} m {}, repeatable", p.tau, p.m))
}

fn recurrex(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_recurrex"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(
        o.status.success(),
        format!("recurrex {}: {}", args.join(" "), String::from_utf8_lossy(&o.stderr)),
    )
}

fn read_report(p: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(p).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn c7_end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    recurrex(&["gen-fixtures", "--out", &p("fx")])?;
    let manifest = p("fx/corpus/manifest.csv");
    recurrex(&["extract", "--manifest", &manifest, "--out", &p("feat.csv")])?;
    recurrex(&["evaluate", "--features", &p("feat.csv"), "--manifest", &manifest, "--protocol", "sd5", "--out", &p("sd.json")])?;
    recurrex(&[
        "evaluate", "--features", &p("feat.csv"), "--manifest", &manifest, "--protocol", "si",
        "--norm", "pf_n", "--out", &p("si.json"),
    ])?;
    let sd = read_report(&root.join("sd.json"))?;
    let si = read_report(&root.join("si.json"))?;
    let (wa, ua) = (sd["mean_wa"].as_f64().unwrap_or(0.0), sd["mean_ua"].as_f64().unwrap_or(0.0));
    check(wa >= 0.9 && ua >= 0.9, format!("sd5 WA {wa:.3} UA {ua:.3}"))?;
    let si_folds = si["folds"].as_array().map(Vec::len).unwrap_or(0);
    check(si_folds == 4, format!("si ran {si_folds} folds"))?;

    // leakage: test speakers never train, and per-fold statistics ignore test rows
    let mut table = read_table_csv(root.join("feat.csv")).map_err(|e| e.to_string())?;
    Manifest::read(&manifest).and_then(|m| m.annotate(&mut table)).map_err(|e| e.to_string())?;
    let ds = Dataset::from_table(&table).map_err(|e| e.to_string())?;
    let plan = make_folds(&ds, FoldPlanKind::LeaveOneSpeakerOut).map_err(|e| e.to_string())?;
    for fold in &plan.folds {
        let spk = &ds.meta[fold.test[0]].speaker_id;
        let leaked = fold.train.iter().chain(&fold.tune).any(|&i| &ds.meta[i].speaker_id == spk);
        check(!leaked, format!("{} leaks its test speaker", fold.name))?;
        let a = znormalize(&ds, NormScheme::PerFold, Some(&fold.train)).map_err(|e| e.to_string())?;
        let mut x = ds.x.clone();
        for &i in &fold.test {
            x[i].iter_mut().for_each(|v| *v = *v * 3.0 + 1.0);
        }
        let b = znormalize(&ds.with_x(x), NormScheme::PerFold, Some(&fold.train)).map_err(|e| e.to_string())?;
        check(fold.train.iter().all(|&i| a.x[i] == b.x[i]), "PF-N depends on test rows")?;
    }
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "sd5 WA {wa:.3} UA {ua:.3}; si 4 folds UA {:.3}, no leakage; {:.2?}",
        si["mean_ua"].as_f64().unwrap_or(0.0),
        start.elapsed()
    ))
}

fn c8_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<Vec<f64>> = (0..20).map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let t: Vec<f64> = (0..20).map(|_| rng.gen_range(0..2) as f64).collect();
    let params: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let refs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
    let (_, g) = logistic_objective(&refs, &t, 0.5, &params);
    let mut worst = 0.0f64;
    for k in 0..params.len() {
        let h = 1e-6;
        let mut a = params.clone();
        let mut b = params.clone();
        a[k] += h;
        b[k] -= h;
        let fd = (logistic_objective(&refs, &t, 0.5, &a).0 - logistic_objective(&refs, &t, 0.5, &b).0) / (2.0 * h);
        worst = worst.max((g[k] - fd).abs() / fd.abs().max(1e-8));
    }
    check(worst < 1e-5, format!("max relative error {worst:e}"))?;
    Ok(format!("20x5 problem, max relative error {worst:.1e}"))
}

fn c9_metrics() -> Outcome {
    let labels = ["A", "B"];
    let idx = |s: &[&str]| -> Vec<usize> { s.iter().map(|v| labels.iter().position(|l| l == v).unwrap()).collect() };
    let m = metrics_from_predictions(&idx(&["A", "A", "B", "B", "B"]), &idx(&["A", "B", "B", "B", "B"]), 2);
    check(m.wa == 0.8 && m.ua == 0.75, format!("WA {} UA {}", m.wa, m.ua))?;
    Ok("WA 0.8 UA 0.75".into())
}

fn c10_throughput() -> Outcome {
    let sr = DEFAULT_SAMPLE_RATE as usize;
    let mut samples = Vec::with_capacity(60 * sr);
    for (k, kind) in [Synthetic::sine(64.0), Synthetic::white_noise(), Synthetic::lorenz96(36, 8.0)]
        .iter()
        .enumerate()
    {
        let part = gen_synthetic(kind, 20 * sr, k as u64).map_err(|e| e.to_string())?;
        samples.extend_from_slice(part.samples());
    }
    let sig = Signal::new(samples, DEFAULT_SAMPLE_RATE, "mixed").map_err(|e| e.to_string())?;
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let start = Instant::now();
    let v = utterance_features(&sig, &FrameSpec::default(), &FrameAnalysisConfig::default(), FeatureMeta::default())
        .map_err(|e| e.to_string())?;
    let t = start.elapsed();
    check(v.values.len() == 432, "width")?;
    within(t, 10.0)?;
    Ok(format!("60 s of audio in {:.2} s on {cores} core(s)", t.as_secs_f64()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("RQA oracle equivalence", c1_rqa_oracle),
        ("analytic fixtures", c2_analytic),
        ("fixed-RR contract", c3_fixed_rr),
        ("dimension contracts", c4_dimensions),
        ("dynamics discrimination", c5_discrimination),
        ("embedding sanity", c6_embedding),
        ("end-to-end synthetic corpus", c7_end_to_end),
        ("LR gradient check", c8_gradient),
        ("metric definitions", c9_metrics),
        ("throughput", c10_throughput),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
