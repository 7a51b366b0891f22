//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Criteria run one at a time so timing checks are not skewed by each other.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gesturekit::classifier::{evaluate, gradcheck, train, Arch, Classifier, ClassifierConfig, LabeledSet};
use gesturekit::commands::bench;
use gesturekit::config::RunConfig;
use gesturekit::dataset::{synth_masks, SynthSpec};
use gesturekit::eval::{detection_rate, f_score, metrics, split_dataset, t_test_from_summary, ConfusionMatrix};
use gesturekit::hmi::{
    burst_trace, debounce, dispatch, run_session, Action, ButtonEdge, Context, DebounceConfig, FrameClock,
    GestureMap, HmiConfig, TargetState,
};
use gesturekit::imaging::{distance_transform, BinaryMask};
use gesturekit::segmentation::{segment_mask, SegmentationConfig};
use gesturekit::tracking::{path_stats, rms_error, simulate_constant_velocity, track_sequence, TrackingConfig};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Print outside the test harness capture so the line always shows.
fn verdict(n: u32, pass: bool, what: &str, detail: &str) -> bool {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n:>2} {tag}  {what}: {detail}");
    pass
}

#[test]
fn criterion_01_distance_transform_exact() {
    let _g = serial();
    let mask = BinaryMask::from_fn(11, 11, |r, c| (1..10).contains(&r) && (1..10).contains(&c));
    let expected: Vec<u32> = (0..11usize)
        .flat_map(|r| {
            (0..11usize).map(move |c| {
                if (1..10).contains(&r) && (1..10).contains(&c) {
                    r.min(c).min(10 - r).min(10 - c) as u32
                } else {
                    0
                }
            })
        })
        .collect();
    // Spot cells of the reference matrix.
    assert_eq!(&expected[11 * 2..11 * 3], &[0, 1, 2, 2, 2, 2, 2, 2, 2, 1, 0]);
    assert_eq!(&expected[11 * 5..11 * 6], &[0, 1, 2, 3, 4, 5, 4, 3, 2, 1, 0]);
    let start = Instant::now();
    let dt = distance_transform(&mask);
    let elapsed = start.elapsed();
    let exact = dt.dist == expected;
    let pass = exact && dt.max() == 5 && dt.argmax() == (5, 5) && elapsed.as_secs_f64() < 1e-3;
    assert!(verdict(
        1,
        pass,
        "distance transform",
        &format!(
            "cell-exact {exact}, max {} at {:?}, {:.1} us",
            dt.max(),
            dt.argmax(),
            elapsed.as_secs_f64() * 1e6
        )
    ));
}

#[test]
fn criterion_02_t_test_reproduction() {
    let _g = serial();
    let start = Instant::now();
    let r = t_test_from_summary(99.83, 0.2907, 10, 99.0).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let checks = [
        ("se", (r.se - 0.0919).abs() <= 1e-3),
        ("t", (r.t - 9.026).abs() <= 1e-3),
        ("df", r.df == 9),
        ("p", r.p_two < 1e-3),
        ("runtime", elapsed < 1.0),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let detail = format!(
        "se {:.6}, t {:.6} (target 9.026 +/- 1e-3), df {}, p {:.3e}, CI ({:.5}, {:.5}){}",
        r.se,
        r.t,
        r.df,
        r.p_two,
        r.ci95.0,
        r.ci95.1,
        if failed.is_empty() {
            String::new()
        } else {
            format!("; off target: {}", failed.join(", "))
        }
    );
    assert!(verdict(2, failed.is_empty(), "one-sample t-test", &detail));
}

/// The reference t value follows from the unrounded standard deviation; the
/// two-decimal inputs above cannot pin t to 1e-3.
#[test]
fn t_test_with_unrounded_sd_matches_reference_values() {
    let r = t_test_from_summary(99.83, 0.29079, 10, 99.0).unwrap();
    assert!((r.t - 9.026).abs() <= 1e-3, "t = {}", r.t);
    assert!((r.ci95.0 - 0.622).abs() < 5e-4 && (r.ci95.1 - 1.038).abs() < 5e-4, "{:?}", r.ci95);
}

/// Untracked bursts that put the target into a state where the trial's
/// action is legal.
fn prelude(ctx: Context, gesture: &str) -> &'static [&'static str] {
    match (ctx, gesture) {
        (Context::Vlc, "Five") | (Context::Audio, "Five") => &["Ok"],
        (Context::Audio, "Fist") => &["Ok", "Five"],
        (Context::Audio, "Three") => &["Two"],
        _ => &[],
    }
}

/// One trial in a fresh session; returns whether it scored a hit.
fn replay_trial(ctx: Context, gesture: &str, hit: bool) -> bool {
    let map = GestureMap::default_for(ctx);
    let cfg = HmiConfig {
        context: ctx,
        ..HmiConfig::default()
    };
    let setup: Vec<(&str, bool)> = prelude(ctx, gesture).iter().map(|&g| (g, true)).collect();
    let mut trace = burst_trace(&setup, 6, 2, 40.0);
    for o in &mut trace {
        o.intent = None;
    }
    let offset = trace.len();
    for mut o in burst_trace(&[(gesture, hit)], 6, 2, 40.0) {
        o.frame += offset;
        o.t_ms = o.frame as f64 * 40.0;
        trace.push(o);
    }
    let out = run_session(&trace, &map, &cfg, &TrackingConfig::default(), (640, 480)).unwrap();
    let action = map.action_for(gesture).unwrap();
    let c = out.stats.get(ctx.as_str(), action.as_str()).unwrap();
    assert_eq!(c.hits + c.misses, 1);
    c.hits == 1
}

#[test]
fn criterion_03_detection_rates() {
    let _g = serial();
    let vlc = [("Ok", 10, 0, 100), ("L", 8, 2, 80), ("Hang", 9, 1, 90), ("Close", 10, 0, 100), ("Two", 7, 3, 70), ("Five", 9, 1, 90)];
    let audio = [("Ok", 10, 0, 100), ("Five", 10, 0, 100), ("Fist", 9, 1, 90), ("Two", 8, 2, 80), ("Three", 7, 3, 70)];
    let mut ok = true;
    let mut cells = Vec::new();
    for (ctx, rows) in [(Context::Vlc, &vlc[..]), (Context::Audio, &audio[..])] {
        let map = GestureMap::default_for(ctx);
        for &(gesture, hits, misses, pct) in rows {
            let direct = 100.0 * detection_rate(hits, misses).unwrap();
            // Replay the tallies as hit and miss trials so the rate also
            // comes out of the session bookkeeping.
            let mut stats = gesturekit::eval::RunStats::default();
            let action = map.action_for(gesture).unwrap();
            for i in 0..hits + misses {
                if replay_trial(ctx, gesture, i < hits) {
                    stats.record_hit(ctx.as_str(), action.as_str(), None);
                } else {
                    stats.record_miss(ctx.as_str(), action.as_str());
                }
            }
            let replayed = 100.0 * stats.get(ctx.as_str(), action.as_str()).unwrap().detection_rate;
            ok &= direct == pct as f64 && replayed == pct as f64;
            cells.push(format!("{}/{}={replayed}", ctx.as_str(), action.as_str()));
        }
    }
    assert!(verdict(3, ok, "detection rates", &cells.join(" ")));
}

#[test]
fn criterion_04_metric_consistency() {
    let _g = serial();
    let f = f_score(99.28, 99.22);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..7);
        let samples = rng.gen_range(1..300);
        let pairs: Vec<(usize, usize)> =
            (0..samples).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
        let cm = ConfusionMatrix::from_pairs(n, pairs.iter().copied()).unwrap();
        let m = metrics(&cm).unwrap();
        // Brute-force recount straight from the pairs.
        let mut f_sum = 0.0;
        for c in 0..n {
            let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count() as f64;
            let pred = pairs.iter().filter(|&&(_, p)| p == c).count() as f64;
            let truth = pairs.iter().filter(|&&(t, _)| t == c).count() as f64;
            let pr = if pred > 0.0 { tp / pred } else { 0.0 };
            let re = if truth > 0.0 { tp / truth } else { 0.0 };
            let fs = if pr + re > 0.0 { 2.0 * pr * re / (pr + re) } else { 0.0 };
            f_sum += fs;
            let mc = &m.per_class[c];
            worst = worst
                .max((mc.precision - pr).abs())
                .max((mc.recall - re).abs())
                .max((mc.f_score - fs).abs());
        }
        let acc = pairs.iter().filter(|(t, p)| t == p).count() as f64 / samples as f64;
        worst = worst.max((m.accuracy - acc).abs()).max((m.macro_f_score - f_sum / n as f64).abs());
    }
    let pass = (f - 99.25).abs() <= 0.005 && worst < 1e-12;
    assert!(verdict(
        4,
        pass,
        "metric consistency",
        &format!("F(99.28, 99.22) = {f:.5}; max deviation from recount over 1000 matrices {worst:.1e}")
    ));
}

fn synthetic_split() -> (LabeledSet, LabeledSet, LabeledSet, Vec<String>) {
    let spec = SynthSpec::new(4, 200, 7).unwrap();
    let (masks, labels) = synth_masks(&spec).unwrap();
    assert_eq!(masks.len(), 800);
    let seg = SegmentationConfig::default();
    let inputs: Vec<BinaryMask> = masks.iter().map(|m| segment_mask(m, &seg).unwrap().unwrap()).collect();
    let all = LabeledSet::from_masks(&inputs, &labels).unwrap();
    let split = split_dataset(&labels, 7).unwrap();
    let names = spec.classes.iter().map(|c| c.name.clone()).collect();
    (all.subset(&split.train), all.subset(&split.val), all.subset(&split.test), names)
}

#[test]
fn criterion_05_desk_scale_accuracy() {
    let _g = serial();
    let (tr, va, te, names) = synthetic_split();
    let mut pass = true;
    let mut detail = Vec::new();
    for arch in [Arch::TinyCnn, Arch::MicroVit] {
        let config = ClassifierConfig::new(arch, 4);
        assert_eq!(config.epochs, 30);
        let start = Instant::now();
        let (mut model, history) = train(&tr, &va, &config, names.clone(), |_| {}).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let acc = evaluate(&mut model, &te).unwrap().accuracy;
        pass &= acc >= 0.95 && secs <= 600.0;
        detail.push(format!(
            "{arch:?} test acc {:.2}% (best epoch {}) in {secs:.0}s",
            100.0 * acc,
            history.best_epoch
        ));
    }
    assert!(verdict(5, pass, "synthetic 4-class accuracy", &detail.join("; ")));
}

#[test]
fn criterion_06_gradient_checks() {
    let _g = serial();
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for arch in [Arch::TinyCnn, Arch::MicroVit] {
        let r = gradcheck(&ClassifierConfig::toy(arch), 3, 400, 1e-3, 1e-3).unwrap();
        pass &= r.passed() && r.checked >= 100 && r.max_rel_err < 1e-3;
        detail.push(format!(
            "{arch:?} {} checked ({} skipped at kinks) of {} params, max rel err {:.2e}",
            r.checked, r.skipped, r.param_count, r.max_rel_err
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    detail.push(format!("{secs:.1}s"));
    assert!(verdict(6, pass, "gradient checks", &detail.join("; ")));
}

#[test]
fn criterion_07_kalman_effectiveness() {
    let _g = serial();
    let start = Instant::now();
    let cfg = TrackingConfig::default();
    let (mut raw_sum, mut filt_sum) = (0.0, 0.0);
    let mut jumps_reduced = 0;
    for seed in 0..100 {
        let sim = simulate_constant_velocity(seed, 200, 8.0);
        let meas: Vec<_> = sim.measurements.iter().map(|&m| Some(m)).collect();
        let filtered: Vec<(f64, f64)> =
            track_sequence(&meas, &cfg).unwrap().iter().map(|o| o.state.position()).collect();
        raw_sum += rms_error(&sim.measurements, &sim.truth);
        filt_sum += rms_error(&filtered, &sim.truth);
        if path_stats(&filtered).unwrap().max_jump < path_stats(&sim.measurements).unwrap().max_jump {
            jumps_reduced += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ratio = filt_sum / raw_sum;
    let pass = ratio <= 0.7 && jumps_reduced == 100 && secs < 30.0;
    assert!(verdict(
        7,
        pass,
        "Kalman smoothing",
        &format!(
            "mean RMS raw {:.3} px, filtered {:.3} px (ratio {ratio:.3}); max jump reduced on {jumps_reduced}/100 tracks; {secs:.2}s",
            raw_sum / 100.0,
            filt_sum / 100.0
        )
    ));
}

fn bench_report() -> gesturekit::commands::BenchReport {
    let cfg = RunConfig::default();
    assert_eq!((cfg.video.width, cfg.video.height, cfg.video.frames), (640, 480, 1000));
    let model = Classifier::new(ClassifierConfig::new(Arch::TinyCnn, 4), (0..4).map(|i| format!("c{i}")).collect())
        .unwrap();
    bench(&cfg, &model, 3, 1).unwrap()
}

#[test]
fn criterion_08_throughput() {
    let _g = serial();
    let report = bench_report();
    let (st, st_cv) = report.seg_track_fps();
    let (full, full_cv) = report.full_fps();
    let stages: Vec<String> = report.repeats[0].stage_ms.iter().map(|(k, v)| format!("{k} {v:.2}ms")).collect();
    assert!(verdict(
        8,
        st >= 25.0,
        "throughput",
        &format!(
            "segmentation+tracking {st:.1} fps (cv {:.1}%), full path {full:.1} fps (cv {:.1}%) over 3x1000 frames; {}",
            100.0 * st_cv,
            100.0 * full_cv,
            stages.join(", ")
        )
    ));
}

/// Repeats of the same bench agree, so the pipeline carries no state
/// between runs.
#[test]
fn bench_repeats_agree() {
    let _g = serial();
    let report = bench_report();
    let (_, st_cv) = report.seg_track_fps();
    let (_, full_cv) = report.full_fps();
    assert!(st_cv < 0.15 && full_cv < 0.15, "cv {st_cv:.3} / {full_cv:.3}");
}

fn tables() -> BTreeMap<Context, Vec<(&'static str, Action)>> {
    use Action::*;
    BTreeMap::from([
        (Context::Vlc, vec![("Ok", Play), ("L", VolumeUp), ("Hang", VolumeDown), ("Close", Quit), ("Two", NextVideo), ("Five", Pause)]),
        (Context::Audio, vec![("Ok", Play), ("Five", Pause), ("Fist", Resume), ("Two", NextSong), ("Three", PreviousSong)]),
        (Context::Mario, vec![("Ok", Run), ("Five", JumpRight), ("Two", Hold), ("Four", JumpLeft), ("Thumb", Jump)]),
        (Context::Mouse, vec![("Two", RightClick), ("Ok", DoubleClick), ("Index", LeftClick), ("Five", PointerMove), ("Heavy", ScrollUp), ("Hang", ScrollDown), ("Palm", Drag)]),
    ])
}

#[test]
fn criterion_09_dispatch_conformance() {
    let _g = serial();
    let tables = tables();
    let mut mapping_ok = true;
    for (&ctx, rows) in &tables {
        let map = GestureMap::default_for(ctx);
        mapping_ok &= map.entries.len() == rows.len();
        for &(g, a) in rows {
            mapping_ok &= map.action_for(g) == Some(a);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut replay_ok, mut volume_ok, mut release_ok) = (true, true, true);
    for _ in 0..300 {
        let ctx = Context::ALL[rng.gen_range(0..4)];
        let gestures: Vec<&str> = tables[&ctx].iter().map(|r| r.0).chain(["Unknown"]).collect();
        let labels: Vec<&str> = (0..rng.gen_range(1..80)).map(|_| gestures[rng.gen_range(0..gestures.len())]).collect();
        let replay = || {
            let map = GestureMap::default_for(ctx);
            let mut state = TargetState::default();
            let clock = FrameClock::default();
            let mut log = Vec::new();
            let mut volumes = Vec::new();
            for (i, l) in labels.iter().enumerate() {
                let cursor = Some((i as f64 * 7.0 % 1920.0, i as f64 * 3.0 % 1080.0));
                if let Some(e) = dispatch(l, &map, &mut state, i, cursor, &clock) {
                    log.push(e.to_json_line());
                }
                volumes.push(state.vlc.volume);
            }
            (log, volumes, state)
        };
        let (log_a, volumes, state) = replay();
        let (log_b, _, _) = replay();
        replay_ok &= log_a == log_b;
        volume_ok &= volumes.iter().all(|v| (0..=100).contains(v));
        let mut down = BTreeMap::new();
        for b in &state.mouse.buttons {
            let pressed = down.entry(b.button).or_insert(false);
            match b.edge {
                ButtonEdge::Press => {
                    release_ok &= !*pressed;
                    *pressed = true;
                }
                ButtonEdge::Release => {
                    release_ok &= *pressed;
                    *pressed = false;
                }
            }
        }
    }
    // Debounced committed-label traces replay identically as well.
    let stream: Vec<_> = (0..200).map(|i| Some((["Ok", "Five"][i / 7 % 2], 0.95))).collect();
    replay_ok &= debounce(stream.clone(), DebounceConfig::default()).unwrap()
        == debounce(stream, DebounceConfig::default()).unwrap();
    let pass = mapping_ok && replay_ok && volume_ok && release_ok;
    assert!(verdict(
        9,
        pass,
        "dispatch conformance",
        &format!(
            "tables {mapping_ok}, identical replays {replay_ok}, volume in range {volume_ok}, release after press {release_ok} (300 random traces)"
        )
    ));
}

fn gk(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_gk"))
        .current_dir(dir)
        .args(args)
        .args(["--threads", "1"])
        .output()
        .expect("gk runs");
    assert!(out.status.success(), "gk {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_10_determinism() {
    let _g = serial();
    let trace = burst_trace(&[("Ok", true), ("L", true), ("Hang", false), ("Five", true), ("Close", true)], 6, 3, 40.0);
    let run_once = |dir: &Path| {
        gesturekit::hmi::write_trace(dir.join("trace.jsonl"), &trace).unwrap();
        gk(dir, &["synth", "--classes", "4", "--per-class", "20", "--seed", "7", "--out", "data"]);
        gk(dir, &["train", "--dataset", "data", "--weights", "train/w.gkw", "--epochs", "2", "--seed", "7", "--out", "train"]);
        gk(dir, &["track", "--set", "video.frames=60", "--out", "track"]);
        gk(dir, &["run", "--context", "vlc", "--trace", "trace.jsonl", "--out", "run"]);
        ["data", "train", "track", "run"].map(|d| (d, tree_bytes(&dir.join(d))))
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (run_once(a.path()), run_once(b.path()));
    let mut detail = Vec::new();
    let mut pass = true;
    for ((name, fa), (_, fb)) in ra.iter().zip(&rb) {
        let same = !fa.is_empty() && fa == fb;
        pass &= same;
        detail.push(format!("{name} {} files {}", fa.len(), if same { "identical" } else { "DIFFER" }));
    }
    assert!(verdict(10, pass, "determinism", &detail.join(", ")));
}
