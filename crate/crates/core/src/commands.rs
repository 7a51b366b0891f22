//! End-to-end orchestration behind the `gk` subcommands. Every command reads
//! and writes files so each stage can be replayed in isolation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{self, evaluate, Classifier, EpochRecord, Evaluation, History, LabeledSet};
use crate::config::RunConfig;
use crate::dataset::{self, load_manifest, Manifest, SynthSpec, SyntheticVideo, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::eval::{kfold, metrics, split_dataset, t_test, ConfusionMatrix, MetricsReport, Subset, TTestResult};
use crate::hmi::{run_session, ActionEvent, Observation, SessionOutput};
use crate::imaging::{pnm, BinaryMask, Frame};
use crate::segmentation::{extract_input, segment_mask, HandRegion, Segmenter};
use crate::tracking::{map_to_screen, smoothness_report, SmoothnessReport, Tracker};

/// Frame period assumed for synthetic footage (25 fps).
pub const FRAME_MS: f64 = 40.0;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut out = Vec::new();
    for l in lines {
        writeln!(out, "{l}").expect("vec write");
    }
    write_file(path, out)
}

// synth

pub fn synth(spec: &SynthSpec, out: &Path, threads: usize) -> Result<Manifest> {
    dataset::synth_generate(spec, out, threads)
}

// train / eval

/// Segment every manifest mask into a classifier input.
pub fn prepare_dataset(manifest: &Manifest, config: &RunConfig) -> Result<LabeledSet> {
    let mut inputs = Vec::with_capacity(manifest.len());
    for i in 0..manifest.len() {
        let mask = manifest.load_mask(i).map_err(|e| e.at_stage("load", i))?;
        let input = segment_mask(&mask, &config.segmentation)
            .map_err(|e| e.at_stage("segment", i))?
            .ok_or_else(|| {
                Error::Degenerate(format!("no hand in `{}`", manifest.entries[i].0.display())).at_stage("segment", i)
            })?;
        inputs.push(input);
    }
    LabeledSet::from_masks(&inputs, &manifest.labels())
}

fn dataset_manifest(config: &RunConfig) -> Result<Manifest> {
    load_manifest(config.io.dataset.join(MANIFEST_FILE))
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub history: History,
    pub test: Evaluation,
    pub weights: PathBuf,
    pub history_csv: PathBuf,
}

/// Split the dataset, train, keep the best validation epoch, write weights
/// and the epoch history.
pub fn train(config: &RunConfig, on_epoch: impl FnMut(&EpochRecord)) -> Result<TrainReport> {
    let manifest = dataset_manifest(config)?;
    let set = prepare_dataset(&manifest, config)?;
    let split = split_dataset(&set.labels, config.seed)?;
    let mut cc = config.classifier.clone();
    cc.n_classes = manifest.class_names.len();
    let (mut model, history) = classifier::train(
        &set.subset(&split.train),
        &set.subset(&split.val),
        &cc,
        manifest.class_names.clone(),
        on_epoch,
    )?;
    let test = evaluate(&mut model, &set.subset(&split.test))?;
    let weights = config.io.weights.clone();
    if let Some(parent) = weights.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    model.save(&weights)?;
    let history_csv = config.io.out_dir.join("history.csv");
    write_file(&history_csv, history.to_csv())?;
    Ok(TrainReport {
        history,
        test,
        weights,
        history_csv,
    })
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub subset: Option<Subset>,
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    /// Accuracy in percent per fold of the evaluated subset.
    pub fold_accuracy: Vec<f64>,
    /// `None` when every fold scored the same.
    pub t_test: Option<TTestResult>,
}

impl EvalReport {
    pub fn confusion_table(&self) -> String {
        let corner = "truth\\pred";
        let w = self.class_names.iter().map(String::len).max().unwrap_or(1).max(6);
        let first = w.max(corner.len());
        let mut out = format!("{corner:<first$}");
        for n in &self.class_names {
            let _ = write!(out, "  {n:>w$}");
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(self.confusion.rows()) {
            let _ = write!(out, "{name:<first$}");
            for v in row {
                let _ = write!(out, "  {v:>w$}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.metrics.to_csv(&self.class_names);
        out.push_str("\nconfusion");
        for n in &self.class_names {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(self.confusion.rows()) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{name},{}", cells.join(","));
        }
        out.push_str("\nfold,accuracy\n");
        for (i, a) in self.fold_accuracy.iter().enumerate() {
            let _ = writeln!(out, "{i},{a:.6}");
        }
        out.push_str("\nt_test,value\n");
        match &self.t_test {
            Some(t) => {
                let _ = writeln!(
                    out,
                    "k,{}\nmean,{:.6}\nsd,{:.6}\nmu,{}\nse,{:.6}\nt,{:.6}\ndf,{}\np_two,{:.6e}\nci95_lo,{:.6}\nci95_hi,{:.6}",
                    t.k, t.mean, t.sd, t.mu, t.se, t.t, t.df, t.p_two, t.ci95.0, t.ci95.1
                );
            }
            None => out.push_str("undefined,zero variance across folds\n"),
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "accuracy {:.4}\nmacro precision {:.4}  recall {:.4}  f-score {:.4}\n\n",
            self.metrics.accuracy, self.metrics.macro_precision, self.metrics.macro_recall, self.metrics.macro_f_score
        );
        out.push_str(&self.metrics.to_table(&self.class_names));
        out.push('\n');
        out.push_str(&self.confusion_table());
        out.push('\n');
        match &self.t_test {
            Some(t) => out.push_str(&t.to_table()),
            None => out.push_str("t-test undefined: every fold has the same accuracy\n"),
        }
        out
    }
}

/// Evaluate saved weights on one split of the dataset (or all of it) and
/// write `metrics.csv`.
pub fn eval(config: &RunConfig, subset: Option<Subset>) -> Result<EvalReport> {
    let manifest = dataset_manifest(config)?;
    let set = prepare_dataset(&manifest, config)?;
    let set = match subset {
        Some(which) => set.subset(split_dataset(&set.labels, config.seed)?.subset(which)),
        None => set,
    };
    let mut model = Classifier::load(&config.io.weights)?;
    if model.class_names != manifest.class_names {
        return Err(Error::Config(format!(
            "weights classes {:?} differ from dataset classes {:?}",
            model.class_names, manifest.class_names
        )));
    }
    let Evaluation { predictions, .. } = evaluate(&mut model, &set)?;
    let n = model.class_names.len();
    let confusion = ConfusionMatrix::from_pairs(n, set.labels.iter().copied().zip(predictions.iter().copied()))?;
    let report = metrics(&confusion)?;
    let folds = kfold(&set.labels, config.eval.folds, config.seed)?;
    let fold_accuracy: Vec<f64> = (0..config.eval.folds)
        .map(|f| {
            let idx: Vec<usize> = (0..set.len()).filter(|&i| folds[i] == f).collect();
            let ok = idx.iter().filter(|&&i| predictions[i] == set.labels[i]).count();
            100.0 * ok as f64 / idx.len() as f64
        })
        .collect();
    let t = match t_test(&fold_accuracy, config.eval.t_mu) {
        Ok(t) => Some(t),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    let out = EvalReport {
        subset,
        class_names: model.class_names.clone(),
        confusion,
        metrics: report,
        fold_accuracy,
        t_test: t,
    };
    write_file(&config.io.out_dir.join("metrics.csv"), out.to_csv())?;
    Ok(out)
}

// frame sources

/// Camera input: synthetic footage, or a directory with `background.ppm`
/// and frames named in playback order.
pub enum FrameSource {
    Synthetic(Box<SyntheticVideo>),
    Directory { background: Frame, frames: Vec<PathBuf> },
}

impl FrameSource {
    pub fn synthetic(config: &RunConfig) -> Result<Self> {
        Ok(FrameSource::Synthetic(Box::new(SyntheticVideo::new(config.video.clone())?)))
    }

    pub fn directory(dir: &Path) -> Result<Self> {
        let background = pnm::read_frame(dir.join("background.ppm"))?;
        let mut frames: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(p.extension().and_then(|e| e.to_str()), Some("ppm" | "pgm"))
                    && p.file_name().is_some_and(|n| n != "background.ppm")
            })
            .collect();
        frames.sort();
        Ok(FrameSource::Directory { background, frames })
    }

    pub fn background(&self) -> &Frame {
        match self {
            FrameSource::Synthetic(v) => v.background(),
            FrameSource::Directory { background, .. } => background,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            FrameSource::Synthetic(v) => v.len(),
            FrameSource::Directory { frames, .. } => frames.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame(&self, i: usize) -> Result<Frame> {
        match self {
            FrameSource::Synthetic(v) => Ok(v.frame(i).0),
            FrameSource::Directory { frames, .. } => pnm::read_frame(&frames[i]),
        }
    }
}

// segment

/// One line of `regions.jsonl`. Points are `[x, y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionRecord {
    pub frame: usize,
    pub found: bool,
    pub centroid: Option<(f64, f64)>,
    pub palm_center: Option<(usize, usize)>,
    pub palm_radius: Option<u32>,
    /// `[left, top, right, bottom]`, inclusive.
    pub bbox: Option<[usize; 4]>,
    pub area: Option<usize>,
    pub roi_dims: Option<(usize, usize)>,
}

impl RegionRecord {
    pub fn new(frame: usize, hand: Option<&HandRegion>) -> Self {
        match hand {
            Some(h) => {
                let b = h.contour.bbox;
                Self {
                    frame,
                    found: true,
                    centroid: Some(h.centroid),
                    palm_center: Some((h.palm_center.1, h.palm_center.0)),
                    palm_radius: Some(h.palm_radius),
                    bbox: Some([b.left, b.top, b.right, b.bottom]),
                    area: Some(h.contour.area),
                    roi_dims: Some(h.roi.dims()),
                }
            }
            None => Self {
                frame,
                found: false,
                centroid: None,
                palm_center: None,
                palm_radius: None,
                bbox: None,
                area: None,
                roi_dims: None,
            },
        }
    }
}

/// Segment every frame and write `regions.jsonl`.
pub fn segment(config: &RunConfig, source: &FrameSource) -> Result<Vec<RegionRecord>> {
    let seg = Segmenter::new(source.background(), config.segmentation.clone())?;
    let mut records = Vec::with_capacity(source.len());
    for i in 0..source.len() {
        let frame = source.frame(i).map_err(|e| e.at_stage("capture", i))?;
        let hand = seg.process(&frame).map_err(|e| e.at_stage("segment", i))?;
        records.push(RegionRecord::new(i, hand.as_ref()));
    }
    write_lines(
        &config.io.out_dir.join("regions.jsonl"),
        records.iter().map(|r| serde_json::to_string(r).expect("record serializes")),
    )?;
    Ok(records)
}

pub fn load_regions(path: &Path) -> Result<Vec<RegionRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::parse(format!("{}:{}", path.display(), i + 1), e.to_string()))
        })
        .collect()
}

// track

/// One line of `cursor.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CursorRecord {
    pub frame: usize,
    pub t_ms: f64,
    /// Measured hand centroid in camera pixels.
    pub raw: Option<(f64, f64)>,
    /// Filtered position in camera pixels.
    pub smoothed: Option<(f64, f64)>,
    /// Screen position of the pointer.
    pub cursor: Option<(f64, f64)>,
    pub coasting: bool,
}

#[derive(Debug, Clone)]
pub struct TrackReport {
    pub records: Vec<CursorRecord>,
    /// Raw vs filtered camera-space paths over frames that have both.
    pub smoothness: Option<SmoothnessReport>,
}

/// Kalman-filter the hand centroids and write `cursor.jsonl`.
pub fn track(config: &RunConfig, regions: &[RegionRecord], cam_dims: (usize, usize)) -> Result<TrackReport> {
    let mut tracker = Tracker::new(config.tracking.clone())?;
    let mut records = Vec::with_capacity(regions.len());
    for r in regions {
        let out = tracker.step(r.centroid).map_err(|e| e.at_stage("track", r.frame))?;
        let smoothed = out.as_ref().map(|o| o.state.position());
        records.push(CursorRecord {
            frame: r.frame,
            t_ms: r.frame as f64 * FRAME_MS,
            raw: r.centroid,
            smoothed,
            cursor: smoothed.map(|p| map_to_screen(p, cam_dims, config.hmi.screen, true)),
            coasting: out.is_some_and(|o| o.coasting),
        });
    }
    let (raw, smooth): (Vec<_>, Vec<_>) = records.iter().filter_map(|r| Some((r.raw?, r.smoothed?))).unzip();
    let smoothness = if raw.len() >= 2 {
        Some(smoothness_report(&raw, &smooth)?)
    } else {
        None
    };
    write_lines(
        &config.io.out_dir.join("cursor.jsonl"),
        records.iter().map(|r| serde_json::to_string(r).expect("record serializes")),
    )?;
    Ok(TrackReport { records, smoothness })
}

// run

/// Classify frames into an observation trace. The intent of a frame is the
/// class at the video's gesture index, so list video gestures in class order.
pub fn observe(config: &RunConfig, video: &SyntheticVideo, model: &mut Classifier) -> Result<Vec<Observation>> {
    let seg = Segmenter::new(video.background(), config.segmentation.clone())?;
    let n = model.class_names.len();
    let mut out = Vec::with_capacity(video.len());
    for i in 0..video.len() {
        let (frame, _) = video.frame(i);
        let t_ms = i as f64 * FRAME_MS;
        let mut obs = Observation::new(i, t_ms);
        if let Some(&name) = model.class_names.get(video.gesture_index(i)).filter(|_| video.spec().gestures.len() == n).as_ref() {
            obs = obs.with_intent(name);
        }
        if let Some(hand) = seg.process(&frame).map_err(|e| e.at_stage("segment", i))? {
            let input = extract_input(&hand, model.input_side()).map_err(|e| e.at_stage("extract", i))?;
            let p = model.predict(&input, i, t_ms).map_err(|e| e.at_stage("classify", i))?;
            obs = obs.with_label(model.label(p.label_index), p.confidence()).with_centroid(hand.centroid);
        }
        out.push(obs);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output: SessionOutput,
    pub actions_path: PathBuf,
    pub stats_path: PathBuf,
}

/// Replay observations through the HMI session; write `actions.jsonl` and
/// `run_stats.csv`.
pub fn run(config: &RunConfig, observations: &[Observation], cam_dims: (usize, usize)) -> Result<RunReport> {
    let map = config.hmi.gesture_map()?;
    let output = run_session(observations, &map, &config.hmi, &config.tracking, cam_dims)?;
    let actions_path = config.io.out_dir.join("actions.jsonl");
    let stats_path = config.io.out_dir.join("run_stats.csv");
    write_lines(&actions_path, output.log.iter().map(ActionEvent::to_json_line))?;
    write_file(&stats_path, output.stats.to_csv())?;
    Ok(RunReport {
        output,
        actions_path,
        stats_path,
    })
}

// bench

pub const BENCH_STAGES: [&str; 5] = ["foreground", "detect", "track", "extract", "classify"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRepeat {
    /// Segmentation and tracking only.
    pub seg_track_fps: f64,
    /// Including input extraction and classifier inference.
    pub full_fps: f64,
    /// Mean latency per stage in milliseconds.
    pub stage_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub threads: usize,
    pub arch: String,
    pub repeats: Vec<BenchRepeat>,
}

impl BenchReport {
    fn spread(values: impl Iterator<Item = f64>) -> (f64, f64) {
        let v: Vec<f64> = values.collect();
        let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
        if v.len() < 2 || mean <= 0.0 {
            return (mean, 0.0);
        }
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (mean, var.sqrt() / mean)
    }

    /// Mean and coefficient of variation of the segmentation + tracking fps
    /// across repeats.
    pub fn seg_track_fps(&self) -> (f64, f64) {
        Self::spread(self.repeats.iter().map(|r| r.seg_track_fps))
    }

    pub fn full_fps(&self) -> (f64, f64) {
        Self::spread(self.repeats.iter().map(|r| r.full_fps))
    }

    pub fn to_text(&self) -> String {
        let (st, st_var) = self.seg_track_fps();
        let (full, full_var) = self.full_fps();
        let mut out = format!(
            "{} frames {}x{}, {} repeat(s), {} thread(s), classifier {}\n\
             segmentation+tracking  {st:>8.1} fps  (cv {:.1}%)\n\
             full path              {full:>8.1} fps  (cv {:.1}%)\n\nstage latency (ms)\n",
            self.frames,
            self.width,
            self.height,
            self.repeats.len(),
            self.threads,
            self.arch,
            100.0 * st_var,
            100.0 * full_var
        );
        for stage in BENCH_STAGES {
            let ms = self.repeats.iter().map(|r| r.stage_ms[stage]).sum::<f64>() / self.repeats.len().max(1) as f64;
            let _ = writeln!(out, "  {stage:<10} {ms:>8.3}");
        }
        out
    }
}

fn bench_chunk(
    video: &SyntheticVideo,
    seg: &Segmenter,
    config: &RunConfig,
    model: &mut Classifier,
    frames: std::ops::Range<usize>,
) -> Result<[f64; 5]> {
    let mut tracker = Tracker::new(config.tracking.clone())?;
    let mut secs = [0.0f64; 5];
    for i in frames {
        let (frame, _) = video.frame(i);
        let t0 = Instant::now();
        let fg = seg.foreground(&frame).map_err(|e| e.at_stage("foreground", i))?;
        let t1 = Instant::now();
        let cfg = seg.config();
        let hand = crate::segmentation::detect_hand(&fg, cfg.min_area(fg.dims()), cfg.cut_factor)
            .map_err(|e| e.at_stage("detect", i))?;
        let t2 = Instant::now();
        tracker.step(hand.as_ref().map(|h| h.centroid)).map_err(|e| e.at_stage("track", i))?;
        let t3 = Instant::now();
        let input = match &hand {
            Some(h) => extract_input(h, model.input_side()).map_err(|e| e.at_stage("extract", i))?,
            None => BinaryMask::empty(model.input_side(), model.input_side()),
        };
        let t4 = Instant::now();
        model.predict(&input, i, 0.0).map_err(|e| e.at_stage("classify", i))?;
        let t5 = Instant::now();
        for (s, (a, b)) in secs.iter_mut().zip([(t0, t1), (t1, t2), (t2, t3), (t3, t4), (t4, t5)]) {
            *s += (b - a).as_secs_f64();
        }
    }
    Ok(secs)
}

/// Time the pipeline on synthetic footage. Frame rendering stands in for
/// capture and is not timed. With several threads each worker runs a
/// contiguous block of frames with its own tracker and model copy.
pub fn bench(config: &RunConfig, model: &Classifier, repeats: usize, threads: usize) -> Result<BenchReport> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("bench needs at least one repeat".into()));
    }
    let video = SyntheticVideo::new(config.video.clone())?;
    let n = video.len();
    if n == 0 {
        return Err(Error::InvalidArgument("bench needs at least one frame".into()));
    }
    let seg = Segmenter::new(video.background(), config.segmentation.clone())?;
    let threads = threads.clamp(1, n);
    let chunk = n.div_ceil(threads);
    let mut out = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let per_worker: Vec<[f64; 5]> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let (video, seg) = (&video, &seg);
                    let mut m = model.clone();
                    s.spawn(move || bench_chunk(video, seg, config, &mut m, t * chunk..((t + 1) * chunk).min(n)))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("bench worker panicked"))
                .collect::<Result<Vec<_>>>()
        })?;
        // Workers run concurrently: wall time is the slowest worker.
        let wall = |stages: std::ops::Range<usize>| {
            per_worker
                .iter()
                .map(|w| w[stages.clone()].iter().sum::<f64>())
                .fold(0.0f64, f64::max)
        };
        let stage_ms = BENCH_STAGES
            .iter()
            .enumerate()
            .map(|(k, s)| (s.to_string(), 1e3 * per_worker.iter().map(|w| w[k]).sum::<f64>() / n as f64))
            .collect();
        out.push(BenchRepeat {
            seg_track_fps: n as f64 / wall(0..3),
            full_fps: n as f64 / wall(0..5),
            stage_ms,
        });
    }
    Ok(BenchReport {
        frames: n,
        width: config.video.width,
        height: config.video.height,
        threads,
        arch: format!("{:?}", model.config.arch),
        repeats: out,
    })
}
