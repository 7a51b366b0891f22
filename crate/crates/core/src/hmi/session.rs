use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::debounce::{DebounceConfig, Debouncer};
use super::gesture_map::{Action, Context, GestureMap};
use super::targets::{dispatch, ActionEvent, Clock, FrameClock, MonotonicClock, TargetState};
use crate::error::{Error, Result};
use crate::eval::RunStats;
use crate::tracking::{map_to_screen, Tracker, TrackingConfig};

/// One classified frame, either produced by the pipeline or read from a
/// replay trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    pub frame: usize,
    #[serde(default)]
    pub t_ms: f64,
    /// Top-class label; absent when no hand was found.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub confidence: f64,
    /// Hand centroid in camera pixels.
    #[serde(default)]
    pub centroid: Option<(f64, f64)>,
    /// Gesture the user meant to perform; drives hit/miss scoring.
    #[serde(default)]
    pub intent: Option<String>,
}

impl Observation {
    pub fn new(frame: usize, t_ms: f64) -> Self {
        Self {
            frame,
            t_ms,
            label: None,
            confidence: 0.0,
            centroid: None,
            intent: None,
        }
    }

    pub fn with_label(mut self, label: &str, confidence: f64) -> Self {
        self.label = Some(label.to_string());
        self.confidence = confidence;
        self
    }

    pub fn with_intent(mut self, intent: &str) -> Self {
        self.intent = Some(intent.to_string());
        self
    }

    pub fn with_centroid(mut self, c: (f64, f64)) -> Self {
        self.centroid = Some(c);
        self
    }
}

/// Read a JSONL prediction trace. The whole file is validated up front.
pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<Observation>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let obs: Observation = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), i + 1), e.to_string()))?;
        out.push(obs);
    }
    Ok(out)
}

pub fn write_trace(path: impl AsRef<Path>, trace: &[Observation]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for o in trace {
        text.push_str(&serde_json::to_string(o).expect("observation serializes"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    /// Wall-clock response times.
    Monotonic,
    /// Frame timestamps only; logs are reproducible.
    #[default]
    Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HmiConfig {
    pub context: Context,
    pub debounce: DebounceConfig,
    pub clock: ClockKind,
    pub screen: (usize, usize),
    /// Optional gesture-map JSON overriding the built-in table.
    pub map: Option<std::path::PathBuf>,
}

impl Default for HmiConfig {
    fn default() -> Self {
        Self {
            context: Context::Vlc,
            debounce: DebounceConfig::default(),
            clock: ClockKind::Frame,
            screen: super::targets::DEFAULT_SCREEN,
            map: None,
        }
    }
}

impl HmiConfig {
    pub fn validate(&self) -> Result<()> {
        self.debounce.validate()?;
        if self.screen.0 < 2 || self.screen.1 < 2 {
            return Err(Error::Config(format!("screen {:?} is too small", self.screen)));
        }
        Ok(())
    }

    /// The configured map file, or the built-in table for the context.
    pub fn gesture_map(&self) -> Result<GestureMap> {
        match &self.map {
            Some(path) => {
                let map = GestureMap::load(path)?;
                if map.context != self.context {
                    return Err(Error::Config(format!(
                        "gesture map is for {} but the session context is {}",
                        map.context, self.context
                    )));
                }
                Ok(map)
            }
            None => Ok(GestureMap::default_for(self.context)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub log: Vec<ActionEvent>,
    pub state: TargetState,
    pub stats: RunStats,
}

struct Trial {
    intent: String,
    hit: Option<f64>,
}

/// Incremental session loop: debounce, dispatch, and in the mouse context
/// track the hand to drive the pointer.
pub struct Session {
    map: GestureMap,
    debouncer: Debouncer,
    clock: Box<dyn Clock>,
    tracker: Option<Tracker>,
    cam_dims: (usize, usize),
    state: TargetState,
    log: Vec<ActionEvent>,
    stats: RunStats,
    last_commit: Option<String>,
    trial: Option<Trial>,
}

impl Session {
    pub fn new(
        map: GestureMap,
        config: &HmiConfig,
        tracking: &TrackingConfig,
        cam_dims: (usize, usize),
    ) -> Result<Self> {
        config.validate()?;
        map.validate()?;
        let clock: Box<dyn Clock> = match config.clock {
            ClockKind::Monotonic => Box::new(MonotonicClock::default()),
            ClockKind::Frame => Box::new(FrameClock::default()),
        };
        let tracker = if map.context == Context::Mouse {
            Some(Tracker::new(tracking.clone())?)
        } else {
            None
        };
        Ok(Self {
            map,
            debouncer: Debouncer::new(config.debounce)?,
            clock,
            tracker,
            cam_dims,
            state: TargetState::new(config.screen),
            log: Vec::new(),
            stats: RunStats::default(),
            last_commit: None,
            trial: None,
        })
    }

    pub fn state(&self) -> &TargetState {
        &self.state
    }

    /// Process one observation; returns the dispatched event, if any.
    pub fn feed(&mut self, obs: &Observation) -> Result<Option<ActionEvent>> {
        self.clock.set_frame_time(obs.t_ms);
        if self.trial.as_ref().map(|t| &t.intent) != obs.intent.as_ref() {
            self.close_trial();
            self.trial = obs.intent.clone().map(|intent| Trial { intent, hit: None });
        }

        let cursor = match &mut self.tracker {
            Some(tracker) => tracker.step(obs.centroid)?.map(|o| {
                map_to_screen(o.state.position(), self.cam_dims, self.state.mouse.screen, true)
            }),
            None => None,
        };

        let prediction = obs.label.as_deref().map(|l| (l, obs.confidence));
        let committed = self.debouncer.push(prediction);
        let event = match committed {
            Some(label) => {
                let event = dispatch(&label, &self.map, &mut self.state, obs.frame, cursor, self.clock.as_ref());
                self.last_commit = Some(label);
                event
            }
            None => {
                self.follow_held_pointer(obs, cursor);
                None
            }
        };

        if let Some(e) = &event {
            match &mut self.trial {
                Some(trial) => {
                    if trial.hit.is_none() && !e.warning && e.gesture == trial.intent {
                        trial.hit = Some(e.response_ms);
                    }
                }
                None if !e.warning => {
                    self.stats
                        .record_hit(e.context.as_str(), e.action.as_str(), Some(e.response_ms));
                }
                None => {}
            }
            self.log.push(e.clone());
        }
        Ok(event)
    }

    /// While the committed pointer or drag gesture is held, the cursor
    /// keeps following the hand without emitting new events.
    fn follow_held_pointer(&mut self, obs: &Observation, cursor: Option<(f64, f64)>) {
        let (Some(cursor), Some(label), Some(last)) = (cursor, obs.label.as_deref(), self.last_commit.as_deref())
        else {
            return;
        };
        if label != last {
            return;
        }
        let held = match self.map.action_for(label) {
            Some(Action::PointerMove) => true,
            Some(Action::Drag) => self.state.mouse.drag_anchor.is_some(),
            _ => false,
        };
        if held && self.debouncer.current_run().is_some() {
            self.state.mouse.move_to(cursor);
        }
    }

    fn close_trial(&mut self) {
        let Some(trial) = self.trial.take() else { return };
        let Some(action) = self.map.action_for(&trial.intent) else { return };
        let ctx = self.map.context.as_str();
        match trial.hit {
            Some(ms) => self.stats.record_hit(ctx, action.as_str(), Some(ms)),
            None => self.stats.record_miss(ctx, action.as_str()),
        }
    }

    pub fn finish(mut self) -> SessionOutput {
        self.close_trial();
        SessionOutput {
            log: self.log,
            state: self.state,
            stats: self.stats,
        }
    }
}

/// Replay a classified observation stream through a fresh session.
pub fn run_session(
    observations: &[Observation],
    map: &GestureMap,
    config: &HmiConfig,
    tracking: &TrackingConfig,
    cam_dims: (usize, usize),
) -> Result<SessionOutput> {
    let mut session = Session::new(map.clone(), config, tracking, cam_dims)?;
    for obs in observations {
        session.feed(obs)?;
    }
    Ok(session.finish())
}

/// Synthetic trace: for each `(gesture, hit)` pair, one burst of `burst`
/// confident frames when `hit`, or alternating low-confidence frames when
/// not, followed by `gap` empty frames. Every frame carries the intent.
pub fn burst_trace(trials: &[(&str, bool)], burst: usize, gap: usize, frame_ms: f64) -> Vec<Observation> {
    let mut out = Vec::new();
    let mut frame = 0usize;
    for &(gesture, hit) in trials {
        for i in 0..burst {
            let conf = if hit || i % 2 == 0 { 0.97 } else { 0.3 };
            out.push(
                Observation::new(frame, frame as f64 * frame_ms)
                    .with_label(gesture, conf)
                    .with_intent(gesture),
            );
            frame += 1;
        }
        for _ in 0..gap {
            out.push(Observation::new(frame, frame as f64 * frame_ms));
            frame += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vlc() -> (GestureMap, HmiConfig) {
        (GestureMap::default_for(Context::Vlc), HmiConfig::default())
    }

    fn replay(obs: &[Observation], map: &GestureMap, cfg: &HmiConfig) -> SessionOutput {
        run_session(obs, map, cfg, &TrackingConfig::default(), (640, 480)).unwrap()
    }

    #[test]
    fn ten_ok_bursts_give_ten_plays() {
        let (map, cfg) = vlc();
        let trace = burst_trace(&[("Ok", true); 10], 8, 4, 33.0);
        let out = replay(&trace, &map, &cfg);
        assert_eq!(out.log.len(), 10);
        assert!(out.log.iter().all(|e| e.action == Action::Play));
        let s = out.stats.get("vlc", "Play").unwrap();
        assert_eq!((s.hits, s.misses), (10, 0));
    }

    #[test]
    fn empty_trace() {
        let (map, cfg) = vlc();
        let out = replay(&[], &map, &cfg);
        assert!(out.log.is_empty());
        assert_eq!(out.state, TargetState::default());
    }

    #[test]
    fn misses_are_scored() {
        let (map, cfg) = vlc();
        let trials: Vec<(&str, bool)> = (0..10).map(|i| ("L", i < 8)).collect();
        let out = replay(&burst_trace(&trials, 8, 4, 33.0), &map, &cfg);
        let s = out.stats.get("vlc", "VolumeUp").unwrap();
        assert_eq!((s.hits, s.misses), (8, 2));
        assert_eq!(s.detection_rate, 0.8);
    }

    #[test]
    fn single_frame_glitches_do_not_dispatch() {
        let (map, cfg) = vlc();
        let trace: Vec<Observation> = (0..40)
            .map(|i| Observation::new(i, i as f64).with_label(if i % 2 == 0 { "Ok" } else { "Two" }, 0.99))
            .collect();
        assert!(replay(&trace, &map, &cfg).log.is_empty());
    }

    #[test]
    fn pointer_follows_hand_while_five_is_held() {
        let map = GestureMap::default_for(Context::Mouse);
        let cfg = HmiConfig { context: Context::Mouse, ..HmiConfig::default() };
        let trace: Vec<Observation> = (0..30)
            .map(|i| {
                Observation::new(i, i as f64 * 33.0)
                    .with_label("Five", 0.95)
                    .with_centroid((100.0 + 5.0 * i as f64, 240.0))
            })
            .collect();
        let out = replay(&trace, &map, &cfg);
        assert_eq!(out.log.len(), 1);
        let committed_x = map_to_screen((100.0 + 5.0 * 4.0, 240.0), (640, 480), cfg.screen, true).0;
        // The pointer kept moving left on screen (mirrored) after the commit.
        assert!(out.state.mouse.cursor.0 < committed_x - 50.0);
    }

    #[test]
    fn trace_round_trip_and_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        let trace = burst_trace(&[("Ok", true), ("Two", false)], 5, 2, 40.0);
        write_trace(&path, &trace).unwrap();
        assert_eq!(load_trace(&path).unwrap(), trace);
        std::fs::write(&path, "{\"frame\":0}\nnot json\n").unwrap();
        let err = load_trace(&path).unwrap_err();
        assert!(err.to_string().contains(":2"), "{err}");
    }

    #[test]
    fn map_context_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.json");
        std::fs::write(&path, GestureMap::default_for(Context::Audio).to_json()).unwrap();
        let cfg = HmiConfig { map: Some(path), ..HmiConfig::default() };
        assert!(cfg.gesture_map().is_err());
    }
}
