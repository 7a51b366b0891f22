use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::gesture_map::{Action, Context, GestureMap};

/// Source of timestamps for action events.
pub trait Clock {
    /// Milliseconds since an arbitrary fixed origin; never decreases.
    fn now_ms(&self) -> f64;

    /// Tell the clock which frame time is being processed. Wall clocks ignore it.
    fn set_frame_time(&mut self, _t_ms: f64) {}
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for MonotonicClock {
    fn now_ms(&self) -> f64 {
        self.origin.elapsed().as_secs_f64() * 1e3
    }
}

/// Reports the current frame's timestamp, so response times are zero and
/// logs are reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrameClock {
    t_ms: f64,
}

impl Clock for FrameClock {
    fn now_ms(&self) -> f64 {
        self.t_ms
    }

    fn set_frame_time(&mut self, t_ms: f64) {
        self.t_ms = self.t_ms.max(t_ms);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub context: Context,
    pub action: Action,
    pub gesture: String,
    pub frame_index: usize,
    pub detect_t_ms: f64,
    pub apply_t_ms: f64,
    pub response_ms: f64,
    /// Set when the mapped action was illegal and replaced by `Noop`.
    pub warning: bool,
}

impl ActionEvent {
    /// One line of the action log.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "ctx": self.context,
            "gesture": self.gesture,
            "action": self.action.as_str(),
            "frame": self.frame_index,
            "response_ms": self.response_ms,
            "warning": self.warning,
        })
        .to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VlcState {
    pub playing: bool,
    pub paused: bool,
    pub volume: u8,
    pub track: usize,
    pub quit: bool,
}

impl Default for VlcState {
    fn default() -> Self {
        Self {
            playing: false,
            paused: false,
            volume: 50,
            track: 0,
            quit: false,
        }
    }
}

pub const VOLUME_STEP: u8 = 10;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioState {
    pub playing: bool,
    pub paused: bool,
    pub track: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarioState {
    /// Last control sent to the game.
    pub register: Option<Action>,
    pub presses: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Button {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ButtonEdge {
    Press,
    Release,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ButtonEvent {
    pub button: Button,
    pub edge: ButtonEdge,
    pub at: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MouseState {
    pub screen: (usize, usize),
    pub cursor: (f64, f64),
    pub pressed: BTreeSet<Button>,
    /// Scroll position in notches; up is positive.
    pub scroll: i64,
    pub drag_anchor: Option<(f64, f64)>,
    pub buttons: Vec<ButtonEvent>,
}

impl MouseState {
    pub fn new(screen: (usize, usize)) -> Self {
        Self {
            screen,
            cursor: ((screen.0 / 2) as f64, (screen.1 / 2) as f64),
            pressed: BTreeSet::new(),
            scroll: 0,
            drag_anchor: None,
            buttons: Vec::new(),
        }
    }

    fn press(&mut self, button: Button) {
        self.pressed.insert(button);
        self.buttons.push(ButtonEvent {
            button,
            edge: ButtonEdge::Press,
            at: self.cursor,
        });
    }

    fn release(&mut self, button: Button) {
        self.pressed.remove(&button);
        self.buttons.push(ButtonEvent {
            button,
            edge: ButtonEdge::Release,
            at: self.cursor,
        });
    }

    fn click(&mut self, button: Button) {
        self.press(button);
        self.release(button);
    }

    /// Move the pointer, clamped to the screen.
    pub fn move_to(&mut self, p: (f64, f64)) {
        let max_x = self.screen.0.saturating_sub(1) as f64;
        let max_y = self.screen.1.saturating_sub(1) as f64;
        self.cursor = (p.0.clamp(0.0, max_x), p.1.clamp(0.0, max_y));
    }

    pub fn end_drag(&mut self) {
        if self.drag_anchor.take().is_some() {
            self.release(Button::Left);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub vlc: VlcState,
    pub audio: AudioState,
    pub mario: MarioState,
    pub mouse: MouseState,
}

pub const DEFAULT_SCREEN: (usize, usize) = (1920, 1080);

impl Default for TargetState {
    fn default() -> Self {
        Self::new(DEFAULT_SCREEN)
    }
}

impl TargetState {
    pub fn new(screen: (usize, usize)) -> Self {
        Self {
            vlc: VlcState::default(),
            audio: AudioState::default(),
            mario: MarioState::default(),
            mouse: MouseState::new(screen),
        }
    }
}

/// Apply one mouse action. `cursor` is the smoothed screen position, used by
/// pointer movement and as the drag anchor. Returns false when the action had
/// no legal effect.
pub fn mouse_apply(action: Action, mouse: &mut MouseState, cursor: Option<(f64, f64)>) -> bool {
    if action != Action::Drag {
        mouse.end_drag();
    }
    match action {
        Action::PointerMove => match cursor {
            Some(p) => {
                mouse.move_to(p);
                true
            }
            None => false,
        },
        Action::LeftClick => {
            mouse.click(Button::Left);
            true
        }
        Action::RightClick => {
            mouse.click(Button::Right);
            true
        }
        Action::DoubleClick => {
            mouse.click(Button::Left);
            mouse.click(Button::Left);
            true
        }
        Action::ScrollUp => {
            mouse.scroll += 1;
            true
        }
        Action::ScrollDown => {
            mouse.scroll -= 1;
            true
        }
        Action::Drag => {
            if mouse.drag_anchor.is_some() {
                return false;
            }
            if let Some(p) = cursor {
                mouse.move_to(p);
            }
            mouse.drag_anchor = Some(mouse.cursor);
            mouse.press(Button::Left);
            true
        }
        _ => false,
    }
}

fn vlc_apply(action: Action, s: &mut VlcState) -> bool {
    if s.quit {
        return false;
    }
    match action {
        Action::Play => {
            s.playing = true;
            s.paused = false;
        }
        Action::Pause if s.playing && !s.paused => s.paused = true,
        Action::VolumeUp => s.volume = s.volume.saturating_add(VOLUME_STEP).min(100),
        Action::VolumeDown => s.volume = s.volume.saturating_sub(VOLUME_STEP),
        Action::NextVideo => s.track += 1,
        Action::Quit => {
            s.quit = true;
            s.playing = false;
            s.paused = false;
        }
        _ => return false,
    }
    true
}

fn audio_apply(action: Action, s: &mut AudioState) -> bool {
    match action {
        Action::Play => {
            s.playing = true;
            s.paused = false;
        }
        Action::Pause if s.playing && !s.paused => s.paused = true,
        Action::Resume if s.paused => s.paused = false,
        Action::NextSong => s.track += 1,
        Action::PreviousSong if s.track > 0 => s.track -= 1,
        _ => return false,
    }
    true
}

fn mario_apply(action: Action, s: &mut MarioState) -> bool {
    match action {
        Action::Run | Action::JumpRight | Action::Hold | Action::JumpLeft | Action::Jump => {
            s.register = Some(action);
            s.presses += 1;
            true
        }
        _ => false,
    }
}

/// Run `action` against the context's target. Returns false when the
/// transition is illegal; the state is then unchanged.
pub fn apply_action(context: Context, action: Action, state: &mut TargetState, cursor: Option<(f64, f64)>) -> bool {
    match context {
        Context::Vlc => vlc_apply(action, &mut state.vlc),
        Context::Audio => audio_apply(action, &mut state.audio),
        Context::Mario => mario_apply(action, &mut state.mario),
        Context::Mouse => {
            // A rejected action must not end a drag as a side effect.
            let mut next = state.mouse.clone();
            let ok = mouse_apply(action, &mut next, cursor);
            if ok {
                state.mouse = next;
            }
            ok
        }
    }
}

/// Dispatch a committed gesture label. Unmapped labels produce no event;
/// illegal transitions produce a `Noop` event with the warning flag set.
pub fn dispatch(
    label: &str,
    map: &GestureMap,
    state: &mut TargetState,
    frame_index: usize,
    cursor: Option<(f64, f64)>,
    clock: &dyn Clock,
) -> Option<ActionEvent> {
    let action = map.action_for(label)?;
    let detect_t_ms = clock.now_ms();
    let legal = apply_action(map.context, action, state, cursor);
    let apply_t_ms = clock.now_ms().max(detect_t_ms);
    Some(ActionEvent {
        context: map.context,
        action: if legal { action } else { Action::Noop },
        gesture: label.to_string(),
        frame_index,
        detect_t_ms,
        apply_t_ms,
        response_ms: apply_t_ms - detect_t_ms,
        warning: !legal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(ctx: Context, labels: &[&str]) -> (TargetState, Vec<ActionEvent>) {
        let map = GestureMap::default_for(ctx);
        let mut state = TargetState::default();
        let clock = FrameClock::default();
        let events = labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| dispatch(l, &map, &mut state, i, Some((10.0, 20.0)), &clock))
            .collect();
        (state, events)
    }

    #[test]
    fn table_lookups() {
        assert_eq!(run(Context::Vlc, &["Ok"]).1[0].action, Action::Play);
        let (s, e) = run(Context::Audio, &["Two", "Three"]);
        assert_eq!(e[1].action, Action::PreviousSong);
        assert_eq!(s.audio.track, 0);
        assert_eq!(run(Context::Mouse, &["Two"]).1[0].action, Action::RightClick);
    }

    #[test]
    fn unmapped_gesture_is_ignored() {
        let (s, e) = run(Context::Vlc, &["Fist"]);
        assert!(e.is_empty());
        assert_eq!(s, TargetState::default());
    }

    #[test]
    fn illegal_transitions_become_noop() {
        let (s, e) = run(Context::Vlc, &["Close", "Close", "Ok"]);
        assert!(s.vlc.quit);
        assert_eq!(e[1].action, Action::Noop);
        assert!(e[1].warning && e[2].warning);
        let (_, e) = run(Context::Audio, &["Three", "Fist", "Five"]);
        assert!(e.iter().all(|e| e.action == Action::Noop));
    }

    #[test]
    fn audio_pause_resume() {
        let (s, e) = run(Context::Audio, &["Ok", "Five", "Fist", "Two"]);
        assert!(e.iter().all(|e| !e.warning));
        assert!(s.audio.playing && !s.audio.paused);
        assert_eq!(s.audio.track, 1);
    }

    #[test]
    fn mario_register() {
        let (s, _) = run(Context::Mario, &["Ok", "Thumb"]);
        assert_eq!(s.mario.register, Some(Action::Jump));
        assert_eq!(s.mario.presses, 2);
    }

    #[test]
    fn mouse_actions() {
        let mut m = MouseState::new(DEFAULT_SCREEN);
        assert!(mouse_apply(Action::PointerMove, &mut m, Some((10.0, 20.0))));
        assert_eq!(m.cursor, (10.0, 20.0));
        mouse_apply(Action::ScrollUp, &mut m, None);
        assert_eq!(m.scroll, 1);
        mouse_apply(Action::LeftClick, &mut m, None);
        assert_eq!(m.buttons.len(), 2);
        assert_eq!(m.buttons[0].edge, ButtonEdge::Press);
        assert_eq!(m.buttons[1].edge, ButtonEdge::Release);
        assert!(m.pressed.is_empty());
    }

    #[test]
    fn drag_holds_until_next_non_palm_commit() {
        let (s, _) = run(Context::Mouse, &["Palm"]);
        assert_eq!(s.mouse.drag_anchor, Some((10.0, 20.0)));
        assert!(s.mouse.pressed.contains(&Button::Left));
        let (s, e) = run(Context::Mouse, &["Palm", "Palm", "Heavy"]);
        assert!(e[1].warning);
        assert!(s.mouse.drag_anchor.is_none() && s.mouse.pressed.is_empty());
        assert_eq!(s.mouse.scroll, 1);
    }

    #[test]
    fn cursor_is_clamped() {
        let mut m = MouseState::new((100, 50));
        mouse_apply(Action::PointerMove, &mut m, Some((500.0, -3.0)));
        assert_eq!(m.cursor, (99.0, 0.0));
    }

    const VLC: [&str; 7] = ["Ok", "L", "Hang", "Close", "Two", "Five", "Fist"];
    const MOUSE: [&str; 8] = ["Two", "Ok", "Index", "Five", "Heavy", "Hang", "Palm", "Fist"];

    proptest! {
        #[test]
        fn volume_stays_in_range(ups in prop::collection::vec(any::<bool>(), 0..200)) {
            let labels: Vec<&str> = ups.iter().map(|&u| if u { "L" } else { "Hang" }).collect();
            let (s, _) = run(Context::Vlc, &labels);
            prop_assert!(s.vlc.volume <= 100);
        }

        #[test]
        fn replay_is_deterministic(idx in prop::collection::vec(0usize..7, 0..50)) {
            let labels: Vec<&str> = idx.iter().map(|&i| VLC[i]).collect();
            prop_assert_eq!(run(Context::Vlc, &labels), run(Context::Vlc, &labels));
        }

        #[test]
        fn every_release_follows_its_press(idx in prop::collection::vec(0usize..8, 0..80)) {
            let labels: Vec<&str> = idx.iter().map(|&i| MOUSE[i]).collect();
            let (s, _) = run(Context::Mouse, &labels);
            let mut down = BTreeSet::new();
            for b in &s.mouse.buttons {
                match b.edge {
                    ButtonEdge::Press => prop_assert!(down.insert(b.button)),
                    ButtonEdge::Release => prop_assert!(down.remove(&b.button)),
                }
            }
            prop_assert_eq!(down, s.mouse.pressed.clone());
        }
    }
}
