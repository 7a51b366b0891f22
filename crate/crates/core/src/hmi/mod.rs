//! Gesture-to-command dispatch against simulated target applications.

mod debounce;
mod gesture_map;
mod session;
mod targets;

pub use debounce::{debounce, DebounceConfig, Debouncer};
pub use gesture_map::{Action, Context, GestureMap};
pub use session::{
    burst_trace, load_trace, run_session, write_trace, ClockKind, HmiConfig, Observation, Session, SessionOutput,
};
pub use targets::{
    apply_action, dispatch, mouse_apply, ActionEvent, AudioState, Button, ButtonEdge, ButtonEvent, Clock,
    FrameClock, MarioState, MonotonicClock, MouseState, TargetState, VlcState, DEFAULT_SCREEN, VOLUME_STEP,
};
