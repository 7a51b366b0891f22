use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which simulated application receives commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Context {
    Vlc,
    Audio,
    Mario,
    Mouse,
}

impl Context {
    pub const ALL: [Context; 4] = [Context::Vlc, Context::Audio, Context::Mario, Context::Mouse];

    pub fn as_str(self) -> &'static str {
        match self {
            Context::Vlc => "vlc",
            Context::Audio => "audio",
            Context::Mario => "mario",
            Context::Mouse => "mouse",
        }
    }

    /// Actions the context's target understands.
    pub fn actions(self) -> &'static [Action] {
        use Action::*;
        match self {
            Context::Vlc => &[Play, VolumeUp, VolumeDown, Quit, NextVideo, Pause],
            Context::Audio => &[Play, Pause, Resume, NextSong, PreviousSong],
            Context::Mario => &[Run, JumpRight, Hold, JumpLeft, Jump],
            Context::Mouse => &[RightClick, DoubleClick, LeftClick, PointerMove, ScrollUp, ScrollDown, Drag],
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Context {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vlc" => Ok(Context::Vlc),
            "audio" => Ok(Context::Audio),
            "mario" => Ok(Context::Mario),
            "mouse" => Ok(Context::Mouse),
            other => Err(Error::InvalidArgument(format!(
                "unknown context `{other}` (expected vlc, audio, mario or mouse)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Play,
    Pause,
    Resume,
    VolumeUp,
    VolumeDown,
    Quit,
    NextVideo,
    NextSong,
    PreviousSong,
    Run,
    JumpRight,
    JumpLeft,
    Jump,
    Hold,
    RightClick,
    DoubleClick,
    LeftClick,
    PointerMove,
    ScrollUp,
    ScrollDown,
    Drag,
    /// Emitted in place of an action that was illegal in the current state.
    Noop,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Play => "Play",
            Action::Pause => "Pause",
            Action::Resume => "Resume",
            Action::VolumeUp => "VolumeUp",
            Action::VolumeDown => "VolumeDown",
            Action::Quit => "Quit",
            Action::NextVideo => "NextVideo",
            Action::NextSong => "NextSong",
            Action::PreviousSong => "PreviousSong",
            Action::Run => "Run",
            Action::JumpRight => "JumpRight",
            Action::JumpLeft => "JumpLeft",
            Action::Jump => "Jump",
            Action::Hold => "Hold",
            Action::RightClick => "RightClick",
            Action::DoubleClick => "DoubleClick",
            Action::LeftClick => "LeftClick",
            Action::PointerMove => "PointerMove",
            Action::ScrollUp => "ScrollUp",
            Action::ScrollDown => "ScrollDown",
            Action::Drag => "Drag",
            Action::Noop => "noop",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gesture label -> action table for one context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureMap {
    pub context: Context,
    pub entries: BTreeMap<String, Action>,
}

impl GestureMap {
    /// Built-in tables: VLC, audio and Mario controls plus the virtual mouse.
    pub fn default_for(context: Context) -> Self {
        use Action::*;
        let pairs: &[(&str, Action)] = match context {
            Context::Vlc => &[
                ("Ok", Play),
                ("L", VolumeUp),
                ("Hang", VolumeDown),
                ("Close", Quit),
                ("Two", NextVideo),
                ("Five", Pause),
            ],
            Context::Audio => &[
                ("Ok", Play),
                ("Five", Pause),
                ("Fist", Resume),
                ("Two", NextSong),
                ("Three", PreviousSong),
            ],
            Context::Mario => &[
                ("Ok", Run),
                ("Five", JumpRight),
                ("Two", Hold),
                ("Four", JumpLeft),
                ("Thumb", Jump),
            ],
            Context::Mouse => &[
                ("Two", RightClick),
                ("Ok", DoubleClick),
                ("Index", LeftClick),
                ("Five", PointerMove),
                ("Heavy", ScrollUp),
                ("Hang", ScrollDown),
                ("Palm", Drag),
            ],
        };
        Self {
            context,
            entries: pairs.iter().map(|&(g, a)| (g.to_string(), a)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let allowed = self.context.actions();
        for (gesture, action) in &self.entries {
            if !allowed.contains(action) {
                return Err(Error::Config(format!(
                    "gesture `{gesture}` maps to {action}, which the {} target does not support",
                    self.context
                )));
            }
        }
        Ok(())
    }

    pub fn action_for(&self, gesture: &str) -> Option<Action> {
        self.entries.get(gesture).copied()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: Self = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        map.validate()?;
        Ok(map)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gesture map serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for ctx in Context::ALL {
            GestureMap::default_for(ctx).validate().unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let m = GestureMap::default_for(Context::Mouse);
        let back: GestureMap = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_foreign_action() {
        let mut m = GestureMap::default_for(Context::Vlc);
        m.entries.insert("Index".into(), Action::LeftClick);
        assert!(m.validate().is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = r#"{"context":"vlc","entries":{},"extra":1}"#;
        assert!(serde_json::from_str::<GestureMap>(text).is_err());
    }
}
