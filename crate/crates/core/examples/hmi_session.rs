//! Replay classified gesture bursts through the media-player, audio, game
//! and virtual-mouse targets.
//!
//! `cargo run --example hmi_session`

use gesturekit::hmi::{burst_trace, run_session, Context, GestureMap, HmiConfig, Observation};
use gesturekit::tracking::TrackingConfig;

fn main() -> gesturekit::Result<()> {
    let scripts: [(Context, &[(&str, bool)]); 4] = [
        (Context::Vlc, &[("Ok", true), ("L", true), ("L", false), ("Hang", true), ("Five", true), ("Two", true), ("Close", true)]),
        (Context::Audio, &[("Ok", true), ("Two", true), ("Three", true), ("Five", true), ("Fist", true)]),
        (Context::Mario, &[("Ok", true), ("Thumb", true), ("Four", false), ("Five", true)]),
        (Context::Mouse, &[("Five", true), ("Index", true), ("Palm", true), ("Heavy", true), ("Two", true)]),
    ];
    for (ctx, trials) in scripts {
        let config = HmiConfig {
            context: ctx,
            ..HmiConfig::default()
        };
        let map = GestureMap::default_for(ctx);
        // The hand sweeps across the camera so pointer gestures move the cursor.
        let trace: Vec<Observation> = burst_trace(trials, 8, 3, 40.0)
            .into_iter()
            .map(|o| {
                let x = 100.0 + 4.0 * o.frame as f64;
                o.clone().with_centroid((x, 240.0))
            })
            .collect();
        let out = run_session(&trace, &map, &config, &TrackingConfig::default(), (640, 480))?;
        println!("== {ctx}");
        for e in &out.log {
            println!("{}", e.to_json_line());
        }
        match ctx {
            Context::Vlc => println!("final: {:?}", out.state.vlc),
            Context::Audio => println!("final: {:?}", out.state.audio),
            Context::Mario => println!("final: {:?}", out.state.mario),
            Context::Mouse => println!(
                "final cursor ({:.0}, {:.0}), scroll {}, {} button edges",
                out.state.mouse.cursor.0,
                out.state.mouse.cursor.1,
                out.state.mouse.scroll,
                out.state.mouse.buttons.len()
            ),
        }
        print!("{}", out.stats.to_table());
        println!();
    }
    Ok(())
}
