//! Smooth a noisy hand track with the constant-velocity Kalman filter and
//! map it to screen coordinates.
//!
//! `cargo run --example kalman_cursor -- [sigma] [seed]`

use gesturekit::tracking::{
    map_to_screen, rms_error, simulate_constant_velocity, smoothness_report, track_sequence, TrackingConfig,
};

fn main() -> gesturekit::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let sigma: f64 = args.first().map_or(Ok(8.0), |s| s.parse()).expect("sigma");
    let seed: u64 = args.get(1).map_or(Ok(0), |s| s.parse()).expect("seed");

    let sim = simulate_constant_velocity(seed, 200, sigma);
    // Drop every 25th measurement to show coasting.
    let meas: Vec<_> = sim
        .measurements
        .iter()
        .enumerate()
        .map(|(i, &m)| (i % 25 != 24).then_some(m))
        .collect();
    let config = TrackingConfig::default();
    let out = track_sequence(&meas, &config)?;
    let filtered: Vec<(f64, f64)> = out.iter().map(|o| o.state.position()).collect();

    println!("raw rms error      {:.3} px", rms_error(&sim.measurements, &sim.truth));
    println!("filtered rms error {:.3} px", rms_error(&filtered, &sim.truth));
    let s = smoothness_report(&sim.measurements, &filtered)?;
    println!("max jump raw {:.2} px, filtered {:.2} px", s.raw.max_jump, s.smoothed.max_jump);
    println!("rms jitter raw {:.2} px, filtered {:.2} px", s.raw.rms_jitter, s.smoothed.rms_jitter);
    println!("coasted frames: {}", out.iter().filter(|o| o.coasting).count());
    for (i, o) in out.iter().enumerate().step_by(40) {
        let screen = map_to_screen(o.state.position(), (640, 480), (1920, 1080), true);
        println!("frame {i:>3}  camera ({:.1}, {:.1})  screen ({:.0}, {:.0})", filtered[i].0, filtered[i].1, screen.0, screen.1);
    }
    Ok(())
}
