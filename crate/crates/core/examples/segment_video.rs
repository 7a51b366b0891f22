//! Segment synthetic camera frames: background subtraction, skin filter,
//! largest component, wrist cut and palm center.
//!
//! `cargo run --release --example segment_video -- [frames] [out_dir]`

use std::path::PathBuf;

use gesturekit::dataset::{SyntheticVideo, VideoSpec};
use gesturekit::imaging::pnm;
use gesturekit::segmentation::{extract_input, Segmenter, SegmentationConfig};

fn main() -> gesturekit::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let frames = args.first().map_or(Ok(10), |s| s.parse()).expect("frames");
    let out = args.get(1).map(PathBuf::from);

    let video = SyntheticVideo::new(VideoSpec {
        frames,
        ..VideoSpec::default()
    })?;
    let config = SegmentationConfig::default();
    let segmenter = Segmenter::new(video.background(), config.clone())?;
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir).map_err(|e| gesturekit::Error::io(dir, e))?;
    }
    for i in 0..video.len() {
        let (frame, truth) = video.frame(i);
        match segmenter.process(&frame)? {
            Some(region) => {
                let err = (region.centroid.0 - truth.centroid.0).hypot(region.centroid.1 - truth.centroid.1);
                println!(
                    "frame {i:>3}  {:<6}  area {:>5}  palm {:?} r {:>2}  centroid ({:.1}, {:.1})  error {err:.1} px",
                    truth.gesture.name(),
                    region.contour.area,
                    region.palm_center,
                    region.palm_radius,
                    region.centroid.0,
                    region.centroid.1,
                );
                if let Some(dir) = &out {
                    pnm::write_mask(dir.join(format!("{i:04}.pgm")), &extract_input(&region, config.input_side)?)?;
                }
            }
            None => println!("frame {i:>3}  no hand"),
        }
    }
    Ok(())
}
