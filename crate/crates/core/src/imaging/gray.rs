use super::Frame;

/// Luma conversion, `round(0.299 R + 0.587 G + 0.114 B)`. Grayscale input is
/// returned unchanged.
pub fn to_grayscale(frame: &Frame) -> Frame {
    if frame.channels() == 1 {
        return frame.clone();
    }
    let data = frame
        .data()
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round() as u8)
        .collect();
    Frame::gray(frame.width(), frame.height(), data).expect("dims preserved")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_and_red() {
        let f = Frame::rgb(2, 1, vec![255, 255, 255, 255, 0, 0]).unwrap();
        let g = to_grayscale(&f);
        assert_eq!(g.data(), &[255, 76]);
        assert_eq!(g.channels(), 1);
    }

    #[test]
    fn grayscale_is_identity() {
        let f = Frame::gray(3, 1, vec![1, 128, 254]).unwrap();
        assert_eq!(to_grayscale(&f), f);
    }

    #[test]
    fn hand_computed_values() {
        // 0.587*255 = 149.685, 0.114*255 = 29.07, 2.99 + 11.74 + 3.42 = 18.15
        let f = Frame::rgb(3, 1, vec![0, 255, 0, 0, 0, 255, 10, 20, 30]).unwrap();
        assert_eq!(to_grayscale(&f).data(), &[150, 29, 18]);
    }
}
