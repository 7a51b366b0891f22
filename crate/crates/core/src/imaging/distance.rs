use super::BinaryMask;

/// City-block distance from every pixel to the nearest background pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMap {
    pub width: usize,
    pub height: usize,
    pub dist: Vec<u32>,
}

impl DistanceMap {
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.dist[row * self.width + col]
    }

    pub fn max(&self) -> u32 {
        self.dist.iter().copied().max().unwrap_or(0)
    }

    /// Position of the largest value; ties resolve to the smallest row, then
    /// the smallest column.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0usize, 0u32);
        for (i, &d) in self.dist.iter().enumerate() {
            if d > best.1 {
                best = (i, d);
            }
        }
        (best.0 / self.width, best.0 % self.width)
    }

    /// Rows of the map, handy for printing.
    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.dist.chunks(self.width)
    }
}

/// Two-pass city-block chamfer transform. Off-image pixels count as
/// background, so an all-foreground mask measures to the image border.
pub fn distance_transform(mask: &BinaryMask) -> DistanceMap {
    let (w, h) = mask.dims();
    let mut d = vec![0u32; w * h];
    let data = mask.data();

    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if data[i] == 0 {
                continue;
            }
            let up = if r > 0 { d[i - w] } else { 0 };
            let left = if c > 0 { d[i - 1] } else { 0 };
            d[i] = up.min(left) + 1;
        }
    }
    for r in (0..h).rev() {
        for c in (0..w).rev() {
            let i = r * w + c;
            if data[i] == 0 {
                continue;
            }
            let down = if r + 1 < h { d[i + w] } else { 0 };
            let right = if c + 1 < w { d[i + 1] } else { 0 };
            d[i] = d[i].min(down.min(right) + 1);
        }
    }
    DistanceMap {
        width: w,
        height: h,
        dist: d,
    }
}
