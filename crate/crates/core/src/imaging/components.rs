use serde::{Deserialize, Serialize};

use super::BinaryMask;

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl BBox {
    pub fn point(row: usize, col: usize) -> Self {
        Self {
            top: row,
            left: col,
            bottom: row,
            right: col,
        }
    }

    pub fn include(&mut self, row: usize, col: usize) {
        self.top = self.top.min(row);
        self.bottom = self.bottom.max(row);
        self.left = self.left.min(col);
        self.right = self.right.max(col);
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..=self.bottom).contains(&row) && (self.left..=self.right).contains(&col)
    }

    pub fn width(&self) -> usize {
        self.right - self.left + 1
    }

    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }
}

/// One 8-connected foreground component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    /// Moore-neighborhood boundary trace, clockwise from the top-left pixel.
    pub pixels: Vec<(usize, usize)>,
    pub area: usize,
    pub bbox: BBox,
    /// Label value of this component in [`Components::labels`].
    pub label: u32,
}

/// Labelled components, largest first. Label 0 is background.
#[derive(Debug, Clone)]
pub struct Components {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub contours: Vec<Contour>,
}

impl Components {
    /// Foreground mask of a single component.
    pub fn mask_of(&self, contour: &Contour) -> BinaryMask {
        let bits: Vec<bool> = self.labels.iter().map(|&l| l == contour.label).collect();
        BinaryMask::from_bools(self.width, self.height, &bits)
    }
}

/// 8-connected components of the foreground, sorted by area (descending).
pub fn connected_components(mask: &BinaryMask) -> Vec<Contour> {
    label_components(mask).contours
}

// Clockwise from west: W, NW, N, NE, E, SE, S, SW.
const RING: [(isize, isize); 8] = [
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
];

/// Like [`connected_components`], also returning the label image.
pub fn label_components(mask: &BinaryMask) -> Components {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut contours = Vec::new();
    let mut stack = Vec::new();
    let data = mask.data();

    for start in 0..w * h {
        if data[start] == 0 || labels[start] != 0 {
            continue;
        }
        let label = contours.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);
        let mut area = 0usize;
        let mut bbox = BBox::point(start / w, start % w);
        while let Some(i) = stack.pop() {
            area += 1;
            let (r, c) = (i / w, i % w);
            bbox.include(r, c);
            let r0 = r.saturating_sub(1);
            let r1 = (r + 1).min(h - 1);
            let c0 = c.saturating_sub(1);
            let c1 = (c + 1).min(w - 1);
            for rr in r0..=r1 {
                for cc in c0..=c1 {
                    let j = rr * w + cc;
                    if data[j] != 0 && labels[j] == 0 {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        // Raster order guarantees `start` is the top-most, left-most pixel.
        let pixels = trace_boundary(data, w, h, (start / w, start % w));
        contours.push(Contour {
            pixels,
            area,
            bbox,
            label,
        });
    }
    contours.sort_by(|a, b| b.area.cmp(&a.area));
    Components {
        width: w,
        height: h,
        labels,
        contours,
    }
}

/// Moore-neighbor boundary tracing with Jacob's stopping criterion.
fn trace_boundary(data: &[u8], w: usize, h: usize, start: (usize, usize)) -> Vec<(usize, usize)> {
    let fg = |r: isize, c: isize| {
        r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w && data[r as usize * w + c as usize] != 0
    };
    let step = |p: (usize, usize), d: usize| (p.0 as isize + RING[d].0, p.1 as isize + RING[d].1);

    // Next boundary pixel clockwise around `p`, starting the scan just after
    // the backtrack direction `from`. Returns the pixel and the direction
    // pointing from it back to the last background pixel examined.
    let next = |p: (usize, usize), from: usize| -> Option<((usize, usize), usize)> {
        for k in 1..=8 {
            let d = (from + k) % 8;
            let (r, c) = step(p, d);
            if fg(r, c) {
                let q = (r as usize, c as usize);
                let prev = (from + k - 1) % 8;
                let (br, bc) = step(p, prev);
                // Direction from q to the background pixel b.
                let dir = RING
                    .iter()
                    .position(|&(dr, dc)| q.0 as isize + dr == br && q.1 as isize + dc == bc)
                    .unwrap_or((d + 4) % 8);
                return Some((q, dir));
            }
        }
        None
    };

    let mut pixels = vec![start];
    // West of the top-left pixel is always background.
    let Some((first, first_back)) = next(start, 0) else {
        return pixels;
    };
    let (mut p, mut back) = (first, first_back);
    let limit = 4 * w * h + 8;
    for _ in 0..limit {
        if p == start {
            // Stop once we'd leave the start the same way as the first time.
            match next(p, back) {
                Some((q, _)) if q == first => break,
                _ => {}
            }
        }
        pixels.push(p);
        match next(p, back) {
            Some((q, b)) => {
                p = q;
                back = b;
            }
            None => break,
        }
    }
    pixels
}
