//! Minimal raster plots: scatter, polylines and heatmaps on a framed canvas.

use std::path::Path;

use anyhow::Result;
use image::{Rgb, RgbImage};

pub const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
pub const GRAY: Rgb<u8> = Rgb([170, 170, 170]);
pub const CYAN: Rgb<u8> = Rgb([0, 170, 200]);
pub const RED: Rgb<u8> = Rgb([210, 40, 40]);
pub const BLUE: Rgb<u8> = Rgb([40, 80, 220]);
pub const GREEN: Rgb<u8> = Rgb([30, 160, 60]);

const MARGIN: u32 = 24;

pub struct Plot {
    img: RgbImage,
    x: (f64, f64),
    y: (f64, f64),
}

impl Plot {
    pub fn new(width: u32, height: u32, x: (f64, f64), y: (f64, f64)) -> Self {
        let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
        let (x1, y1) = (width - MARGIN, height - MARGIN);
        for px in MARGIN..=x1 {
            img.put_pixel(px, MARGIN, BLACK);
            img.put_pixel(px, y1, BLACK);
        }
        for py in MARGIN..=y1 {
            img.put_pixel(MARGIN, py, BLACK);
            img.put_pixel(x1, py, BLACK);
        }
        let pad = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Self {
            img,
            x: pad(x),
            y: pad(y),
        }
    }

    /// Canvas with ranges fitted to the finite points given.
    pub fn fitted(width: u32, height: u32, pts: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for (a, b) in pts.filter(|(a, b)| a.is_finite() && b.is_finite()) {
            x = (x.0.min(a), x.1.max(a));
            y = (y.0.min(b), y.1.max(b));
        }
        if !x.0.is_finite() {
            (x, y) = ((0.0, 1.0), (0.0, 1.0));
        }
        Self::new(width, height, x, y)
    }

    fn inner(&self) -> (f64, f64) {
        ((self.img.width() - 2 * MARGIN - 2) as f64, (self.img.height() - 2 * MARGIN - 2) as f64)
    }

    fn to_px(&self, x: f64, y: f64) -> Option<(i64, i64)> {
        if !x.is_finite() || !y.is_finite() {
            return None;
        }
        let (w, h) = self.inner();
        let fx = (x - self.x.0) / (self.x.1 - self.x.0);
        let fy = (y - self.y.0) / (self.y.1 - self.y.0);
        if !(-1.0..=2.0).contains(&fx) || !(-1.0..=2.0).contains(&fy) {
            return None;
        }
        Some(((MARGIN + 1) as i64 + (fx * w).round() as i64, (MARGIN + 1) as i64 + ((1.0 - fy) * h).round() as i64))
    }

    fn put(&mut self, px: i64, py: i64, c: Rgb<u8>) {
        let lo = (MARGIN + 1) as i64;
        if px >= lo && py >= lo && px < (self.img.width() - MARGIN) as i64 && py < (self.img.height() - MARGIN) as i64 {
            self.img.put_pixel(px as u32, py as u32, c);
        }
    }

    pub fn dot(&mut self, x: f64, y: f64, c: Rgb<u8>) {
        if let Some((px, py)) = self.to_px(x, y) {
            self.put(px, py, c);
        }
    }

    pub fn big_dot(&mut self, x: f64, y: f64, c: Rgb<u8>) {
        if let Some((px, py)) = self.to_px(x, y) {
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1), (-1, 0), (0, -1)] {
                self.put(px + dx, py + dy, c);
            }
        }
    }

    fn segment(&mut self, a: (i64, i64), b: (i64, i64), c: Rgb<u8>) {
        let (dx, dy) = ((b.0 - a.0).abs(), -(b.1 - a.1).abs());
        let (sx, sy) = (if a.0 < b.0 { 1 } else { -1 }, if a.1 < b.1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (a.0, a.1, dx + dy);
        loop {
            self.put(x, y, c);
            if (x, y) == b {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    /// Joins consecutive points; non-finite points break the line.
    pub fn line(&mut self, pts: impl IntoIterator<Item = (f64, f64)>, c: Rgb<u8>) {
        let mut last = None;
        for (x, y) in pts {
            let here = self.to_px(x, y);
            if let (Some(a), Some(b)) = (last, here) {
                self.segment(a, b, c);
            }
            last = here;
        }
    }

    pub fn vline(&mut self, x: f64, c: Rgb<u8>) {
        let (y0, y1) = self.y;
        if let (Some(a), Some(b)) = (self.to_px(x, y0), self.to_px(x, y1)) {
            for py in b.1.min(a.1)..=a.1.max(b.1) {
                if py % 6 < 3 {
                    self.put(a.0, py, c);
                }
            }
        }
    }

    /// Fills the plot area with `value(fx, fy)` for fractional coordinates.
    pub fn fill(&mut self, value: impl Fn(f64, f64) -> Rgb<u8>) {
        let (w, h) = self.inner();
        for py in 0..=h as u32 {
            for px in 0..=w as u32 {
                let c = value(px as f64 / w, 1.0 - py as f64 / h);
                self.put((MARGIN + 1 + px) as i64, (MARGIN + 1 + py) as i64, c);
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.img.save(path)?;
        Ok(())
    }
}

fn mix(a: [f64; 3], b: [f64; 3], f: f64) -> Rgb<u8> {
    let c = |i: usize| (a[i] + (b[i] - a[i]) * f).round().clamp(0.0, 255.0) as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Blue (negative) through white to red (positive), clipped at `±clip`.
pub fn diverging(v: f64, clip: f64) -> Rgb<u8> {
    if !v.is_finite() {
        return GRAY;
    }
    let f = (v / clip).clamp(-1.0, 1.0);
    if f < 0.0 {
        mix([245.0, 245.0, 245.0], [30.0, 60.0, 200.0], -f)
    } else {
        mix([245.0, 245.0, 245.0], [200.0, 30.0, 30.0], f)
    }
}

/// Dark purple through teal to yellow for `v ∈ [0, 1]`.
pub fn sequential(v: f64) -> Rgb<u8> {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let f = v.clamp(0.0, 1.0) * 4.0;
    let i = (f.floor() as usize).min(3);
    mix(STOPS[i], STOPS[i + 1], f - i as f64)
}

/// Density colours with exact zeros left white.
pub fn density(v: f64) -> Rgb<u8> {
    if v <= 0.0 {
        Rgb([255, 255, 255])
    } else {
        sequential(v.sqrt())
    }
}
