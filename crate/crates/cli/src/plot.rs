//! A bare scatter plot rendered straight to PNG; the plotted numbers are
//! always also written to CSV.

use std::path::Path;

use image::{Rgb, RgbImage};

const SIZE: (u32, u32) = (480, 360);
const MARGIN: u32 = 30;

/// Points `(x, y, group)`; each group gets its own colour.
pub fn scatter(path: &Path, points: &[(f64, f64, usize)]) -> std::io::Result<()> {
    let (w, h) = SIZE;
    let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    let axis = Rgb([0, 0, 0]);
    for x in MARGIN..w - MARGIN / 2 {
        img.put_pixel(x, h - MARGIN, axis);
    }
    for y in MARGIN / 2..h - MARGIN {
        img.put_pixel(MARGIN, y, axis);
    }
    let finite: Vec<_> = points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    if !finite.is_empty() {
        let span = |f: fn(&&(f64, f64, usize)) -> f64| {
            let lo = finite.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = finite.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) }
        };
        let (x0, x1) = span(|p| p.0);
        let (y0, y1) = span(|p| p.1);
        let plot_w = (w - MARGIN - MARGIN / 2 - 10) as f64;
        let plot_h = (h - MARGIN - MARGIN / 2 - 10) as f64;
        const COLOURS: [[u8; 3]; 6] = [[31, 119, 180], [214, 39, 40], [44, 160, 44], [148, 103, 189], [255, 127, 14], [23, 190, 207]];
        for p in finite {
            let px = MARGIN as f64 + 5.0 + (p.0 - x0) / (x1 - x0) * plot_w;
            let py = (h - MARGIN) as f64 - 5.0 - (p.1 - y0) / (y1 - y0) * plot_h;
            let c = Rgb(COLOURS[p.2 % COLOURS.len()]);
            for dy in -3i32..=3 {
                for dx in -3i32..=3 {
                    if dx * dx + dy * dy <= 9 {
                        let (x, y) = (px as i32 + dx, py as i32 + dy);
                        if x >= 0 && y >= 0 && (x as u32) < w && (y as u32) < h {
                            img.put_pixel(x as u32, y as u32, c);
                        }
                    }
                }
            }
        }
    }
    img.save_with_format(path, image::ImageFormat::Png).map_err(std::io::Error::other)
}
