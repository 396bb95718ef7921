//! Debug overlay rendering: segments in per-segment colors, corners as
//! boxes, the ROI window, and the detected ellipse, written as binary PPM.

use crate::arcs::Corner;
use crate::edges::EdgeSegment;
use crate::ellipse::EllipseParams;
use crate::imaging::{GrayImage, Rect};

/// RGB raster, row major.
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

const PALETTE: [[u8; 3]; 12] = [
    [230, 60, 60],
    [60, 180, 75],
    [65, 105, 225],
    [255, 165, 0],
    [150, 60, 200],
    [0, 200, 200],
    [240, 50, 150],
    [170, 200, 40],
    [255, 220, 0],
    [100, 120, 255],
    [0, 150, 90],
    [220, 120, 60],
];

impl RgbImage {
    pub fn from_gray(img: &GrayImage) -> Self {
        let mut data = Vec::with_capacity(img.data().len() * 3);
        for &v in img.data() {
            data.extend_from_slice(&[v, v, v]);
        }
        RgbImage { width: img.width(), height: img.height(), data }
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = ((y * self.width + x) * 3) as usize;
            self.data[i..i + 3].copy_from_slice(&rgb);
        }
    }

    pub fn draw_segments(&mut self, segments: &[EdgeSegment]) {
        for (i, seg) in segments.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            for p in &seg.pixels {
                self.set(p.x, p.y, color);
            }
        }
    }

    pub fn draw_rect(&mut self, rect: Rect, rgb: [u8; 3]) {
        for x in rect.x..rect.right() {
            self.set(x, rect.y, rgb);
            self.set(x, rect.bottom().saturating_sub(1), rgb);
        }
        for y in rect.y..rect.bottom() {
            self.set(rect.x, y, rgb);
            self.set(rect.right().saturating_sub(1), y, rgb);
        }
    }

    pub fn draw_corner(&mut self, corner: &Corner, rgb: [u8; 3]) {
        let (cx, cy) = (corner.x as i64, corner.y as i64);
        for dy in -2..=2i64 {
            for dx in -2..=2i64 {
                if dx.abs() == 2 || dy.abs() == 2 {
                    let (x, y) = (cx + dx, cy + dy);
                    if x >= 0 && y >= 0 {
                        self.set(x as u32, y as u32, rgb);
                    }
                }
            }
        }
    }

    pub fn draw_ellipse(&mut self, e: &EllipseParams, rgb: [u8; 3]) {
        let steps = (e.perimeter() * 2.0).ceil().max(64.0) as usize;
        for k in 0..steps {
            let p = e.point_at(k as f64 * std::f64::consts::TAU / steps as f64);
            if p[0] >= 0.0 && p[1] >= 0.0 {
                self.set(p[0].round() as u32, p[1].round() as u32, rgb);
            }
        }
    }

    /// Encode as binary PPM ("P6"), maxval 255.
    pub fn to_ppm(&self) -> Vec<u8> {
        let header = format!("P6\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.data.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.data);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Point;

    #[test]
    fn overlay_encodes_valid_ppm() {
        let base = GrayImage::new(32, 16, 90);
        let mut img = RgbImage::from_gray(&base);
        img.draw_segments(&[EdgeSegment::new(vec![Point::new(1, 1), Point::new(2, 1)])]);
        img.draw_rect(Rect::new(0, 0, 10, 10), [0, 255, 0]);
        img.draw_ellipse(&EllipseParams::new(16.0, 8.0, 6.0, 4.0, 0.3), [255, 0, 0]);
        let ppm = img.to_ppm();
        assert!(ppm.starts_with(b"P6\n32 16\n255\n"));
        assert_eq!(ppm.len(), 13 + 32 * 16 * 3);
    }
}
