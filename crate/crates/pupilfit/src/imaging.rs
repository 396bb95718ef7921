//! Image raster, PGM I/O, Gaussian smoothing, gradients, and integral images.
//!
//! Everything downstream consumes these types: `GrayImage` is the 8-bit
//! raster, `GradientField` holds Sobel derivatives with quantized directions,
//! and `IntegralImage` backs the constant-time box sums of the ROI search.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Direction symbol stored for pixels with zero gradient. Flat pixels carry
/// no orientation and are excluded from direction histograms.
pub const FLAT_DIR: u8 = u8::MAX;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Integer pixel coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        dx.hypot(dy)
    }

    /// Chebyshev distance 1 or less, excluding identity.
    pub fn adjacent8(self, other: Point) -> bool {
        let dx = (self.x as i64 - other.x as i64).abs();
        let dy = (self.y as i64 - other.y as i64).abs();
        dx <= 1 && dy <= 1 && (dx, dy) != (0, 0)
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn contains_point(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    /// Grow by `factor` on each side and clamp to `width` x `height`.
    pub fn expanded(&self, factor: f64, width: u32, height: u32) -> Rect {
        let mx = (self.w as f64 * factor * 0.5).round() as i64;
        let my = (self.h as f64 * factor * 0.5).round() as i64;
        let x0 = (self.x as i64 - mx).max(0) as u32;
        let y0 = (self.y as i64 - my).max(0) as u32;
        let x1 = ((self.right() as i64 + mx) as u32).min(width);
        let y1 = ((self.bottom() as i64 + my) as u32).min(height);
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }
}

/// 8-bit grayscale raster, row major: pixel (x, y) at `data[y * width + x]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, fill: u8) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be at least 1x1");
        Self { width, height, data: vec![fill; (width * height) as usize] }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        if width < 1 || height < 1 {
            return Err(ImageError::InvalidArgument("dimensions must be at least 1x1".into()));
        }
        if data.len() != (width as usize) * (height as usize) {
            return Err(ImageError::InvalidArgument(format!(
                "data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut img = GrayImage::new(width, height, 0);
        for y in 0..height {
            for x in 0..width {
                img.set(x, y, f(x, y));
            }
        }
        img
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.data[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        debug_assert!(x < self.width && y < self.height);
        self.data[(y * self.width + x) as usize] = v;
    }

    pub fn crop(&self, rect: Rect) -> Result<GrayImage, ImageError> {
        if rect.w < 1 || rect.h < 1 || rect.right() > self.width || rect.bottom() > self.height {
            return Err(ImageError::InvalidArgument(format!("crop rect {rect:?} out of bounds")));
        }
        let mut out = Vec::with_capacity((rect.w * rect.h) as usize);
        for y in rect.y..rect.bottom() {
            let row = (y * self.width) as usize;
            out.extend_from_slice(&self.data[row + rect.x as usize..row + rect.right() as usize]);
        }
        Ok(GrayImage { width: rect.w, height: rect.h, data: out })
    }
}

/// Decode a binary PGM ("P5") with maxval up to 255. Header comments
/// (`#` to end of line) are skipped.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let mut pos = 0usize;

    fn skip_space(bytes: &[u8], pos: &mut usize) {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], ImageError> {
        skip_space(bytes, pos);
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
            *pos += 1;
        }
        if start == *pos {
            return Err(ImageError::Parse("unexpected end of header".into()));
        }
        Ok(&bytes[start..*pos])
    }

    fn number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32, ImageError> {
        let tok = token(bytes, pos)?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| ImageError::Parse(format!("bad {what} field")))
    }

    let magic = token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(ImageError::Parse(format!(
            "unsupported magic {:?}, expected P5",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = number(bytes, &mut pos, "width")?;
    let height = number(bytes, &mut pos, "height")?;
    let maxval = number(bytes, &mut pos, "maxval")?;
    if width < 1 || height < 1 {
        return Err(ImageError::Parse("dimensions must be at least 1x1".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(ImageError::Parse(format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(ImageError::Parse("missing separator after maxval".into()));
    }
    pos += 1;
    let expected = (width as usize) * (height as usize);
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(ImageError::Parse(format!(
            "truncated payload: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    GrayImage::from_vec(width, height, payload[..expected].to_vec())
}

/// Encode as binary PGM ("P5"), maxval 255.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.data());
    out
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian smoothing with kernel radius `ceil(3 sigma)` and
/// replicated borders. Output stays in the 8-bit raster domain (rounded to
/// nearest), so constant images are preserved exactly.
pub fn gaussian_smooth(img: &GrayImage, sigma: f64) -> Result<GrayImage, ImageError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ImageError::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.data();

    // Horizontal pass: clamped borders, straight slice window inside.
    let mut tmp = vec![0.0f64; w * h];
    for y in 0..h {
        let src = &data[y * w..(y + 1) * w];
        let dst = &mut tmp[y * w..(y + 1) * w];
        let interior = |x: usize| -> f64 {
            let win = &src[x - radius..=x + radius];
            kernel.iter().zip(win).map(|(&k, &v)| k * v as f64).sum()
        };
        let clamped = |x: usize| -> f64 {
            kernel
                .iter()
                .enumerate()
                .map(|(i, &k)| {
                    let sx = (x + i).saturating_sub(radius).min(w - 1);
                    k * src[sx] as f64
                })
                .sum()
        };
        if w > 2 * radius {
            for x in 0..radius {
                dst[x] = clamped(x);
            }
            for (x, d) in dst.iter_mut().enumerate().take(w - radius).skip(radius) {
                *d = interior(x);
            }
            for x in w - radius..w {
                dst[x] = clamped(x);
            }
        } else {
            for x in 0..w {
                dst[x] = clamped(x);
            }
        }
    }

    // Vertical pass: accumulate a full row per kernel tap.
    let mut out = GrayImage::new(img.width(), img.height(), 0);
    let mut acc = vec![0.0f64; w];
    for y in 0..h {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for (i, &k) in kernel.iter().enumerate() {
            let sy = (y + i).saturating_sub(radius).min(h - 1);
            let row = &tmp[sy * w..(sy + 1) * w];
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += k * v;
            }
        }
        for (x, &v) in acc.iter().enumerate() {
            out.set(x as u32, y as u32, v.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(out)
}

/// Per-pixel derivatives with magnitude and quantized direction planes.
/// All planes share the source image dimensions.
#[derive(Debug, Clone)]
pub struct GradientField {
    width: u32,
    height: u32,
    /// Signed horizontal Sobel derivative.
    pub gx: Vec<f64>,
    /// Signed vertical Sobel derivative.
    pub gy: Vec<f64>,
    /// Euclidean gradient magnitude, range 0..=sqrt(2)*1020.
    pub mag: Vec<f64>,
    /// Quantized direction symbol 0..=7, or [`FLAT_DIR`] for zero gradient.
    pub dir8: Vec<u8>,
}

impl GradientField {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        (self.width * self.height) as usize
    }

    #[inline]
    pub fn idx(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y * self.width + x) as usize
    }
}

/// Quantize a gradient into one of 8 direction symbols.
///
/// The angle `atan(gy/gx)` lives in [-90, +90] degrees; that range is cut
/// into 22.5 degree half-open cells, with +90 mapped into the last cell.
/// Comparing the ratio against the cell boundary tangents gives the same
/// cells without the arctangent (this runs per pixel). A zero gradient has
/// no direction and yields `None` (the flat marker).
pub fn quantize_direction(gx: f64, gy: f64) -> Option<u8> {
    // tan of -67.5, -45, -22.5, 0, 22.5, 45, 67.5 degrees.
    const BOUNDS: [f64; 7] = [
        -2.414_213_562_373_095,
        -1.0,
        -0.414_213_562_373_095_06,
        0.0,
        0.414_213_562_373_095_06,
        1.0,
        2.414_213_562_373_095,
    ];
    if gx == 0.0 && gy == 0.0 {
        return None;
    }
    if gx == 0.0 {
        return Some(if gy > 0.0 { 7 } else { 0 });
    }
    let r = gy / gx;
    let mut bin = 0u8;
    for &t in &BOUNDS {
        if r >= t {
            bin += 1;
        }
    }
    Some(bin)
}

/// 3x3 Sobel gradients. The 1-pixel border is replicated from the nearest
/// interior pixel so every plane is defined everywhere.
pub fn compute_gradients(img: &GrayImage) -> Result<GradientField, ImageError> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(ImageError::InvalidArgument(format!(
            "image must be at least 3x3 for gradients, got {w}x{h}"
        )));
    }
    let n = (w * h) as usize;
    let mut gx = vec![0.0f64; n];
    let mut gy = vec![0.0f64; n];
    let (wu, data) = (w as usize, img.data());
    for y in 1..(h - 1) as usize {
        let up = &data[(y - 1) * wu..y * wu];
        let mid = &data[y * wu..(y + 1) * wu];
        let down = &data[(y + 1) * wu..(y + 2) * wu];
        let gx_row = &mut gx[y * wu..(y + 1) * wu];
        for x in 1..wu - 1 {
            let sx = (up[x + 1] as i32 + 2 * mid[x + 1] as i32 + down[x + 1] as i32)
                - (up[x - 1] as i32 + 2 * mid[x - 1] as i32 + down[x - 1] as i32);
            gx_row[x] = sx as f64;
        }
        let gy_row = &mut gy[y * wu..(y + 1) * wu];
        for x in 1..wu - 1 {
            let sy = (down[x - 1] as i32 + 2 * down[x] as i32 + down[x + 1] as i32)
                - (up[x - 1] as i32 + 2 * up[x] as i32 + up[x + 1] as i32);
            gy_row[x] = sy as f64;
        }
    }
    for y in 0..h {
        for x in 0..w {
            if x >= 1 && x < w - 1 && y >= 1 && y < h - 1 {
                continue;
            }
            let sx = x.clamp(1, w - 2);
            let sy = y.clamp(1, h - 2);
            let src = (sy * w + sx) as usize;
            let dst = (y * w + x) as usize;
            gx[dst] = gx[src];
            gy[dst] = gy[src];
        }
    }
    let mut mag = vec![0.0f64; n];
    let mut dir8 = vec![FLAT_DIR; n];
    for i in 0..n {
        // Sobel values are small integers; a plain sqrt cannot overflow.
        mag[i] = (gx[i] * gx[i] + gy[i] * gy[i]).sqrt();
        if let Some(d) = quantize_direction(gx[i], gy[i]) {
            dir8[i] = d;
        }
    }
    Ok(GradientField { width: w, height: h, gx, gy, mag, dir8 })
}

/// Summed-area table with 64-bit accumulators. `sat[i][j]` holds the sum of
/// intensities over the half-open rectangle [0, j) x [0, i).
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: u32,
    height: u32,
    sat: Vec<u64>,
}

/// Build the summed-area table of an image.
pub fn integral(img: &GrayImage) -> IntegralImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let stride = w + 1;
    let mut sat = vec![0u64; stride * (h + 1)];
    let data = img.data();
    for y in 0..h {
        let src = &data[y * w..(y + 1) * w];
        let (above, below) = sat.split_at_mut((y + 1) * stride);
        let prev = &above[y * stride + 1..(y + 1) * stride];
        let cur = &mut below[1..stride];
        let mut row_sum = 0u64;
        for x in 0..w {
            row_sum += src[x] as u64;
            cur[x] = prev[x] + row_sum;
        }
    }
    IntegralImage { width: img.width(), height: img.height(), sat }
}

impl IntegralImage {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Sum of intensities over `rect` via four table lookups.
    pub fn box_sum(&self, rect: Rect) -> Result<u64, ImageError> {
        if rect.right() > self.width || rect.bottom() > self.height {
            return Err(ImageError::InvalidArgument(format!(
                "rect {rect:?} out of bounds for {}x{}",
                self.width, self.height
            )));
        }
        Ok(self.box_sum_unchecked(rect))
    }

    #[inline]
    pub(crate) fn box_sum_unchecked(&self, rect: Rect) -> u64 {
        let stride = (self.width + 1) as usize;
        let (x0, y0) = (rect.x as usize, rect.y as usize);
        let (x1, y1) = (rect.right() as usize, rect.bottom() as usize);
        self.sat[y1 * stride + x1] + self.sat[y0 * stride + x0]
            - self.sat[y0 * stride + x1]
            - self.sat[y1 * stride + x0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pgm_decodes_2x2_payload() {
        let bytes = b"P5\n2 2\n255\n\x00\x40\x80\xff";
        let img = load_pgm(bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.data(), &[0, 64, 128, 255]);
        // pixel (x, y) at data[y*width + x]
        assert_eq!(img.get(1, 0), 64);
        assert_eq!(img.get(0, 1), 128);
    }

    #[test]
    fn pgm_rejects_ascii_variant() {
        assert!(matches!(load_pgm(b"P2\n2 2\n255\n0 1 2 3"), Err(ImageError::Parse(_))));
    }

    #[test]
    fn pgm_rejects_truncated_payload() {
        let bytes = b"P5\n2 2\n255\n\x00\x40\x80";
        assert!(matches!(load_pgm(bytes), Err(ImageError::Parse(_))));
    }

    #[test]
    fn pgm_skips_comments_and_roundtrips() {
        let bytes = b"P5 # binary\n# size next\n2 1\n# maxval\n255\n\x07\x09";
        let img = load_pgm(bytes).unwrap();
        assert_eq!(img.data(), &[7, 9]);
        let again = load_pgm(&write_pgm(&img)).unwrap();
        assert_eq!(again, img);
    }

    #[test]
    fn pgm_rejects_wide_maxval() {
        assert!(load_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn smooth_preserves_constant_image() {
        let img = GrayImage::new(16, 12, 100);
        let out = gaussian_smooth(&img, 1.0).unwrap();
        assert!(out.data().iter().all(|&v| v == 100));
    }

    #[test]
    fn smooth_keeps_peak_at_bright_pixel() {
        let mut img = GrayImage::new(15, 15, 10);
        img.set(7, 7, 250);
        let out = gaussian_smooth(&img, 1.0).unwrap();
        let max = out.data().iter().copied().max().unwrap();
        assert_eq!(out.get(7, 7), max);
        assert!(max > 10);
    }

    #[test]
    fn smooth_rejects_nonpositive_sigma() {
        let img = GrayImage::new(4, 4, 0);
        assert!(gaussian_smooth(&img, 0.0).is_err());
        assert!(gaussian_smooth(&img, -1.0).is_err());
    }

    /// Dense direct 2-D convolution with replicated borders, the oracle for
    /// the separable implementation.
    fn direct_convolution(img: &GrayImage, sigma: f64) -> Vec<f64> {
        let kernel = gaussian_kernel(sigma);
        let r = (kernel.len() / 2) as i64;
        let (w, h) = (img.width() as i64, img.height() as i64);
        let mut out = vec![0.0; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, &ky) in kernel.iter().enumerate() {
                    for (i, &kx) in kernel.iter().enumerate() {
                        let sx = (x + i as i64 - r).clamp(0, w - 1);
                        let sy = (y + j as i64 - r).clamp(0, h - 1);
                        acc += ky * kx * img.get(sx as u32, sy as u32) as f64;
                    }
                }
                out[(y * w + x) as usize] = acc;
            }
        }
        out
    }

    #[test]
    fn smooth_step_edge_matches_direct_oracle_and_is_monotone() {
        let img = GrayImage::from_fn(24, 9, |x, _| if x < 12 { 40 } else { 200 });
        let out = gaussian_smooth(&img, 1.0).unwrap();
        let oracle = direct_convolution(&img, 1.0);
        for y in 0..9u32 {
            for x in 0..24u32 {
                let got = out.get(x, y) as f64;
                let want = oracle[(y * 24 + x) as usize];
                assert!((got - want).abs() <= 0.5 + 1e-9, "({x},{y}): {got} vs {want}");
            }
            for x in 1..24u32 {
                assert!(out.get(x, y) >= out.get(x - 1, y), "row {y} not monotone at {x}");
            }
        }
    }

    #[test]
    fn smooth_stays_within_input_range() {
        let mut img = GrayImage::new(10, 10, 30);
        img.set(3, 4, 220);
        img.set(6, 6, 5);
        let out = gaussian_smooth(&img, 1.3).unwrap();
        for &v in out.data() {
            assert!((5..=220).contains(&v));
        }
    }

    #[test]
    fn gradients_on_vertical_step_are_gx_dominant() {
        let img = GrayImage::from_fn(11, 11, |x, _| if x < 5 { 20 } else { 220 });
        let field = compute_gradients(&img).unwrap();
        for y in 1..10u32 {
            let i = field.idx(5, y);
            assert!(field.gx[i].abs() > 100.0);
            assert_eq!(field.gy[i], 0.0);
        }
    }

    #[test]
    fn gradients_vanish_on_uniform_image() {
        let img = GrayImage::new(9, 7, 77);
        let field = compute_gradients(&img).unwrap();
        assert!(field.mag.iter().all(|&m| m == 0.0));
        assert!(field.dir8.iter().all(|&d| d == FLAT_DIR));
    }

    #[test]
    fn gradients_reject_tiny_images() {
        let img = GrayImage::new(2, 5, 0);
        assert!(compute_gradients(&img).is_err());
    }

    #[test]
    fn disk_rim_covers_all_eight_directions() {
        // Oracle: the outward normal of a circle sweeps every direction, so
        // the quantized symbols on the rim must cover all 8 bins. Confirm the
        // analytic sweep and the Sobel field agree on coverage.
        let (cx, cy, r) = (20.0, 20.0, 12.0);
        let img = GrayImage::from_fn(41, 41, |x, y| {
            let d = (x as f64 - cx).hypot(y as f64 - cy);
            if d <= r {
                30
            } else {
                200
            }
        });
        let field = compute_gradients(&img).unwrap();
        let mut analytic = [false; 8];
        let mut sobel = [false; 8];
        for k in 0..720 {
            let t = k as f64 * std::f64::consts::TAU / 720.0;
            let (nx, ny) = (t.cos(), t.sin());
            if let Some(b) = quantize_direction(nx, ny) {
                analytic[b as usize] = true;
            }
            let px = (cx + r * nx).round() as u32;
            let py = (cy + r * ny).round() as u32;
            let i = field.idx(px, py);
            if field.dir8[i] != FLAT_DIR {
                sobel[field.dir8[i] as usize] = true;
            }
        }
        assert_eq!(analytic, [true; 8]);
        assert_eq!(sobel, [true; 8], "Sobel rim directions missing a bin");
    }

    #[test]
    fn quantize_boundary_cases() {
        // theta = -90 deg: bin 0
        assert_eq!(quantize_direction(0.0, -3.0), Some(0));
        // theta = 0 deg: bin 4
        assert_eq!(quantize_direction(5.0, 0.0), Some(4));
        assert_eq!(quantize_direction(-5.0, 0.0), Some(4));
        // theta = +90 deg clamps into bin 7
        assert_eq!(quantize_direction(0.0, 3.0), Some(7));
        assert_eq!(quantize_direction(0.0, 0.0), None);
    }

    #[test]
    fn integral_box_sums() {
        let img = GrayImage::new(16, 16, 100);
        let ii = integral(&img);
        assert_eq!(ii.box_sum(Rect::new(2, 3, 10, 10)).unwrap(), 10_000);
        assert_eq!(ii.box_sum(Rect::new(5, 9, 1, 1)).unwrap(), 100);
        assert!(ii.box_sum(Rect::new(10, 10, 7, 7)).is_err());
    }

    #[test]
    fn integral_matches_naive_sum_on_random_rects() {
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let img = GrayImage::from_fn(32, 32, |_, _| (next() % 256) as u8);
        let ii = integral(&img);
        for _ in 0..50 {
            let x = (next() % 32) as u32;
            let y = (next() % 32) as u32;
            let w = 1 + (next() % (32 - x as u64)) as u32;
            let h = 1 + (next() % (32 - y as u64)) as u32;
            let naive: u64 = (y..y + h)
                .flat_map(|yy| (x..x + w).map(move |xx| (xx, yy)))
                .map(|(xx, yy)| img.get(xx, yy) as u64)
                .sum();
            assert_eq!(ii.box_sum(Rect::new(x, y, w, h)).unwrap(), naive);
        }
    }

    proptest! {
        #[test]
        fn full_frame_box_sum_equals_pixel_sum(w in 1u32..24, h in 1u32..24, seed in any::<u64>()) {
            let mut state = seed | 1;
            let img = GrayImage::from_fn(w, h, |_, _| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 256) as u8
            });
            let ii = integral(&img);
            let total: u64 = img.data().iter().map(|&v| v as u64).sum();
            prop_assert_eq!(ii.box_sum(Rect::new(0, 0, w, h)).unwrap(), total);
        }

        #[test]
        fn quantize_partitions_halfturn(gx in -1000.0f64..1000.0, gy in -1000.0f64..1000.0) {
            prop_assume!(gx != 0.0 || gy != 0.0);
            let bin = quantize_direction(gx, gy).unwrap();
            prop_assert!(bin <= 7);
            let theta = if gx == 0.0 {
                if gy > 0.0 { 90.0 } else { -90.0 }
            } else {
                (gy / gx).atan().to_degrees()
            };
            // Same cells as floor((theta + 90) / 22.5); skip samples within
            // rounding distance of a cell boundary.
            let cell = (theta + 90.0) / 22.5;
            prop_assume!((cell - cell.round()).abs() > 1e-9);
            let expect = ((cell.floor() as i32).clamp(0, 7)) as u8;
            prop_assert_eq!(bin, expect);
        }

        #[test]
        fn smooth_bounded_by_input_range(seed in any::<u64>()) {
            let mut state = seed | 1;
            let img = GrayImage::from_fn(12, 12, |_, _| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 256) as u8
            });
            let lo = *img.data().iter().min().unwrap();
            let hi = *img.data().iter().max().unwrap();
            let out = gaussian_smooth(&img, 1.0).unwrap();
            for &v in out.data() {
                prop_assert!(v >= lo && v <= hi);
            }
        }
    }

    #[test]
    fn mirror_negates_gx_preserves_gy() {
        let mut state = 0x9E3779B97F4A7C15u64;
        let img = GrayImage::from_fn(17, 13, |_, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 256) as u8
        });
        let mirrored =
            GrayImage::from_fn(17, 13, |x, y| img.get(img.width() - 1 - x, y));
        let f = compute_gradients(&img).unwrap();
        let g = compute_gradients(&mirrored).unwrap();
        for y in 0..13u32 {
            for x in 0..17u32 {
                let a = f.idx(x, y);
                let b = g.idx(16 - x, y);
                assert_eq!(f.gx[a], -g.gx[b]);
                assert_eq!(f.gy[a], g.gy[b]);
            }
        }
    }
}
