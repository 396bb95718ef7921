//! Pupil region estimation by multi-scale square Haar-like convolution.
//!
//! A pupil reads as a dark compact blob on a brighter surround, so the
//! kernel is a concentric square pair with a 3/5 inner/outer side ratio;
//! the response is the mean difference between the outer ring and the inner
//! square, which is comparable across apertures ("response per unit"). The
//! scan runs coarse first and refines at stride 1 around the coarse argmax.

use crate::config::RoiConfig;
use crate::imaging::{integral, GrayImage, IntegralImage, Rect};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RoiError {
    #[error("no configured scale fits a {0}x{1} image")]
    NoScaleFits(u32, u32),
}

/// Best-response window of the multi-scale search. `rect` is the winning
/// square itself (side length equals `aperture`); callers expand it before
/// cropping (`RoiConfig::expand`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiResult {
    pub rect: Rect,
    pub aperture: u32,
    pub score: f64,
}

/// Inner square side: round-half-up of 3/5 of the aperture.
fn inner_side(aperture: u32) -> u32 {
    (6 * aperture + 5) / 10
}

/// Per-scale constants of the response: inner square geometry and the
/// reciprocal areas (the scan evaluates this tens of thousands of times).
#[derive(Clone, Copy)]
struct Kernel {
    aperture: u32,
    inner: u32,
    offset: u32,
    inv_ring_area: f64,
    inv_inner_area: f64,
}

impl Kernel {
    fn new(aperture: u32) -> Self {
        let inner = inner_side(aperture);
        Kernel {
            aperture,
            inner,
            offset: (aperture - inner) / 2,
            inv_ring_area: 1.0 / (aperture * aperture - inner * inner) as f64,
            inv_inner_area: 1.0 / (inner * inner) as f64,
        }
    }

    #[inline]
    fn response(&self, ii: &IntegralImage, x0: u32, y0: u32) -> f64 {
        let outer = ii.box_sum_unchecked(Rect::new(x0, y0, self.aperture, self.aperture));
        let inner = ii.box_sum_unchecked(Rect::new(
            x0 + self.offset,
            y0 + self.offset,
            self.inner,
            self.inner,
        ));
        (outer - inner) as f64 * self.inv_ring_area - inner as f64 * self.inv_inner_area
    }
}

fn response_at(ii: &IntegralImage, x0: u32, y0: u32, aperture: u32) -> f64 {
    Kernel::new(aperture).response(ii, x0, y0)
}

/// Haar response centered at `(cx, cy)`: outer-ring mean minus inner mean.
/// A darker inner blob on a brighter surround gives larger values; if the
/// inner region is darker by exactly delta on an otherwise uniform field,
/// the response is delta.
///
/// The outer square of side `aperture` must fit inside the image.
pub fn haar_response(ii: &IntegralImage, cx: u32, cy: u32, aperture: u32) -> f64 {
    let half = aperture / 2;
    assert!(
        cx >= half && cy >= half,
        "outer square centered at ({cx},{cy}) leaves the image"
    );
    let (x0, y0) = (cx - half, cy - half);
    assert!(
        x0 + aperture <= ii.width() && y0 + aperture <= ii.height(),
        "outer square centered at ({cx},{cy}) leaves the image"
    );
    response_at(ii, x0, y0, aperture)
}

/// Candidate ordering: larger response wins; exact ties break toward the
/// smallest (y, x, aperture).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Best {
    score: f64,
    y: u32,
    x: u32,
    aperture: u32,
}

impl Best {
    fn beats(&self, other: &Option<Best>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.score > o.score
                    || (self.score == o.score
                        && (self.y, self.x, self.aperture) < (o.y, o.x, o.aperture))
            }
        }
    }
}

fn scan_scale(
    ii: &IntegralImage,
    aperture: u32,
    stride: u32,
    window: Option<(u32, u32)>,
) -> Option<Best> {
    let kernel = Kernel::new(aperture);
    let x_max = ii.width() - aperture;
    let y_max = ii.height() - aperture;
    let (x_range, y_range) = match window {
        None => ((0, x_max), (0, y_max)),
        Some((cx, cy)) => {
            let r = stride.max(1) - 1;
            (
                (cx.saturating_sub(r), (cx + r).min(x_max)),
                (cy.saturating_sub(r), (cy + r).min(y_max)),
            )
        }
    };
    let mut best: Option<Best> = None;
    let mut y = y_range.0;
    while y <= y_range.1 {
        let mut x = x_range.0;
        while x <= x_range.1 {
            let cand = Best { score: kernel.response(ii, x, y), y, x, aperture };
            if cand.beats(&best) {
                best = Some(cand);
            }
            x += if window.is_none() { stride } else { 1 };
        }
        y += if window.is_none() { stride } else { 1 };
    }
    best
}

/// Scan all configured scales and return the global best-response window.
pub fn detect_roi(img: &GrayImage, cfg: &RoiConfig) -> Result<RoiResult, RoiError> {
    let ii = integral(img);
    detect_roi_on_integral(&ii, cfg)
}

pub fn detect_roi_on_integral(ii: &IntegralImage, cfg: &RoiConfig) -> Result<RoiResult, RoiError> {
    let mut best: Option<Best> = None;
    for &aperture in &cfg.scales {
        if aperture == 0 || aperture > ii.width() || aperture > ii.height() {
            continue;
        }
        let coarse = scan_scale(ii, aperture, cfg.stride, None);
        let refined = match (cfg.stride > 1, &coarse) {
            (true, Some(c)) => scan_scale(ii, aperture, cfg.stride, Some((c.x, c.y))),
            _ => coarse,
        };
        if let Some(r) = refined {
            if r.beats(&best) {
                best = Some(r);
            }
        }
    }
    let b = best.ok_or(RoiError::NoScaleFits(ii.width(), ii.height()))?;
    Ok(RoiResult {
        rect: Rect::new(b.x, b.y, b.aperture, b.aperture),
        aperture: b.aperture,
        score: b.score,
    })
}

/// Stride-1 exhaustive scan over all scales. This is the reference the
/// coarse+refine shortcut is checked against.
pub fn detect_roi_exhaustive(img: &GrayImage, cfg: &RoiConfig) -> Result<RoiResult, RoiError> {
    let mut exhaustive = cfg.clone();
    exhaustive.stride = 1;
    detect_roi(img, &exhaustive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RoiConfig;

    fn disk_image(w: u32, h: u32, cx: f64, cy: f64, r: f64, inside: u8, outside: u8) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            if (x as f64 - cx).hypot(y as f64 - cy) <= r {
                inside
            } else {
                outside
            }
        })
    }

    #[test]
    fn uniform_image_gives_zero_response() {
        let img = GrayImage::new(260, 260, 120);
        let ii = integral(&img);
        for cy in (100..=160).step_by(20) {
            for cx in (100..=160).step_by(20) {
                assert_eq!(haar_response(&ii, cx, cy, 200), 0.0);
            }
        }
    }

    #[test]
    fn inner_darker_by_delta_gives_delta() {
        let ap = 200;
        let si = inner_side(ap);
        assert_eq!(si, 120);
        let off = (ap - si) / 2;
        let img = GrayImage::from_fn(240, 240, |x, y| {
            let in_inner = x >= 20 + off && x < 20 + off + si && y >= 20 + off && y < 20 + off + si;
            if in_inner {
                150
            } else {
                180
            }
        });
        let ii = integral(&img);
        let resp = haar_response(&ii, 20 + ap / 2, 20 + ap / 2, ap);
        assert!((resp - 30.0).abs() < 1e-9, "resp {resp}");
    }

    #[test]
    fn dark_disk_argmax_near_center() {
        // Oracle: brute-force stride-1 scan of the same response.
        let img = disk_image(420, 420, 210.0, 210.0, 60.0, 20, 200);
        let ii = integral(&img);
        let ap = 200u32;
        let mut best = (f64::NEG_INFINITY, 0u32, 0u32);
        for y in 0..=420 - ap {
            for x in 0..=420 - ap {
                let r = response_at(&ii, x, y, ap);
                if r > best.0 {
                    best = (r, x, y);
                }
            }
        }
        let (bx, by) = (best.1 + ap / 2, best.2 + ap / 2);
        assert!((bx as f64 - 210.0).abs() <= 2.0, "center x {bx}");
        assert!((by as f64 - 210.0).abs() <= 2.0, "center y {by}");
    }

    #[test]
    fn no_scale_fits_small_image() {
        let img = GrayImage::new(100, 100, 50);
        assert!(matches!(
            detect_roi(&img, &RoiConfig::default()),
            Err(RoiError::NoScaleFits(100, 100))
        ));
    }

    #[test]
    fn default_scales_are_the_five_apertures() {
        assert_eq!(RoiConfig::default().scales, vec![150, 200, 250, 300, 350]);
    }

    #[test]
    fn detected_window_contains_disk() {
        let img = disk_image(700, 500, 350.0, 250.0, 50.0, 25, 190);
        let cfg = RoiConfig::default();
        let roi = detect_roi(&img, &cfg).unwrap();
        assert!(cfg.scales.contains(&roi.aperture));
        assert_eq!(roi.rect.w, roi.aperture);
        // The full disk fits inside the winning window.
        assert!(roi.rect.x + roi.rect.w >= 400 && roi.rect.x <= 300);
        assert!(roi.rect.y + roi.rect.h >= 300 && roi.rect.y <= 200);
        // Coarse+refine agrees with the exhaustive scan.
        let full = detect_roi_exhaustive(&img, &cfg).unwrap();
        assert_eq!(roi, full);
    }

    #[test]
    fn translation_covariance() {
        let cfg = RoiConfig::default();
        let base = detect_roi(&disk_image(600, 460, 280.0, 230.0, 45.0, 30, 200), &cfg).unwrap();
        let moved = detect_roi(&disk_image(600, 460, 305.0, 214.0, 45.0, 30, 200), &cfg).unwrap();
        let dx = moved.rect.x as i64 - base.rect.x as i64;
        let dy = moved.rect.y as i64 - base.rect.y as i64;
        assert!((dx - 25).abs() <= cfg.stride as i64, "dx {dx}");
        assert!((dy + 16).abs() <= cfg.stride as i64, "dy {dy}");
    }

    #[test]
    fn response_invariant_to_intensity_offset() {
        let img = disk_image(400, 400, 200.0, 200.0, 50.0, 20, 180);
        let shifted = GrayImage::from_fn(400, 400, |x, y| img.get(x, y) + 40);
        let (ia, ib) = (integral(&img), integral(&shifted));
        for (cx, cy) in [(200, 200), (150, 170), (230, 210)] {
            let a = haar_response(&ia, cx, cy, 200);
            let b = haar_response(&ib, cx, cy, 200);
            assert!((a - b).abs() < 1e-9, "offset changed response: {a} vs {b}");
        }
        let cfg = RoiConfig::default();
        assert_eq!(
            detect_roi(&img, &cfg).unwrap().rect,
            detect_roi(&shifted, &cfg).unwrap().rect
        );
    }
}
