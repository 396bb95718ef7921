//! Corner splitting and elliptical arc extraction.
//!
//! Corners are turning-angle curvature maxima computed from the gradient
//! directions already available along each chain: the curvature at a chain
//! position is the angular difference between the mean gradient direction of
//! the trailing and leading windows, smoothed along the chain. Spans between
//! consecutive corners are fitted and kept as arcs when the fit is a genuine
//! ellipse with a small error.

use crate::config::{ArcConfig, ShapeConfig};
use crate::edges::EdgeSegment;
use crate::ellipse::{fit_ellipse, FitResult};
use crate::entropy::{gradient_entropy, NearCircular};
use crate::imaging::{GradientField, Point, FLAT_DIR};

/// Curvature corner on a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    /// Index of the segment in the processed list.
    pub segment: usize,
    /// Position along the chain.
    pub index: usize,
    pub x: u32,
    pub y: u32,
}

/// Inter-corner chain span with its fitted ellipse.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticalArc {
    /// Segment the span came from.
    pub segment: usize,
    pub pixels: Vec<Point>,
    pub fit: FitResult,
    pub span_length: usize,
}

/// Gradient direction modulo pi at each chain pixel, `None` where flat.
fn chain_directions(seg: &EdgeSegment, field: &GradientField) -> Vec<Option<f64>> {
    seg.pixels
        .iter()
        .map(|p| {
            let i = field.idx(p.x, p.y);
            if field.dir8[i] == FLAT_DIR {
                None
            } else {
                let gx = field.gx[i];
                let gy = field.gy[i];
                Some(if gx == 0.0 {
                    std::f64::consts::FRAC_PI_2
                } else {
                    (gy / gx).atan()
                })
            }
        })
        .collect()
}

/// Mean of directions modulo pi via the doubled-angle embedding.
fn mean_direction(dirs: &[Option<f64>], idx: impl Iterator<Item = usize>) -> Option<f64> {
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut n = 0;
    for i in idx {
        if let Some(d) = dirs[i] {
            sx += (2.0 * d).cos();
            sy += (2.0 * d).sin();
            n += 1;
        }
    }
    if n == 0 || sx.hypot(sy) < 1e-9 {
        None
    } else {
        Some(0.5 * sy.atan2(sx))
    }
}

/// Angular difference of two directions modulo pi, folded into
/// [-pi/2, pi/2].
fn fold_half_turn(mut d: f64) -> f64 {
    while d > std::f64::consts::FRAC_PI_2 {
        d -= std::f64::consts::PI;
    }
    while d < -std::f64::consts::FRAC_PI_2 {
        d += std::f64::consts::PI;
    }
    d
}

fn is_closed(seg: &EdgeSegment, shape: &ShapeConfig) -> bool {
    seg.closed_gap <= shape.max_closed_gap && seg.len() > 8
}

/// Turning-angle curvature per chain position, Gaussian-smoothed along the
/// chain. Closed chains are treated circularly; open chain ends carry zero
/// curvature where a full window does not fit.
fn curvature_signal(
    seg: &EdgeSegment,
    field: &GradientField,
    cfg: &ArcConfig,
    closed: bool,
) -> Vec<f64> {
    let n = seg.len();
    let w = cfg.curvature_window;
    if n < 2 * w + 1 {
        return vec![0.0; n];
    }
    let dirs = chain_directions(seg, field);
    let mut kappa = vec![0.0f64; n];
    let wrap = |i: i64| -> usize { i.rem_euclid(n as i64) as usize };
    for i in 0..n {
        let (bwd, fwd): (Vec<usize>, Vec<usize>) = if closed {
            (
                (1..=w).map(|k| wrap(i as i64 - k as i64)).collect(),
                (1..=w).map(|k| wrap(i as i64 + k as i64)).collect(),
            )
        } else {
            if i < w || i + w >= n {
                continue;
            }
            ((i - w..i).collect(), (i + 1..=i + w).collect())
        };
        if let (Some(a), Some(b)) = (
            mean_direction(&dirs, bwd.into_iter()),
            mean_direction(&dirs, fwd.into_iter()),
        ) {
            kappa[i] = fold_half_turn(b - a).abs();
        }
    }

    // 1-D Gaussian smoothing of the curvature signal.
    let sigma = cfg.css_sigma;
    let radius = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let mut smooth = vec![0.0f64; n];
    for i in 0..n {
        let mut acc = 0.0;
        for (j, &kv) in kernel.iter().enumerate() {
            let off = i as i64 + j as i64 - radius;
            let src = if closed { wrap(off) } else { off.clamp(0, n as i64 - 1) as usize };
            acc += kv * kappa[src];
        }
        smooth[i] = acc / ksum;
    }
    smooth
}

/// Detect corners along one segment: local maxima of the smoothed turning
/// angle above the configured threshold, non-max suppressed within the
/// curvature window. Too-short segments yield no corners.
pub fn detect_corners(
    segment_index: usize,
    seg: &EdgeSegment,
    field: &GradientField,
    cfg: &ArcConfig,
    shape: &ShapeConfig,
) -> Vec<Corner> {
    let n = seg.len();
    let w = cfg.curvature_window;
    if n < 2 * w + 1 {
        return Vec::new();
    }
    let closed = is_closed(seg, shape);
    let kappa = curvature_signal(seg, field, cfg, closed);
    let threshold = cfg.corner_angle_deg.to_radians();
    let wrap = |i: i64| -> usize { i.rem_euclid(n as i64) as usize };

    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            if kappa[i] < threshold {
                return false;
            }
            let prev = if closed {
                kappa[wrap(i as i64 - 1)]
            } else if i == 0 {
                f64::NEG_INFINITY
            } else {
                kappa[i - 1]
            };
            let next = if closed {
                kappa[wrap(i as i64 + 1)]
            } else if i + 1 == n {
                f64::NEG_INFINITY
            } else {
                kappa[i + 1]
            };
            kappa[i] > prev && kappa[i] >= next
        })
        .collect();
    // Strongest responses first; positional tie-break keeps it deterministic.
    candidates.sort_by(|&a, &b| {
        kappa[b].partial_cmp(&kappa[a]).unwrap().then_with(|| a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        let dist_ok = kept.iter().all(|&k| {
            let d = (c as i64 - k as i64).abs();
            let d = if closed { d.min(n as i64 - d) } else { d };
            d > w as i64
        });
        if dist_ok {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept.into_iter()
        .map(|index| Corner {
            segment: segment_index,
            index,
            x: seg.pixels[index].x,
            y: seg.pixels[index].y,
        })
        .collect()
}

/// Split a chain at its corners. Corner pixels belong to neither side.
/// A corner-free chain is a single span. Closed chains wrap, so k corners
/// produce k spans; open chains produce k + 1.
pub fn split_at_corners(seg: &EdgeSegment, corners: &[Corner], closed: bool) -> Vec<Vec<Point>> {
    let n = seg.len();
    if corners.is_empty() {
        return vec![seg.pixels.clone()];
    }
    let mut spans = Vec::new();
    if closed {
        for (k, c) in corners.iter().enumerate() {
            let next = corners[(k + 1) % corners.len()];
            let start = c.index + 1;
            let end = if k + 1 == corners.len() { next.index + n } else { next.index };
            let span: Vec<Point> =
                (start..end).map(|i| seg.pixels[i % n]).collect();
            if !span.is_empty() {
                spans.push(span);
            }
        }
    } else {
        let mut start = 0usize;
        for c in corners {
            if c.index > start {
                spans.push(seg.pixels[start..c.index].to_vec());
            }
            start = c.index + 1;
        }
        if start < n {
            spans.push(seg.pixels[start..n].to_vec());
        }
    }
    spans
}

/// Extract elliptical arcs. With a near-circular segment, arcs come only
/// from that segment; otherwise every high-entropy segment of sufficient
/// length is split and fitted. Spans survive when the fit is an ellipse
/// with RMSE within the arc bound.
pub fn extract_arcs(
    segments: &[EdgeSegment],
    field: &GradientField,
    near_circular: Option<&NearCircular>,
    cfg: &ArcConfig,
    shape: &ShapeConfig,
) -> Vec<EllipticalArc> {
    let targets = arc_targets(segments, field, near_circular, cfg, shape);
    let mut arcs = Vec::new();
    for index in targets {
        let seg = &segments[index];
        let corners = detect_corners(index, seg, field, cfg, shape);
        fit_spans(index, seg, &corners, cfg, shape, &mut arcs);
    }
    arcs
}

/// Segment indices subject to arc extraction.
pub fn arc_targets(
    segments: &[EdgeSegment],
    field: &GradientField,
    near_circular: Option<&NearCircular>,
    cfg: &ArcConfig,
    shape: &ShapeConfig,
) -> Vec<usize> {
    if let Some(nc) = near_circular {
        return vec![nc.index];
    }
    (0..segments.len())
        .filter(|&i| {
            segments[i].len() >= cfg.min_arc_length
                && gradient_entropy(&segments[i], field).entropy > shape.entropy_arc
        })
        .collect()
}

/// Fit the inter-corner spans of one segment, appending surviving arcs.
pub fn fit_spans(
    segment_index: usize,
    seg: &EdgeSegment,
    corners: &[Corner],
    cfg: &ArcConfig,
    shape: &ShapeConfig,
    arcs: &mut Vec<EllipticalArc>,
) {
    let closed = is_closed(seg, shape);
    for span in split_at_corners(seg, corners, closed) {
        if span.len() < cfg.min_arc_length {
            continue;
        }
        let pts: Vec<[f64; 2]> = span.iter().map(|p| [p.x as f64, p.y as f64]).collect();
        let Ok(fit) = fit_ellipse(&pts) else { continue };
        if fit.rmse > cfg.arc_rmse || fit.ellipse.eccentricity() > cfg.max_eccentricity {
            continue;
        }
        arcs.push(EllipticalArc {
            segment: segment_index,
            span_length: span.len(),
            pixels: span,
            fit,
        });
    }
}
