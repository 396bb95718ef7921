//! Gradient-distribution entropy of edge segments and the near-circular
//! segment screen.
//!
//! A closed near-circular chain samples every gradient direction evenly, so
//! the Shannon entropy of its 8-bin direction histogram approaches the
//! log2(8) = 3 bit ceiling, while straight chains collapse to a single bin
//! and zero bits. Computing this is orders of magnitude cheaper than an
//! ellipse fit, which makes it the gate for the fast detection path: only
//! high-entropy closed segments pay for the fit, and only the one with the
//! lowest fit error wins.

use crate::config::ShapeConfig;
use crate::edges::EdgeSegment;
use crate::ellipse::{fit_ellipse, FitResult};
use crate::imaging::{GradientField, FLAT_DIR};

/// Per-segment shape statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentShapeStats {
    /// Direction histogram over the 8 quantized symbols; flat pixels are
    /// excluded, so the counts sum to the number of non-flat pixels.
    pub hist: [u32; 8],
    /// Shannon entropy of the normalized histogram, in bits, within [0, 3].
    pub entropy: f64,
    /// Chain length in pixels.
    pub length: usize,
    pub closed_gap: f64,
    pub fit: Option<FitResult>,
}

/// Entropy in bits of a (not necessarily normalized) 8-bin histogram, with
/// the 0 * log 0 := 0 convention. An empty histogram yields 0.
pub fn entropy_bits(hist: &[u32; 8]) -> f64 {
    let total: u64 = hist.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return 0.0;
    }
    let mut e = 0.0;
    for &c in hist {
        if c > 0 {
            let p = c as f64 / total as f64;
            e -= p * p.log2();
        }
    }
    e
}

/// Histogram the quantized gradient directions along a segment and compute
/// the entropy of the distribution.
pub fn gradient_entropy(seg: &EdgeSegment, field: &GradientField) -> SegmentShapeStats {
    let mut hist = [0u32; 8];
    for p in &seg.pixels {
        let d = field.dir8[field.idx(p.x, p.y)];
        if d != FLAT_DIR {
            hist[d as usize] += 1;
        }
    }
    SegmentShapeStats {
        hist,
        entropy: entropy_bits(&hist),
        length: seg.len(),
        closed_gap: seg.closed_gap,
        fit: None,
    }
}

/// The segment chosen by the near-circular screen.
#[derive(Debug, Clone, PartialEq)]
pub struct NearCircular {
    /// Index into the segment list passed to [`find_near_circular`].
    pub index: usize,
    pub fit: FitResult,
}

/// Three-criteria screen for a segment tracing the whole pupil boundary:
/// high gradient entropy, closed chain, small ellipse fitting error. Among
/// segments passing all three, the one with the minimum fit error wins.
/// Returns `None` when every segment fails a criterion; the adaptive
/// dispatch depends on that being a normal outcome.
pub fn find_near_circular(
    segments: &[EdgeSegment],
    field: &GradientField,
    cfg: &ShapeConfig,
) -> Option<NearCircular> {
    let mut best: Option<NearCircular> = None;
    for (index, seg) in segments.iter().enumerate() {
        if seg.len() < cfg.min_near_circular_length {
            continue;
        }
        let stats = gradient_entropy(seg, field);
        if stats.entropy < cfg.entropy_near_circular || stats.closed_gap > cfg.max_closed_gap {
            continue;
        }
        let Ok(fit) = fit_ellipse(&seg.points_f64()) else { continue };
        if fit.rmse > cfg.near_circular_rmse
            || fit.ellipse.eccentricity() > cfg.max_eccentricity
        {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => {
                fit.rmse < b.fit.rmse
                    || (fit.rmse == b.fit.rmse && {
                        // Deterministic tie-break: longer chain, then first
                        // pixel position, then list order.
                        let cur = &segments[index];
                        let old = &segments[b.index];
                        cur.len() > old.len()
                            || (cur.len() == old.len()
                                && (cur.pixels[0].y, cur.pixels[0].x)
                                    < (old.pixels[0].y, old.pixels[0].x))
                    })
            }
        };
        if better {
            best = Some(NearCircular { index, fit });
        }
    }
    best
}

/// Per-segment debug table: histogram, length, entropy.
pub fn shape_table(segments: &[EdgeSegment], field: &GradientField) -> String {
    let mut out = String::from(
        "seg |   d0   d1   d2   d3   d4   d5   d6   d7 |  len |   gap | entropy\n",
    );
    for (i, seg) in segments.iter().enumerate() {
        let s = gradient_entropy(seg, field);
        out.push_str(&format!(
            "{i:3} |{}| {:4} | {:5.1} | {:7.3}\n",
            s.hist.iter().map(|c| format!(" {c:4}")).collect::<String>(),
            s.length,
            s.closed_gap,
            s.entropy
        ));
    }
    out
}
