//! Parameter-free edge segment extraction.
//!
//! Extraction is deliberately permissive: anchors are local gradient maxima
//! above a low floor, grown in both directions by always stepping to the
//! strongest of the three forward neighbors. False chains are then pruned
//! by an a-contrario test (the Helmholtz principle): a segment survives only
//! if its expected number of false alarms under the image's own gradient
//! distribution is at most one.

use crate::config::EdgeConfig;
use crate::imaging::{compute_gradients, gaussian_smooth, GradientField, GrayImage, Point};

/// Ordered, 8-connected, one-pixel-wide chain of edge pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSegment {
    pub pixels: Vec<Point>,
    /// Euclidean distance between the first and last chain pixel.
    pub closed_gap: f64,
}

impl EdgeSegment {
    pub fn new(pixels: Vec<Point>) -> Self {
        assert!(!pixels.is_empty(), "empty segment");
        let closed_gap = pixels[0].distance(*pixels.last().unwrap());
        EdgeSegment { pixels, closed_gap }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn points_f64(&self) -> Vec<[f64; 2]> {
        self.pixels.iter().map(|p| [p.x as f64, p.y as f64]).collect()
    }
}

/// Segments plus the gradient field they were extracted from. Downstream
/// stages (entropy, corners) reuse the same derivatives.
#[derive(Debug)]
pub struct EdgeDetection {
    pub segments: Vec<EdgeSegment>,
    pub field: GradientField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    Left,
    Right,
    Up,
    Down,
}

/// Ridge mask: pixels above the magnitude floor that are local maxima
/// across their gradient direction, compared along the nearest of four
/// axes (horizontal, vertical, both diagonals). Routing is confined to
/// this mask; the raw magnitude band around an edge is several pixels
/// thick and walking it directly lets chains spiral through adjacent
/// rings, while two-axis suppression leaves holes at 45 degree turns.
fn ridge_mask(field: &GradientField, threshold: f64) -> Vec<bool> {
    let (w, h) = (field.width(), field.height());
    let tan225 = (22.5f64).to_radians().tan();
    let mut mask = vec![false; field.pixel_count()];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = field.idx(x, y);
            let m = field.mag[i];
            if m < threshold {
                continue;
            }
            let ax = field.gx[i].abs();
            let ay = field.gy[i].abs();
            let (dx, dy) = if ay <= tan225 * ax {
                (1i64, 0i64)
            } else if ax <= tan225 * ay {
                (0, 1)
            } else if field.gx[i] * field.gy[i] >= 0.0 {
                (1, 1)
            } else {
                (1, -1)
            };
            let fwd = field.mag[field.idx((x as i64 + dx) as u32, (y as i64 + dy) as u32)];
            let bwd = field.mag[field.idx((x as i64 - dx) as u32, (y as i64 - dy) as u32)];
            mask[i] = m > bwd && m >= fwd;
        }
    }
    mask
}

struct Tracer<'a> {
    field: &'a GradientField,
    mask: &'a [bool],
    visited: Vec<bool>,
    chain_id: Vec<u32>,
    current: u32,
}

impl<'a> Tracer<'a> {
    fn new(field: &'a GradientField, mask: &'a [bool]) -> Self {
        let n = field.pixel_count();
        Tracer { field, mask, visited: vec![false; n], chain_id: vec![0; n], current: 0 }
    }

    #[inline]
    fn idx(&self, x: i64, y: i64) -> usize {
        (y as u32 * self.field.width() + x as u32) as usize
    }

    #[inline]
    fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.field.width() as i64 && y < self.field.height() as i64
    }

    fn mark(&mut self, x: i64, y: i64) {
        let i = self.idx(x, y);
        self.visited[i] = true;
        self.chain_id[i] = self.current;
    }

    /// A step is legal only when every already-walked neighbor of the
    /// candidate is the pixel we stand on, its predecessor, or the walk
    /// origin. Rasterized staircases legitimately touch the first two; the
    /// origin exception lets a loop close flush against its own start.
    /// Anything else would fold the chain onto itself.
    fn step_allowed(&self, x: i64, y: i64, cur: (i64, i64), prev: (i64, i64), origin: (i64, i64)) -> bool {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if self.in_bounds(nx, ny)
                    && self.chain_id[self.idx(nx, ny)] == self.current
                    && (nx, ny) != cur
                    && (nx, ny) != prev
                    && (nx, ny) != origin
                {
                    return false;
                }
            }
        }
        true
    }

    /// Middle candidate first so ties prefer going straight.
    fn candidates(x: i64, y: i64, dir: Dir) -> [(i64, i64); 3] {
        match dir {
            Dir::Left => [(x - 1, y), (x - 1, y - 1), (x - 1, y + 1)],
            Dir::Right => [(x + 1, y), (x + 1, y - 1), (x + 1, y + 1)],
            Dir::Up => [(x, y - 1), (x - 1, y - 1), (x + 1, y - 1)],
            Dir::Down => [(x, y + 1), (x - 1, y + 1), (x + 1, y + 1)],
        }
    }

    fn mag_at(&self, x: i64, y: i64) -> f64 {
        if self.in_bounds(x, y) {
            self.field.mag[self.idx(x, y)]
        } else {
            -1.0
        }
    }

    /// Direction for the next step given the pixel just entered and the move
    /// that led there. Horizontal edges walk left/right, vertical edges walk
    /// up/down; the previous move breaks the orientation switch ambiguity.
    fn next_dir(&self, x: i64, y: i64, dx: i64, dy: i64, dir: Dir) -> Dir {
        let i = self.idx(x, y);
        let horizontal_edge = self.field.gx[i].abs() < self.field.gy[i].abs();
        if horizontal_edge {
            match dx.signum() {
                -1 => Dir::Left,
                1 => Dir::Right,
                _ => {
                    if matches!(dir, Dir::Left | Dir::Right) {
                        dir
                    } else if self.mag_at(x - 1, y) >= self.mag_at(x + 1, y) {
                        Dir::Left
                    } else {
                        Dir::Right
                    }
                }
            }
        } else {
            match dy.signum() {
                -1 => Dir::Up,
                1 => Dir::Down,
                _ => {
                    if matches!(dir, Dir::Up | Dir::Down) {
                        dir
                    } else if self.mag_at(x, y - 1) >= self.mag_at(x, y + 1) {
                        Dir::Up
                    } else {
                        Dir::Down
                    }
                }
            }
        }
    }

    fn walk(&mut self, from: Point, mut dir: Dir, prev_hint: Option<Point>) -> Vec<Point> {
        let mut out = Vec::new();
        let origin = (from.x as i64, from.y as i64);
        let (mut x, mut y) = origin;
        let (mut px, mut py) = prev_hint
            .map(|p| (p.x as i64, p.y as i64))
            .unwrap_or((x, y));
        let max_len = self.field.pixel_count();
        loop {
            let mut best: Option<(f64, i64, i64)> = None;
            let consider = |s: &Self, cx: i64, cy: i64, best: &mut Option<(f64, i64, i64)>| {
                if !s.in_bounds(cx, cy) {
                    return;
                }
                let i = s.idx(cx, cy);
                if s.visited[i] || !s.mask[i] {
                    return;
                }
                if !s.step_allowed(cx, cy, (x, y), (px, py), origin) {
                    return;
                }
                match best {
                    Some((m, _, _)) if *m >= s.field.mag[i] => {}
                    _ => *best = Some((s.field.mag[i], cx, cy)),
                }
            };
            for &(cx, cy) in &Self::candidates(x, y, dir) {
                consider(self, cx, cy, &mut best);
            }
            if best.is_none() {
                // Diagonal ridges carry lateral double-pixel steps the
                // forward cone cannot take; rescue with the full
                // 8-neighborhood before giving up.
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        if dx != 0 || dy != 0 {
                            consider(self, x + dx, y + dy, &mut best);
                        }
                    }
                }
            }
            let Some((_, nx, ny)) = best else { break };
            self.mark(nx, ny);
            out.push(Point::new(nx as u32, ny as u32));
            dir = self.next_dir(nx, ny, nx - x, ny - y, dir);
            (px, py) = (x, y);
            (x, y) = (nx, ny);
            if out.len() >= max_len {
                break;
            }
        }
        out
    }

    fn trace(&mut self, anchor: Point) -> Vec<Point> {
        self.current += 1;
        self.mark(anchor.x as i64, anchor.y as i64);
        let i = self.idx(anchor.x as i64, anchor.y as i64);
        let horizontal_edge = self.field.gx[i].abs() < self.field.gy[i].abs();
        let (back_dir, fwd_dir) =
            if horizontal_edge { (Dir::Left, Dir::Right) } else { (Dir::Up, Dir::Down) };
        let back = self.walk(anchor, back_dir, None);
        let fwd = self.walk(anchor, fwd_dir, back.first().copied());
        let mut chain = Vec::with_capacity(back.len() + fwd.len() + 1);
        chain.extend(back.iter().rev().copied());
        chain.push(anchor);
        chain.extend(fwd);
        thin_chain(chain)
    }
}

/// Drop redundant staircase corners: whenever the predecessor and successor
/// of a pixel are themselves 8-adjacent, the pixel in between adds width,
/// not connectivity.
fn thin_chain(mut chain: Vec<Point>) -> Vec<Point> {
    loop {
        let mut out: Vec<Point> = Vec::with_capacity(chain.len());
        let mut changed = false;
        let mut i = 0;
        while i < chain.len() {
            if i + 1 < chain.len() {
                if let Some(&last) = out.last() {
                    if last.adjacent8(chain[i + 1]) {
                        i += 1;
                        changed = true;
                        continue;
                    }
                }
            }
            out.push(chain[i]);
            i += 1;
        }
        chain = out;
        if !changed {
            return chain;
        }
    }
}

fn find_anchors(field: &GradientField, mask: &[bool], cfg: &EdgeConfig) -> Vec<Point> {
    let (w, h) = (field.width(), field.height());
    let k = cfg.scan_interval.max(1);
    let mut anchors: Vec<(f64, u32, u32)> = Vec::new();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            if x % k != 0 && y % k != 0 {
                continue;
            }
            let i = field.idx(x, y);
            if mask[i] {
                anchors.push((field.mag[i], y, x));
            }
        }
    }
    // Strongest anchors seed chains first; ties resolve by position so the
    // output is a pure function of the input bytes.
    anchors.sort_unstable_by(|a, b| {
        b.0.partial_cmp(&a.0).unwrap().then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });
    anchors.into_iter().map(|(_, y, x)| Point::new(x, y)).collect()
}

/// Tail distribution of gradient magnitudes over 256 log-spaced bins; the
/// a-contrario background model is the image itself.
#[derive(Debug, Clone)]
pub struct MagnitudeHistogram {
    tail: Vec<u64>,
    total: u64,
    lo: f64,
    hi: f64,
}

const HIST_BINS: usize = 256;

impl MagnitudeHistogram {
    pub fn new(field: &GradientField) -> Self {
        let lo = 1.0f64;
        // Largest possible Sobel magnitude on 8-bit input.
        let hi = (2.0f64).sqrt() * 1020.0 + 1.0;
        let mut counts = vec![0u64; HIST_BINS];
        for &m in &field.mag {
            if m >= lo {
                counts[Self::bin(lo, hi, m)] += 1;
            }
        }
        let mut tail = vec![0u64; HIST_BINS + 1];
        for b in (0..HIST_BINS).rev() {
            tail[b] = tail[b + 1] + counts[b];
        }
        MagnitudeHistogram { tail, total: field.pixel_count() as u64, lo, hi }
    }

    fn bin(lo: f64, hi: f64, m: f64) -> usize {
        let t = (m / lo).ln() / (hi / lo).ln();
        ((t * HIST_BINS as f64).floor() as i64).clamp(0, HIST_BINS as i64 - 1) as usize
    }

    /// Fraction of pixels with magnitude at least `mu` (binned, so slightly
    /// conservative: same-bin pixels below `mu` are included).
    pub fn tail_fraction(&self, mu: f64) -> f64 {
        if mu < self.lo {
            return 1.0;
        }
        self.tail[Self::bin(self.lo, self.hi, mu)] as f64 / self.total as f64
    }
}

/// log10 of the number of false alarms: `N_tests * H^L` with
/// `N_tests = n_pixels^2`. A structure is meaningful when this is <= 0.
pub fn nfa_log10(n_pixels: usize, length: usize, tail_fraction: f64) -> f64 {
    if tail_fraction <= 0.0 {
        return f64::NEG_INFINITY;
    }
    2.0 * (n_pixels as f64).log10() + length as f64 * tail_fraction.log10()
}

/// Helmholtz validation of one segment: the minimum gradient magnitude along
/// the chain sets the level, the image's own magnitude distribution sets the
/// background model.
pub fn validate_segment(seg: &EdgeSegment, field: &GradientField, n_pixels: usize) -> bool {
    let hist = MagnitudeHistogram::new(field);
    validate_with_histogram(seg, field, &hist, n_pixels)
}

fn validate_with_histogram(
    seg: &EdgeSegment,
    field: &GradientField,
    hist: &MagnitudeHistogram,
    n_pixels: usize,
) -> bool {
    let mu_min = seg
        .pixels
        .iter()
        .map(|p| field.mag[field.idx(p.x, p.y)])
        .fold(f64::INFINITY, f64::min);
    nfa_log10(n_pixels, seg.len(), hist.tail_fraction(mu_min)) <= 0.0
}

/// Extract validated edge segments: smooth, differentiate, grow chains from
/// anchors, keep the chains that pass the a-contrario test.
pub fn detect_segments(img: &GrayImage, cfg: &EdgeConfig) -> EdgeDetection {
    assert!(img.width() >= 8 && img.height() >= 8, "ROI must be at least 8x8");
    let smoothed = gaussian_smooth(img, cfg.sigma).expect("validated sigma");
    let field = compute_gradients(&smoothed).expect("image at least 8x8");
    let mask = ridge_mask(&field, cfg.grad_threshold);
    let anchors = find_anchors(&field, &mask, cfg);

    let mut tracer = Tracer::new(&field, &mask);
    let hist = MagnitudeHistogram::new(&field);
    let n_pixels = field.pixel_count();
    let mut segments = Vec::new();
    for anchor in anchors {
        if tracer.visited[tracer.idx(anchor.x as i64, anchor.y as i64)] {
            continue;
        }
        // An anchor flush against an existing chain is residue of the same
        // edge (the mask is occasionally two wide at direction-sector
        // seams); seeding there would emit a duplicate sliver.
        let near_visited = (-1..=1i64).any(|dy| {
            (-1..=1i64).any(|dx| {
                let (nx, ny) = (anchor.x as i64 + dx, anchor.y as i64 + dy);
                tracer.in_bounds(nx, ny) && tracer.visited[tracer.idx(nx, ny)]
            })
        });
        if near_visited {
            continue;
        }
        let chain = tracer.trace(anchor);
        if chain.len() < cfg.min_segment_length {
            continue;
        }
        let seg = EdgeSegment::new(chain);
        if validate_with_histogram(&seg, &field, &hist, n_pixels) {
            segments.push(seg);
        }
    }
    EdgeDetection { segments, field }
}

/// Debug dump: segments as a JSON array of point arrays.
pub fn segments_to_json(segments: &[EdgeSegment]) -> String {
    let mut out = String::from("[");
    for (i, seg) in segments.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        for (j, p) in seg.pixels.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("[{},{}]", p.x, p.y));
        }
        out.push(']');
    }
    out.push(']');
    out
}
