//! Candidate generation, cost evaluation, pupil selection, and the full
//! per-frame pipeline.
//!
//! Every non-empty subset of the extracted arcs is pooled and fitted; a
//! candidate scores `rmse^2 * pi^eccentricity / phi^2` where phi is the
//! ratio of contributing arc pixels to the fitted perimeter. Small error,
//! low eccentricity, and broad arc support all pull the cost down; the
//! argmin candidate wins unless even it exceeds the divergence threshold,
//! in which case the frame is declared pupil-free.

use crate::arcs::{detect_corners, fit_spans, EllipticalArc};
use crate::config::{CandidateConfig, Config};
use crate::edges::detect_segments;
use crate::ellipse::{fit_ellipse_geometry, perimeter_axes, rmse_bounded, EllipseParams};
use crate::entropy::find_near_circular;
use crate::imaging::GrayImage;
use crate::roi::{detect_roi, RoiError, RoiResult};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Arc subset fused into one candidate ellipse.
#[derive(Debug, Clone, PartialEq)]
pub struct PupilCandidate {
    /// Indices into the arc list the candidate was generated from.
    pub arc_ids: Vec<usize>,
    pub fit: crate::ellipse::FitResult,
    /// Contributing arc pixels over fitted-ellipse perimeter.
    pub phi: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pupil,
    NoPupil,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pupil => "pupil",
            Verdict::NoPupil => "no_pupil",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectPath {
    Fast,
    Full,
}

impl DetectPath {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectPath::Fast => "fast",
            DetectPath::Full => "full",
        }
    }
}

/// Wall-clock microseconds per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimings {
    pub roi: u64,
    pub edges: u64,
    pub entropy: u64,
    pub corners: u64,
    pub arcs: u64,
    pub selection: u64,
}

impl StageTimings {
    pub fn total(&self) -> u64 {
        self.roi + self.edges + self.entropy + self.corners + self.arcs + self.selection
    }
}

/// Final outcome for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub verdict: Verdict,
    /// Present exactly when the verdict is `Pupil`, in full-image
    /// coordinates.
    pub ellipse: Option<EllipseParams>,
    pub cost: Option<f64>,
    pub roi: RoiResult,
    pub path: DetectPath,
    pub timings: StageTimings,
}

fn json_real(v: f64) -> String {
    // Fixed 6 decimals; normalize negative zero for byte-stable output.
    format!("{:.6}", v + 0.0)
}

impl DetectionResult {
    /// Canonical JSON with fixed field order and 6-decimal reals.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{");
        out.push_str(&format!("\"verdict\":\"{}\"", self.verdict.as_str()));
        if let Some(e) = &self.ellipse {
            out.push_str(&format!(
                ",\"ellipse\":{{\"cx\":{},\"cy\":{},\"a\":{},\"b\":{},\"theta_deg\":{}}}",
                json_real(e.cx),
                json_real(e.cy),
                json_real(e.a),
                json_real(e.b),
                json_real(e.theta.to_degrees())
            ));
        }
        if let Some(c) = self.cost {
            out.push_str(&format!(",\"cost\":{}", json_real(c)));
        }
        out.push_str(&format!(
            ",\"roi\":{{\"x\":{},\"y\":{},\"w\":{},\"h\":{}}}",
            self.roi.rect.x, self.roi.rect.y, self.roi.rect.w, self.roi.rect.h
        ));
        out.push_str(&format!(",\"path\":\"{}\"", self.path.as_str()));
        let t = &self.timings;
        out.push_str(&format!(
            ",\"timings_us\":{{\"roi\":{},\"edges\":{},\"entropy\":{},\"corners\":{},\"arcs\":{},\"selection\":{}}}",
            t.roi, t.edges, t.entropy, t.corners, t.arcs, t.selection
        ));
        out.push('}');
        out
    }

    /// Copy with zeroed timings, for byte-stable comparisons.
    pub fn with_zeroed_timings(&self) -> DetectionResult {
        DetectionResult { timings: StageTimings::default(), ..self.clone() }
    }
}

/// Candidate cost `rmse^2 * pi^eccentricity / phi^2`.
pub fn candidate_cost(rmse: f64, eccentricity: f64, phi: f64) -> f64 {
    rmse * rmse * std::f64::consts::PI.powf(eccentricity) / (phi * phi)
}

/// Pool every non-empty arc subset into a fitted candidate. Subsets whose
/// fused fit misses the RMSE bound are eliminated before phi and cost are
/// computed. With more than `max_arcs` arcs only the longest take part
/// (2^n - 1 subsets would otherwise be unbounded).
pub fn generate_candidates(arcs: &[EllipticalArc], cfg: &CandidateConfig) -> Vec<PupilCandidate> {
    if arcs.is_empty() {
        return Vec::new();
    }
    let mut chosen: Vec<usize> = (0..arcs.len()).collect();
    if arcs.len() > cfg.max_arcs {
        chosen.sort_by(|&a, &b| {
            arcs[b].span_length.cmp(&arcs[a].span_length).then_with(|| a.cmp(&b))
        });
        chosen.truncate(cfg.max_arcs);
        chosen.sort_unstable();
    }
    let n = chosen.len();
    let mut out = Vec::new();
    let mut points: Vec<[f64; 2]> = Vec::new();
    for mask in 1u32..(1u32 << n) {
        points.clear();
        let mut arc_ids = Vec::new();
        let mut support = 0usize;
        for (bit, &arc_idx) in chosen.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                let arc = &arcs[arc_idx];
                points.extend(arc.pixels.iter().map(|p| [p.x as f64, p.y as f64]));
                support += arc.span_length;
                arc_ids.push(arc_idx);
            }
        }
        let Ok((ellipse, method)) = fit_ellipse_geometry(&points) else { continue };
        if ellipse.eccentricity() > cfg.max_eccentricity {
            continue;
        }
        let Some(rmse) = rmse_bounded(&ellipse, &points, cfg.rmse_bound) else { continue };
        let phi = support as f64 / perimeter_axes(ellipse.a, ellipse.b);
        let cost = candidate_cost(rmse, ellipse.eccentricity(), phi);
        out.push(PupilCandidate {
            arc_ids,
            fit: crate::ellipse::FitResult { ellipse, rmse, n_points: points.len(), method },
            phi,
            cost,
        });
    }
    out
}

/// Argmin-cost candidate, or `None` when the list is empty or even the best
/// cost diverges past the threshold (the no-pupil verdict). Exact cost ties
/// break toward larger phi, then smaller rmse, then enumeration order.
pub fn select_pupil(candidates: &[PupilCandidate], threshold: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, cand) in candidates.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let old = &candidates[b];
                cand.cost < old.cost
                    || (cand.cost == old.cost
                        && (cand.phi > old.phi
                            || (cand.phi == old.phi && cand.fit.rmse < old.fit.rmse)))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best.filter(|&i| candidates[i].cost <= threshold)
}

/// Run the full pipeline on one frame.
///
/// ROI search, edge segments, entropy screening, then either the fast path
/// (arcs from the near-circular segment only) or the full path over all
/// high-entropy segments; candidates are fused and the cost argmin decides.
/// Only a failed ROI search is an error; any empty intermediate stage is a
/// normal no-pupil outcome.
pub fn detect(img: &GrayImage, cfg: &Config) -> Result<DetectionResult, RoiError> {
    let t0 = Instant::now();
    let roi = detect_roi(img, &cfg.roi)?;
    let t_roi = t0.elapsed().as_micros() as u64;

    let crop_rect = roi.rect.expanded(cfg.roi.expand, img.width(), img.height());
    let sub = img.crop(crop_rect).expect("expanded ROI stays in bounds");

    let t1 = Instant::now();
    let detection = detect_segments(&sub, &cfg.edges);
    let t_edges = t1.elapsed().as_micros() as u64;

    let t2 = Instant::now();
    let near = find_near_circular(&detection.segments, &detection.field, &cfg.shape);
    let path = if near.is_some() { DetectPath::Fast } else { DetectPath::Full };
    let targets = crate::arcs::arc_targets(
        &detection.segments,
        &detection.field,
        near.as_ref(),
        &cfg.arcs,
        &cfg.shape,
    );
    let t_entropy = t2.elapsed().as_micros() as u64;

    let t3 = Instant::now();
    let corner_lists: Vec<_> = targets
        .iter()
        .map(|&i| {
            detect_corners(i, &detection.segments[i], &detection.field, &cfg.arcs, &cfg.shape)
        })
        .collect();
    let t_corners = t3.elapsed().as_micros() as u64;

    let t4 = Instant::now();
    let mut arcs = Vec::new();
    for (&i, corners) in targets.iter().zip(&corner_lists) {
        fit_spans(i, &detection.segments[i], corners, &cfg.arcs, &cfg.shape, &mut arcs);
    }
    let t_arcs = t4.elapsed().as_micros() as u64;

    let t5 = Instant::now();
    let candidates = generate_candidates(&arcs, &cfg.candidates);
    let selected = select_pupil(&candidates, cfg.candidates.cost_threshold);
    let t_selection = t5.elapsed().as_micros() as u64;

    let timings = StageTimings {
        roi: t_roi,
        edges: t_edges,
        entropy: t_entropy,
        corners: t_corners,
        arcs: t_arcs,
        selection: t_selection,
    };
    let result = match selected {
        Some(i) => {
            let cand = &candidates[i];
            let e = &cand.fit.ellipse;
            // Arc coordinates are ROI-local; report in image coordinates.
            let ellipse = EllipseParams::new(
                e.cx + crop_rect.x as f64,
                e.cy + crop_rect.y as f64,
                e.a,
                e.b,
                e.theta,
            );
            DetectionResult {
                verdict: Verdict::Pupil,
                ellipse: Some(ellipse),
                cost: Some(cand.cost),
                roi,
                path,
                timings,
            }
        }
        None => DetectionResult {
            verdict: Verdict::NoPupil,
            ellipse: None,
            cost: None,
            roi,
            path,
            timings,
        },
    };
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipse::{fit_ellipse, overlap_ratio, EllipseRecord};
    use crate::imaging::Point;
    use crate::synth::{render, GtClass, SceneSpec};

    /// Build an arc directly from a parameter range of an ellipse.
    fn arc_from(e: &EllipseParams, t0: f64, t1: f64, n: usize, segment: usize) -> EllipticalArc {
        let pixels: Vec<Point> = (0..n)
            .map(|k| {
                let t = t0 + (t1 - t0) * k as f64 / (n - 1) as f64;
                let p = e.point_at(t);
                Point::new(p[0].round() as u32, p[1].round() as u32)
            })
            .collect();
        let pts: Vec<[f64; 2]> = pixels.iter().map(|p| [p.x as f64, p.y as f64]).collect();
        let fit = fit_ellipse(&pts).unwrap();
        EllipticalArc { segment, span_length: pixels.len(), pixels, fit }
    }

    #[test]
    fn three_arcs_enumerate_seven_candidates() {
        let e = EllipseParams::new(200.0, 200.0, 80.0, 60.0, 0.3);
        let arcs = vec![
            arc_from(&e, 0.1, 1.6, 40, 0),
            arc_from(&e, 2.2, 3.6, 40, 0),
            arc_from(&e, 4.2, 5.8, 40, 0),
        ];
        let candidates = generate_candidates(&arcs, &CandidateConfig::default());
        // All subsets of arcs from one ellipse fit well, so the full subset
        // lattice survives.
        assert_eq!(candidates.len(), 7);
    }

    #[test]
    fn single_full_rim_arc_has_phi_near_one() {
        let e = EllipseParams::new(150.0, 150.0, 70.0, 70.0, 0.0);
        let arcs = vec![arc_from(&e, 0.0, std::f64::consts::TAU * 0.999, 400, 0)];
        let candidates = generate_candidates(&arcs, &CandidateConfig::default());
        assert_eq!(candidates.len(), 1);
        assert!((candidates[0].phi - 0.91).abs() < 0.12, "phi {}", candidates[0].phi);
    }

    #[test]
    fn mixtures_with_foreign_arc_are_eliminated() {
        let pupil = EllipseParams::new(200.0, 200.0, 60.0, 55.0, 0.1);
        // A shallow arc from a much larger circle, posing as an eyelid edge.
        let lid = EllipseParams::new(200.0, 640.0, 500.0, 500.0, 0.0);
        let arcs = vec![
            arc_from(&pupil, 0.2, 1.8, 50, 0),
            arc_from(&pupil, 2.6, 4.4, 50, 0),
            arc_from(&lid, 4.5, 4.9, 60, 1),
        ];
        let candidates = generate_candidates(&arcs, &CandidateConfig::default());
        let pupil_pair: Vec<_> =
            candidates.iter().filter(|c| c.arc_ids == vec![0, 1]).collect();
        assert_eq!(pupil_pair.len(), 1, "pupil pair subset must survive");
        for c in &candidates {
            let mixes = c.arc_ids.contains(&2) && c.arc_ids.len() > 1;
            assert!(!mixes, "mixed subset {:?} survived with rmse {}", c.arc_ids, c.fit.rmse);
        }
        let best = select_pupil(&candidates, 50.0).unwrap();
        let got = &candidates[best].fit.ellipse;
        assert!((got.cx - pupil.cx).hypot(got.cy - pupil.cy) < 2.0);
    }

    #[test]
    fn cost_closed_forms() {
        assert!((candidate_cost(1.0, 0.0, 1.0) - 1.0).abs() < 1e-12);
        let c = candidate_cost(2.0, 0.5, 0.5);
        let want = 4.0 * std::f64::consts::PI.sqrt() / 0.25;
        assert!((c - want).abs() < 1e-9, "{c} vs {want}");
        assert!((c - 28.36).abs() < 0.01);
    }

    #[test]
    fn empty_candidates_mean_no_pupil() {
        assert_eq!(select_pupil(&[], 50.0), None);
    }

    #[test]
    fn divergent_costs_mean_no_pupil() {
        let e = EllipseParams::new(100.0, 100.0, 50.0, 40.0, 0.0);
        let arcs = vec![arc_from(&e, 0.0, 0.9, 40, 0)];
        let mut candidates = generate_candidates(&arcs, &CandidateConfig::default());
        for c in &mut candidates {
            c.cost = 1e6;
        }
        assert_eq!(select_pupil(&candidates, 50.0), None);
    }

    #[test]
    fn cost_monotonicity() {
        let mut state = 0xA5A5A5A5u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let eps = 0.01 + 3.0 * next();
            let ecc = next() * 0.999;
            let phi = 0.05 + next();
            let base = candidate_cost(eps, ecc, phi);
            assert!(candidate_cost(eps * 1.1, ecc, phi) > base);
            assert!(candidate_cost(eps, (ecc + 0.001).min(0.9999), phi) > base);
            assert!(candidate_cost(eps, ecc, phi * 1.1) < base);
        }
    }

    #[test]
    fn argmin_invariant_under_positive_scaling() {
        let e = EllipseParams::new(300.0, 300.0, 90.0, 70.0, 0.7);
        let arcs = vec![
            arc_from(&e, 0.0, 1.5, 45, 0),
            arc_from(&e, 1.7, 3.2, 45, 0),
            arc_from(&e, 3.4, 5.0, 45, 0),
        ];
        let candidates = generate_candidates(&arcs, &CandidateConfig::default());
        let baseline = select_pupil(&candidates, f64::INFINITY).unwrap();
        for scale in [0.001, 0.5, 7.0, 1234.5] {
            let scaled: Vec<PupilCandidate> = candidates
                .iter()
                .map(|c| PupilCandidate { cost: c.cost * scale, ..c.clone() })
                .collect();
            assert_eq!(select_pupil(&scaled, f64::INFINITY), Some(baseline));
        }
    }

    fn clean_spec(seed: u64) -> SceneSpec {
        SceneSpec {
            pupil: Some(EllipseRecord { cx: 600.0, cy: 380.0, a: 52.0, b: 47.0, theta_deg: 30.0 }),
            iris_cx: 600.0,
            iris_cy: 380.0,
            iris_radius: 150.0,
            noise_sigma: 1.0,
            seed,
            ..SceneSpec::default()
        }
    }

    #[test]
    fn clean_frame_takes_fast_path_with_high_overlap() {
        let spec = clean_spec(21);
        let (img, gt) = render(&spec).unwrap();
        let gt = gt.unwrap();
        let res = detect(&img, &Config::default()).unwrap();
        assert_eq!(res.verdict, Verdict::Pupil);
        assert_eq!(res.path, DetectPath::Fast);
        let or = overlap_ratio(res.ellipse.as_ref().unwrap(), &gt, (1280, 720));
        assert!(or >= 0.95, "overlap {or}");
        assert!(res.cost.unwrap() <= Config::default().candidates.cost_threshold);
    }

    #[test]
    fn occluded_frame_takes_full_path_and_still_detects() {
        let spec = SceneSpec { occlusion: 0.40, ..clean_spec(22) };
        let (img, gt) = render(&spec).unwrap();
        let gt = gt.unwrap();
        let res = detect(&img, &Config::default()).unwrap();
        assert_eq!(res.path, DetectPath::Full);
        assert_eq!(res.verdict, Verdict::Pupil, "cost {:?}", res.cost);
        let or = overlap_ratio(res.ellipse.as_ref().unwrap(), &gt, (1280, 720));
        assert!(or >= 0.85, "overlap {or}");
    }

    #[test]
    fn blink_frame_yields_no_pupil() {
        let frames = crate::synth::corpus(99, 0, 0, 3);
        for f in frames {
            assert_eq!(f.class, GtClass::Absent);
            let (img, gt) = render(&f.spec).unwrap();
            assert!(gt.is_none());
            let res = detect(&img, &Config::default()).unwrap();
            assert_eq!(res.verdict, Verdict::NoPupil, "frame {} cost {:?}", f.id, res.cost);
            assert!(res.ellipse.is_none());
        }
    }

    #[test]
    fn detection_json_is_deterministic_modulo_timings() {
        let spec = clean_spec(23);
        let (img, _) = render(&spec).unwrap();
        let a = detect(&img, &Config::default()).unwrap();
        let b = detect(&img, &Config::default()).unwrap();
        assert_eq!(a.with_zeroed_timings().to_json(), b.with_zeroed_timings().to_json());
        let json = a.to_json();
        assert!(json.starts_with("{\"verdict\":\"pupil\",\"ellipse\":{\"cx\":"));
        assert!(json.contains("\"path\":\"fast\""));
        assert!(json.contains("\"timings_us\":{\"roi\":"));
    }

    #[test]
    fn selected_candidate_respects_bounds() {
        let e = EllipseParams::new(250.0, 250.0, 75.0, 70.0, 0.2);
        let arcs = vec![arc_from(&e, 0.0, 2.0, 60, 0), arc_from(&e, 2.5, 4.5, 60, 0)];
        let cfg = CandidateConfig::default();
        let candidates = generate_candidates(&arcs, &cfg);
        if let Some(i) = select_pupil(&candidates, cfg.cost_threshold) {
            assert!(candidates[i].fit.rmse <= cfg.rmse_bound);
            assert!(candidates[i].cost <= cfg.cost_threshold);
        }
    }

    #[test]
    fn arc_cap_keeps_longest_ten() {
        let e = EllipseParams::new(400.0, 400.0, 120.0, 100.0, 0.1);
        let mut arcs = Vec::new();
        for k in 0..12 {
            let t0 = k as f64 * 0.5;
            let n = 30 + k * 3;
            arcs.push(arc_from(&e, t0, t0 + 0.45, n, 0));
        }
        let candidates = generate_candidates(&arcs, &CandidateConfig::default());
        // 2^10 - 1 subsets at most, and the two shortest arcs never appear.
        assert!(candidates.len() <= 1023);
        for c in &candidates {
            assert!(!c.arc_ids.contains(&0) && !c.arc_ids.contains(&1), "{:?}", c.arc_ids);
        }
    }
}
